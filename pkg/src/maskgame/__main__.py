import sys

from maskgame.cli import main

sys.exit(main())
