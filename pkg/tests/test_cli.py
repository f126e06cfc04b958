import json
import subprocess
import sys

import pytest

from maskgame.cli import main
from maskgame.evaluate import read_csv
from maskgame.fixtures import NAMES

FAST = ["--iters", "20", "--batch", "200", "--eval-samples", "2000"]


def test_fixtures_lists_bundled_games(capsys):
    assert main(["fixtures"]) == 0
    out = capsys.readouterr().out
    for name in NAMES:
        assert name in out


def test_solve_lp_on_fixture(tmp_path, capsys):
    assert main(["solve", "--method", "lp-cg", "--fixture", "table1-n4", "--out", str(tmp_path)]) == 0
    assert "1.25" in capsys.readouterr().out
    doc = json.loads((tmp_path / "strategy-0.json").read_text())
    assert doc["defender_loss"] == pytest.approx(1.25, abs=0.01)
    rows = read_csv(tmp_path / "results.csv")
    assert len(rows) == 1 and rows[0]["method"] == "lp-cg"


def test_solve_random_writes_one_row_per_seed(tmp_path):
    assert main(["solve", "--method", "random", "--n", "4", "--seeds", "3", "--out", str(tmp_path),
                 "--eval-samples", "2000"]) == 0
    rows = read_csv(tmp_path / "results.csv")
    assert [r["seed"] for r in rows] == ["0", "1", "2"]
    assert all(r["status"] == "ok" for r in rows)


def test_solve_gam_writes_parameters(tmp_path):
    assert main(["solve", "--method", "gam", "--fixture", "table1-n4", "--out", str(tmp_path), *FAST]) == 0
    assert (tmp_path / "netparams-0.bin").exists()
    assert (tmp_path / "strategy-0.json").exists()


def test_unknown_method_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--method", "bogus", "--n", "4", "--out", str(tmp_path)])
    assert info.value.code == 2


def test_two_sources_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--method", "random", "--n", "4", "--fixture", "table1-n4", "--out", str(tmp_path)])
    assert info.value.code == 2


def test_no_source_is_usage_error(tmp_path):
    assert main(["solve", "--method", "random", "--out", str(tmp_path)]) == 2


def test_invalid_cost_ramp_is_usage_error(tmp_path):
    assert main(["solve", "--method", "gam", "--n", "4", "--cost-ramp", "2", "--out", str(tmp_path)]) == 2


def test_bad_spec_is_schema_error(tmp_path, capsys):
    spec = tmp_path / "bad.json"
    spec.write_text(json.dumps({"schema": {"V": 1}, "m": 1}))
    assert main(["solve", "--method", "lp-cg", "--spec", str(spec), "--out", str(tmp_path)]) == 3
    assert "schema.n" in capsys.readouterr().err


def test_missing_spec_file_is_schema_error(tmp_path):
    assert main(["solve", "--method", "lp-cg", "--spec", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path)]) == 3


def test_lp_on_oversized_game_is_solver_error(tmp_path):
    assert main(["solve", "--method", "lp-cg", "--n", "6", "--m", "2", "--out", str(tmp_path)]) == 4


def _experiment(out):
    return main(["experiment", "--n", "20", "--axis", "n", "--values", "20,40", "--methods", "gam,random",
                 "--seeds", "2", "--out", str(out), *FAST])


def test_experiment_grid_and_reproducibility(tmp_path):
    assert _experiment(tmp_path / "a") == 0
    assert _experiment(tmp_path / "b") == 0
    a = read_csv(tmp_path / "a" / "results.csv")
    b = read_csv(tmp_path / "b" / "results.csv")
    assert len(a) == 8
    assert {(r["method"], r["n"], r["seed"]) for r in a} == {
        (m, n, s) for m in ("gam", "random") for n in ("20", "40") for s in ("0", "1")}
    strip = lambda rows: [{k: v for k, v in r.items() if k != "runtime_seconds"} for r in rows]  # noqa: E731
    assert strip(a) == strip(b)


def test_experiment_records_failed_cells(tmp_path):
    # lp-cg cannot enumerate n=20, so every cell fails without aborting the sweep
    assert main(["experiment", "--n", "20", "--axis", "c", "--values", "0.01", "--methods", "lp-cg",
                 "--seeds", "1", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "results.csv")
    assert rows[0]["status"].startswith("error")


def test_case_study_frequencies(tmp_path):
    assert main(["case-study", "--seeds", "1", "--out", str(tmp_path), *FAST]) == 0
    doc = json.loads((tmp_path / "strategy-0.json").read_text())
    assert sum(e["freq"] for e in doc["exploit_freq"]) == pytest.approx(1.0, abs=1e-6)
    assert len(doc["attribute_mask_prob"]) == 20
    assert sum(doc["mask_support"]["probs"]) == pytest.approx(1.0)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "maskgame", "fixtures"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "table1-n4" in proc.stdout
