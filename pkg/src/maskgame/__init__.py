"""Combinatorial masking games: exact LP solver, GAM training, baselines, evaluation."""

from maskgame.baselines import RandomMaskSampler, greedy_mask, random_mask
from maskgame.errors import (
    CapacityError,
    ConfigurationError,
    DomainError,
    IterationLimitError,
    MaskGameError,
    SchemaError,
    SolverError,
    TrainingError,
)
from maskgame.evaluate import EvalReport, equilibrium_gap, evaluate
from maskgame.exact import EquilibriumResult, attacker_best_response, solve_lp_cg
from maskgame.fixtures import load_fixture
from maskgame.gam import GamResult, TrainConfig, gam_loss, train_gam, train_unconditional
from maskgame.game import (
    AttributeSchema,
    CostFn,
    DefenderTable,
    Exploit,
    GameSpec,
    Prior,
    ValueFn,
    load_game,
    matches,
    observe,
    posterior,
    save_game,
)
from maskgame.generator import case_study_instance, generate_structured_instance, table1_instance

__version__ = "0.1.0"

__all__ = [
    "AttributeSchema", "CapacityError", "ConfigurationError", "CostFn", "DefenderTable",
    "DomainError", "EquilibriumResult", "EvalReport", "Exploit", "GamResult", "GameSpec",
    "IterationLimitError", "MaskGameError", "Prior", "RandomMaskSampler", "SchemaError",
    "SolverError", "TrainConfig", "TrainingError", "ValueFn", "attacker_best_response",
    "case_study_instance", "equilibrium_gap", "evaluate", "gam_loss", "generate_structured_instance",
    "greedy_mask", "load_fixture", "load_game", "matches", "observe", "posterior", "random_mask",
    "save_game", "solve_lp_cg", "table1_instance", "train_gam", "train_unconditional",
]
