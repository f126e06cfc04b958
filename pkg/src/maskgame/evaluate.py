"""Monte-Carlo evaluation of defender strategies against a best-responding attacker.

A defender strategy is any sampler ``sampler(game, rng, size) -> (X, Y)``
returning joint configurations and masks. The attacker's best response is
computed on the sample itself: samples are grouped by observation x * y and
each group is assigned the exploit with the largest total gain.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from maskgame import kernels
from maskgame.game import DefenderTable, GameSpec

CSV_FIELDS = (
    "seed", "method", "n", "m", "num_exploits", "c", "V",
    "defender_loss", "attack_value", "cost_term", "runtime_seconds", "status",
)


class TableSampler:
    """Samples from an explicit defender table."""

    def __init__(self, table: DefenderTable):
        self.table = table

    def __call__(self, game, rng, size):
        X, Y = self.table.sample(rng, size)
        return X.astype(np.int8), Y.astype(np.int8)


class FixedMaskSampler:
    """Plays the same joint mask whatever the configuration."""

    def __init__(self, mask):
        self.mask = np.asarray(mask, dtype=np.int8)

    def __call__(self, game, rng, size):
        X = game.sample(rng, size)
        return X, np.broadcast_to(self.mask, X.shape).copy()


@dataclass
class EmpiricalBestResponse:
    value: float
    observations: np.ndarray
    choice: np.ndarray
    counts: np.ndarray
    inverse: np.ndarray = field(repr=False)


@dataclass
class EvalReport:
    defender_loss: float
    attack_value: float
    cost_term: float
    M: int
    seed: int
    exploit_freq: np.ndarray

    def row(self, method: str, game: GameSpec, runtime: float = 0.0, status: str = "ok") -> dict:
        costs = set(game.cost.per_attribute)
        return {
            "seed": self.seed,
            "method": method,
            "n": game.n,
            "m": game.m,
            "num_exploits": game.num_exploits,
            "c": costs.pop() if len(costs) == 1 else "mixed",
            "V": game.schema.V,
            "defender_loss": self.defender_loss,
            "attack_value": self.attack_value,
            "cost_term": self.cost_term,
            "runtime_seconds": runtime,
            "status": status,
        }


def best_response_on_samples(X, Y, game: GameSpec, gains=None, weights=None) -> EmpiricalBestResponse:
    """Best response to a fixed sample of (x, y) pairs.

    The value is the mean best-response gain per sample, or the weighted mean
    when per-sample ``weights`` are given (e.g. exact prior probabilities of
    an enumerated support). ``counts`` are the (weighted) group sizes.
    """
    obs = (np.asarray(X, dtype=np.int8) * np.asarray(Y, dtype=np.int8)).astype(np.int8)
    inverse, first = kernels.group_rows(obs)
    G = len(first)
    total = len(X) if weights is None else float(np.sum(weights))
    counts = np.bincount(inverse, weights=weights, minlength=G)
    if game.num_exploits == 0:
        return EmpiricalBestResponse(0.0, obs[first], np.zeros(G, dtype=np.intp), counts, inverse)
    if gains is None:
        gains = game.attack_weights(X)
    if weights is not None:
        gains = gains * np.asarray(weights)[:, None]
    choice, best = kernels.group_argmax(inverse, gains, G)
    return EmpiricalBestResponse(float(best.sum() / total), obs[first], choice, counts, inverse)


def empirical_best_response(sampler, game: GameSpec, M: int, seed: int = 0) -> EmpiricalBestResponse:
    """Draw ``M`` samples from ``sampler`` and best-respond to them."""
    if M <= 0:
        raise ValueError("M must be positive")
    rng = np.random.default_rng(seed)
    X, Y = sampler(game, rng, M)
    return best_response_on_samples(X, Y, game)


def evaluate_samples(X, Y, game: GameSpec, seed: int = 0, gains=None) -> EvalReport:
    br = best_response_on_samples(X, Y, game, gains)
    M = len(X)
    cost = float(game.mask_cost(Y).mean())
    E = game.num_exploits
    freq = np.bincount(br.choice, weights=br.counts, minlength=E)[:E] / M if E else np.zeros(0)
    return EvalReport(br.value + cost, br.value, cost, M, seed, freq)


def evaluate(sampler, game: GameSpec, M: int = 100_000, seed: int = 0) -> EvalReport:
    """Defender loss = empirical best-response value + mean masking cost.

    ``exploit_freq[e]`` is the fraction of samples whose observation leads the
    attacker to choose exploit ``e``.
    """
    if M <= 0:
        raise ValueError("M must be positive")
    rng = np.random.default_rng(seed)
    X, Y = sampler(game, rng, M)
    return evaluate_samples(X, Y, game, seed)


def _attacker_probs(attacker, obs):
    if hasattr(attacker, "lookup"):
        return attacker.lookup(obs)
    if hasattr(attacker, "probs") and callable(attacker.probs):
        return np.asarray(attacker.probs(obs), dtype=np.float64)
    return np.asarray(attacker(obs), dtype=np.float64)


def equilibrium_gap(sampler, attacker, game: GameSpec, M: int = 100_000, seed: int = 0) -> float:
    """Best-response value minus the given attacker's value on the same samples.

    ``attacker`` may be a MixedAttackStrategy, an AttackerNet, or a callable
    mapping observation rows to exploit distributions.
    """
    rng = np.random.default_rng(seed)
    X, Y = sampler(game, rng, M)
    gains = game.attack_weights(X)
    br = best_response_on_samples(X, Y, game, gains)
    if game.num_exploits == 0:
        return 0.0
    # evaluate the attacker once per distinct observation
    z = _attacker_probs(attacker, br.observations)[br.inverse]
    achieved = float((z * gains).sum() / M)
    return br.value - achieved


def mask_support(X, Y, threshold: float = 0.0):
    """Distinct masks with their empirical probabilities.

    Returns (masks (S, N), probs (S,)) sorted by decreasing probability; the
    transpose is the attribute-by-support matrix.
    """
    inverse, first = kernels.group_rows(np.asarray(Y, dtype=np.int8))
    counts = np.bincount(inverse) / len(Y)
    order = np.argsort(-counts, kind="stable")
    keep = order[counts[order] > threshold]
    return np.asarray(Y)[first[keep]], counts[keep]


def write_csv(path, rows) -> None:
    """Write rows in a canonical order (method, parameters, seed)."""
    rows = sorted(rows, key=lambda r: (str(r["method"]), r["n"], r["m"], r["num_exploits"], str(r["c"]),
                                       r["V"], r["seed"]))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in CSV_FIELDS})


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def report_attachment(report: EvalReport, X, Y, path=None) -> dict:
    masks, probs = mask_support(X, Y)
    doc = {
        "exploit_freq": report.exploit_freq.tolist(),
        "mask_support": {"matrix": masks.T.tolist(), "probs": probs.tolist()},
    }
    if path is not None:
        Path(path).write_text(json.dumps(doc, indent=1))
    return doc
