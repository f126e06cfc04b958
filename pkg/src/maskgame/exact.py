"""Exact equilibria by linear programming with constraint generation.

The defender LP ranges over q(y; x) for every support configuration and every
joint mask, plus the attacker's value u. Each attacker pure strategy z (a map
observation -> exploit) contributes one constraint u >= u(q, z). Rather than
enumerating all of them, constraints are added one best response at a time
until the best response no longer beats u by more than ``eps``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from maskgame import kernels
from maskgame.errors import CapacityError, IterationLimitError, SolverError
from maskgame.game import ENUMERATION_CAP, DefenderTable, GameSpec, all_masks, enumerate_support
from maskgame.simplex import LinearProgram, solve_linear_program

log = logging.getLogger(__name__)


@dataclass
class EnumeratedGame:
    """Support x mask cross product with observation ids, shared by the LP and the oracle."""

    game: GameSpec
    configs: np.ndarray  # (K, N) int8
    probs: np.ndarray  # (K,)
    masks: np.ndarray  # (Y, N) uint8
    gains: np.ndarray  # (K, E): sum_k v(x^k) delta(x^k in X^e)
    costs: np.ndarray  # (Y,)
    obs_id: np.ndarray  # (K, Y) observation index of x * y
    observations: np.ndarray  # (G, N) int8

    @classmethod
    def build(cls, game: GameSpec) -> "EnumeratedGame":
        configs, probs = enumerate_support(game)
        if len(configs) * 2**game.N > ENUMERATION_CAP:
            raise CapacityError(
                f"{len(configs)} configurations x {2**game.N} masks exceeds the cap {ENUMERATION_CAP}; "
                "use the GAM solver"
            )
        masks = all_masks(game.N)
        obs = (configs[:, None, :] * masks[None, :, :]).reshape(-1, game.N)
        inverse, first = kernels.group_rows(obs)
        return cls(
            game=game,
            configs=configs,
            probs=probs,
            masks=masks,
            gains=game.attack_weights(configs),
            costs=game.mask_cost(masks),
            obs_id=inverse.reshape(len(configs), len(masks)),
            observations=obs[first],
        )

    @property
    def num_observations(self) -> int:
        return len(self.observations)

    def attack_matrix(self, choice: np.ndarray) -> np.ndarray:
        """p(x) * gain(x, z(x*y)) for a pure strategy, shape (K, Y)."""
        K = len(self.configs)
        return self.probs[:, None] * self.gains[np.arange(K)[:, None], choice[self.obs_id]]


@dataclass
class PureAttackStrategy:
    """Deterministic attacker: ``choice[g]`` is the exploit played at observation ``g``."""

    observations: np.ndarray
    choice: np.ndarray

    def as_dict(self) -> dict:
        return {tuple(int(v) for v in o): int(e) for o, e in zip(self.observations, self.choice)}


@dataclass
class MixedAttackStrategy:
    """Behavioral attacker strategy: ``probs[g]`` is a distribution over exploits."""

    observations: np.ndarray
    probs: np.ndarray

    def as_dict(self) -> dict:
        return {tuple(int(v) for v in o): p.tolist() for o, p in zip(self.observations, self.probs)}

    def lookup(self, obs_rows: np.ndarray) -> np.ndarray:
        """Exploit distributions for arbitrary observation rows (unseen rows get uniform)."""
        index = {o.tobytes(): g for g, o in enumerate(np.ascontiguousarray(self.observations, dtype=np.int8))}
        E = self.probs.shape[1]
        out = np.full((len(obs_rows), E), 1.0 / max(E, 1))
        rows = np.ascontiguousarray(obs_rows, dtype=np.int8)
        for i, r in enumerate(rows):
            g = index.get(r.tobytes())
            if g is not None:
                out[i] = self.probs[g]
        return out


@dataclass
class EquilibriumResult:
    defender: DefenderTable
    attacker: MixedAttackStrategy
    defender_loss: float
    attacker_value: float
    iterations: int
    gap: float
    history: list = field(default_factory=list)

    def to_dict(self, threshold: float = 1e-6) -> dict:
        """Strategy dump: masks with probability above ``threshold`` per configuration."""
        defender = []
        for x, row in zip(self.defender.configs, self.defender.q):
            support = np.flatnonzero(row > threshold)
            defender.append({
                "x": [int(v) for v in x],
                "masks": [[int(b) for b in self.defender.masks[j]] for j in support],
                "probs": [float(row[j]) for j in support],
            })
        attacker = [
            {"obs": [int(v) for v in o], "probs": [float(p) for p in probs]}
            for o, probs in zip(self.attacker.observations, self.attacker.probs)
        ]
        return {
            "method": "lp-cg",
            "defender_loss": self.defender_loss,
            "attacker_value": self.attacker_value,
            "gap": self.gap,
            "iterations": self.iterations,
            "defender": defender,
            "attacker": attacker,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def attacker_best_response(q: DefenderTable, game: GameSpec, enum: EnumeratedGame | None = None):
    """Exact pure best response to an explicit defender table.

    The attacker's problem separates per observation: at each observation pick
    the exploit with the largest posterior-weighted gain. Ties go to the
    smallest exploit index.

    Returns:
      (PureAttackStrategy, value) where value is the attacker's expected gain.
    """
    enum = enum or EnumeratedGame.build(game)
    G = enum.num_observations
    E = game.num_exploits
    if E == 0:
        return PureAttackStrategy(enum.observations, np.zeros(G, dtype=np.intp)), 0.0
    joint = (q.probs[:, None] * q.q)[:, :, None] * enum.gains[:, None, :]
    choice, best = kernels.group_argmax(enum.obs_id.ravel(), joint.reshape(-1, E), G)
    return PureAttackStrategy(enum.observations, choice), float(best.sum())


def attack_value(q: DefenderTable, enum: EnumeratedGame, z_probs: np.ndarray) -> float:
    """Expected attacker gain of a behavioral strategy ``z_probs`` (G, E) against ``q``."""
    per_pair = (z_probs[enum.obs_id] * enum.gains[:, None, :]).sum(axis=2)
    return float((q.probs[:, None] * q.q * per_pair).sum())


def build_defender_lp(game: GameSpec, Z, enum: EnumeratedGame | None = None) -> LinearProgram:
    """Restricted defender LP over the attacker strategies in ``Z``.

    Variables are q(y; x) flattened row-major over (support, masks), then u.
    Rows: one attack constraint per strategy in Z, then one simplex equality
    per support configuration.
    """
    enum = enum or EnumeratedGame.build(game)
    K, Y = len(enum.configs), len(enum.masks)
    nq = K * Y
    c = np.concatenate([(enum.probs[:, None] * enum.costs[None, :]).ravel(), [1.0]])
    rows, senses, rhs = [], [], []
    for z in Z:
        choice = z.choice if isinstance(z, PureAttackStrategy) else np.asarray(z)
        rows.append(np.concatenate([enum.attack_matrix(choice).ravel(), [-1.0]]))
        senses.append("<=")
        rhs.append(0.0)
    simplex_rows = np.zeros((K, nq + 1))
    for k in range(K):
        simplex_rows[k, k * Y:(k + 1) * Y] = 1.0
    A = np.vstack([np.array(rows).reshape(-1, nq + 1), simplex_rows])
    return LinearProgram(c, A, senses + ["=="] * K, rhs + [1.0] * K, free=[nq])


def solve_lp_cg(
    game: GameSpec,
    eps: float = 1e-5,
    seed: int = 0,
    max_rounds: int = 500,
    backend: str = "simplex",
) -> EquilibriumResult:
    """Bayes-Nash equilibrium by constraint generation.

    Starts from one uniformly random pure attacker strategy, then alternates
    restricted defender LP and exact attacker best response until
    |LP objective - expected cost - best response value| <= eps.

    Raises:
      CapacityError: game too large to enumerate.
      SolverError: LP backend failure.
      IterationLimitError: no convergence within ``max_rounds``.
    """
    enum = EnumeratedGame.build(game)
    K, Y = len(enum.configs), len(enum.masks)
    G, E = enum.num_observations, game.num_exploits

    if E == 0:
        q = np.zeros((K, Y))
        q[:, -1] = 1.0
        table = DefenderTable(enum.configs, enum.probs, enum.masks, q)
        return EquilibriumResult(table, MixedAttackStrategy(enum.observations, np.zeros((G, 0))),
                                 0.0, 0.0, 0, 0.0, [0.0])

    rng = np.random.default_rng(seed)
    Z = [PureAttackStrategy(enum.observations, rng.integers(0, E, size=G))]
    history = []
    gap = np.inf
    for rounds in range(1, max_rounds + 1):
        lp = build_defender_lp(game, Z, enum)
        res = solve_linear_program(lp, backend=backend)
        if not res.ok:
            raise SolverError(f"defender LP returned status {res.status} in round {rounds}")
        q = np.maximum(res.x[:-1].reshape(K, Y), 0.0)
        q /= q.sum(axis=1, keepdims=True)
        table = DefenderTable(enum.configs, enum.probs, enum.masks, q)
        u = float(res.x[-1])
        z_br, br_value = attacker_best_response(table, game, enum)
        cost = table.expected_cost(game)
        gap = abs(res.value - cost - br_value)
        history.append(res.value)
        log.debug("round %d: objective %.8f, best response %.8f, gap %.3g", rounds, res.value, br_value, gap)
        if gap <= eps:
            break
        Z.append(z_br)
    else:
        raise IterationLimitError(f"constraint generation did not converge in {max_rounds} rounds", gap)

    # attacker equilibrium strategy: dual weights on the attack constraints
    lam = np.maximum(-res.duals[:len(Z)], 0.0)
    if lam.sum() <= 0:
        lam = np.zeros(len(Z))
        lam[-1] = 1.0
    lam /= lam.sum()
    z = np.zeros((G, E))
    for w, strat in zip(lam, Z):
        z[np.arange(G), strat.choice] += w
    return EquilibriumResult(
        defender=table,
        attacker=MixedAttackStrategy(enum.observations, z),
        defender_loss=u + cost,
        attacker_value=u,
        iterations=rounds,
        gap=gap,
        history=history,
    )
