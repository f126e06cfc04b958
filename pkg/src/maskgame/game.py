"""Domain model for combinatorial masking games.

A device is a vector of ``n`` integer attributes drawn from per-attribute
domains that never contain 0. A mask ``y`` is a 0/1 vector; the attacker sees
``x * y`` where masked entries read as 0. With ``m`` devices every joint object
(configuration, mask, observation) is the flat concatenation of the per-device
vectors, length ``m * n``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from maskgame import kernels
from maskgame.errors import CapacityError, DomainError, SchemaError

ENUMERATION_CAP = 2**20

ROLES = ("os-flag", "os-version", "app-flag", "app-version", "port")
PRIOR_KINDS = ("explicit-table", "uniform-binary", "structured")
VALUE_KINDS = ("half-sum-plus-one-scale", "one-plus-apps", "explicit-table")


@dataclass(frozen=True)
class AttributeSchema:
    """Per-attribute finite domains, each a subset of {-1, 1, ..., V}."""

    domains: tuple[tuple[int, ...], ...]
    V: int
    roles: tuple[str, ...] | None = None

    def __post_init__(self):
        domains = tuple(tuple(sorted(set(int(v) for v in d))) for d in self.domains)
        object.__setattr__(self, "domains", domains)
        if self.V < 1:
            raise SchemaError(f"schema.V: must be >= 1, got {self.V}")
        for i, d in enumerate(domains):
            if not d:
                raise SchemaError(f"schema.domains[{i}]: empty domain")
            if 0 in d:
                raise SchemaError(f"schema.domains[{i}]: 0 is reserved for masked attributes")
            if min(d) < -1 or max(d) > self.V:
                raise SchemaError(f"schema.domains[{i}]: values must lie in [-1, V={self.V}]")
        if self.roles is not None:
            roles = tuple(self.roles)
            object.__setattr__(self, "roles", roles)
            if len(roles) != len(domains):
                raise SchemaError("schema.roles: length must equal n")
            bad = [r for r in roles if r not in ROLES]
            if bad:
                raise SchemaError(f"schema.roles: unknown role {bad[0]!r}")

    @property
    def n(self) -> int:
        return len(self.domains)

    @classmethod
    def binary(cls, n: int) -> "AttributeSchema":
        return cls(domains=((-1, 1),) * n, V=1)

    def validate_configuration(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise SchemaError(f"configuration length {x.shape} does not match n={self.n}")
        for i, (xi, d) in enumerate(zip(x.tolist(), self.domains)):
            if xi not in d:
                raise SchemaError(f"configuration[{i}]={xi} not in domain {d}")
        return x


@dataclass(frozen=True)
class Exploit:
    """Conjunction of per-attribute allowed value sets.

    Attributes absent from ``required`` are don't-care.
    """

    required: Mapping[int, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        req = {int(i): frozenset(int(v) for v in vals) for i, vals in dict(self.required).items()}
        for i, vals in req.items():
            if not vals:
                raise SchemaError(f"exploit requirement on attribute {i} is empty")
        object.__setattr__(self, "required", req)

    @classmethod
    def from_indicator(cls, code: Sequence[int]) -> "Exploit":
        """Compact binary encoding: 1 means the attribute must equal 1, -1 means don't-care."""
        return cls({i: {1} for i, c in enumerate(code) if c == 1})

    def validate(self, schema: AttributeSchema) -> None:
        for i, vals in self.required.items():
            if not 0 <= i < schema.n:
                raise SchemaError(f"exploit attribute index {i} out of range for n={schema.n}")
            if not vals <= set(schema.domains[i]):
                raise SchemaError(
                    f"exploit allowed set {sorted(vals)} at attribute {i} is not a subset of {schema.domains[i]}"
                )


@dataclass(frozen=True)
class Prior:
    kind: str
    table: tuple | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise SchemaError(f"prior.kind: unknown kind {self.kind!r}")
        if self.kind == "explicit-table":
            if not self.table:
                raise SchemaError("prior.table: required for explicit-table priors")
            table = tuple((tuple(int(v) for v in x), float(p)) for x, p in self.table)
            probs = np.array([p for _, p in table])
            if (probs < 0).any():
                raise SchemaError("prior.table: negative probability")
            if abs(probs.sum() - 1.0) > 1e-9:
                raise SchemaError(f"prior.table: probabilities sum to {probs.sum():.12g}, not 1")
            object.__setattr__(self, "table", table)


@dataclass(frozen=True)
class ValueFn:
    """Per-device attacker value v(x)."""

    kind: str = "half-sum-plus-one-scale"
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in VALUE_KINDS:
            raise SchemaError(f"value.kind: unknown kind {self.kind!r}")
        if self.kind == "explicit-table":
            if not self.table:
                raise SchemaError("value.table: required for explicit-table values")
            table = tuple((tuple(int(v) for v in x), float(val)) for x, val in self.table)
            if any(val < 0 for _, val in table):
                raise SchemaError("value.table: values must be nonnegative")
            object.__setattr__(self, "table", table)

    def __call__(self, X: np.ndarray, schema: AttributeSchema) -> np.ndarray:
        """Values for a (K, n) array of single-device configurations."""
        X = np.asarray(X)
        if self.kind == "half-sum-plus-one-scale":
            return 0.5 * (X.astype(np.float64) + 1.0).sum(axis=1)
        if self.kind == "one-plus-apps":
            if schema.roles is None:
                raise SchemaError("value.kind one-plus-apps needs schema.roles")
            apps = [i for i, r in enumerate(schema.roles) if r == "app-flag"]
            return 1.0 + (X[:, apps] != -1).sum(axis=1).astype(np.float64)
        lookup = dict(self.table)
        try:
            return np.array([lookup[tuple(int(v) for v in x)] for x in X], dtype=np.float64)
        except KeyError as exc:
            raise DomainError(f"value.table has no entry for configuration {exc.args[0]}") from None


@dataclass(frozen=True)
class CostFn:
    """Additive masking cost c(y) = sum_i c_i (1 - y_i), summed over devices."""

    per_attribute: tuple[float, ...]

    def __post_init__(self):
        costs = tuple(float(c) for c in self.per_attribute)
        if any(c < 0 or not math.isfinite(c) for c in costs):
            raise SchemaError("cost.per_attribute: entries must be finite and >= 0")
        object.__setattr__(self, "per_attribute", costs)

    @classmethod
    def uniform(cls, n: int, c: float) -> "CostFn":
        return cls((c,) * n)


@dataclass(frozen=True)
class GameSpec:
    schema: AttributeSchema
    m: int
    prior: Prior
    exploits: tuple[Exploit, ...]
    value: ValueFn
    cost: CostFn

    def __post_init__(self):
        object.__setattr__(self, "exploits", tuple(self.exploits))
        if self.m < 1:
            raise SchemaError(f"m: must be >= 1, got {self.m}")
        if len(self.cost.per_attribute) != self.schema.n:
            raise SchemaError(
                f"cost.per_attribute: length {len(self.cost.per_attribute)} does not match n={self.schema.n}"
            )
        for e in self.exploits:
            e.validate(self.schema)
        if self.prior.kind == "explicit-table":
            for x, _ in self.prior.table:
                if len(x) != self.N:
                    raise SchemaError(f"prior.table: configuration length {len(x)} != m*n={self.N}")
                for k in range(self.m):
                    self.schema.validate_configuration(np.array(x[k * self.schema.n:(k + 1) * self.schema.n]))
        if self.prior.kind == "structured" and self.schema.roles is None:
            raise SchemaError("prior.kind structured needs schema.roles")

    @property
    def n(self) -> int:
        return self.schema.n

    @property
    def N(self) -> int:
        """Length of joint vectors, m * n."""
        return self.m * self.schema.n

    @property
    def num_exploits(self) -> int:
        return len(self.exploits)

    def with_cost(self, c: float) -> "GameSpec":
        return replace(self, cost=CostFn.uniform(self.n, c))

    @cached_property
    def allowed(self) -> np.ndarray:
        """uint8 (E, n, V + 2) table; entry [e, i, v + 1] is 1 iff value v passes exploit e at i.

        Don't-care attributes are all ones (including the masked value 0).
        """
        table = np.ones((len(self.exploits), self.n, self.schema.V + 2), dtype=np.uint8)
        for e, exploit in enumerate(self.exploits):
            for i, vals in exploit.required.items():
                table[e, i, :] = 0
                for v in vals:
                    table[e, i, v + 1] = 1
        return table

    @cached_property
    def joint_costs(self) -> np.ndarray:
        return np.tile(np.asarray(self.cost.per_attribute), self.m)

    def device_values(self, X: np.ndarray) -> np.ndarray:
        """v(x^k) for every device of every joint configuration, shape (K, m)."""
        X = np.asarray(X)
        flat = X.reshape(-1, self.n)
        return self.value(flat, self.schema).reshape(X.shape[0], self.m)

    def attack_weights(self, X: np.ndarray) -> np.ndarray:
        """Per-exploit gain sum_k v(x^k) delta(x^k in X^e), shape (K, E).

        Does not depend on the mask.
        """
        X = np.ascontiguousarray(X, dtype=np.int8)
        K = X.shape[0]
        E = len(self.exploits)
        if E == 0:
            return np.zeros((K, 0))
        flat = X.reshape(-1, self.n)
        hits = kernels.match_table(flat, self.allowed).astype(np.float64)
        vals = self.value(flat, self.schema)
        return (hits * vals[:, None]).reshape(K, self.m, E).sum(axis=1)

    def mask_cost(self, Y: np.ndarray) -> np.ndarray:
        """Total masking cost of each joint mask row (continuous masks allowed)."""
        Y = np.asarray(Y, dtype=np.float64)
        return (1.0 - Y) @ self.joint_costs

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` joint configurations from the prior, int8 (size, m*n)."""
        if self.prior.kind == "explicit-table":
            configs = np.array([x for x, _ in self.prior.table], dtype=np.int8)
            probs = np.array([p for _, p in self.prior.table])
            idx = rng.choice(len(configs), size=size, p=probs / probs.sum())
            return configs[idx]
        if self.prior.kind == "uniform-binary":
            cols = [np.asarray(d, dtype=np.int8) for d in self.schema.domains] * self.m
            return np.stack([c[rng.integers(0, len(c), size=size)] for c in cols], axis=1).astype(np.int8)
        from maskgame.generator import StructuredLayout

        layout = StructuredLayout.from_schema(self.schema)
        devices = layout.sample(rng, size * self.m, self.schema.V)
        return devices.reshape(size, self.N)


@dataclass
class DefenderTable:
    """Explicit defender mixed strategy q(y; x) over an enumerated support.

    Attributes:
      configs: int8 (K, N) support configurations.
      probs: prior probability of each support configuration.
      masks: uint8 (2^N, N) every joint mask, row index = binary number, MSB first.
      q: float (K, 2^N), each row on the simplex.
    """

    configs: np.ndarray
    probs: np.ndarray
    masks: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        if self.q.shape != (self.configs.shape[0], self.masks.shape[0]):
            raise SchemaError("q shape does not match (support, masks)")

    def check_simplex(self, tol: float = 1e-7) -> bool:
        return bool((self.q >= -tol).all() and np.allclose(self.q.sum(axis=1), 1.0, atol=tol))

    def expected_cost(self, game: GameSpec) -> float:
        return float(self.probs @ self.q @ game.mask_cost(self.masks))

    def as_dict(self, threshold: float = 0.0) -> dict:
        out = {}
        for x, row in zip(self.configs, self.q):
            out[tuple(int(v) for v in x)] = [
                (tuple(int(b) for b in self.masks[j]), float(row[j])) for j in np.flatnonzero(row > threshold)
            ]
        return out

    def sample(self, rng: np.random.Generator, size: int):
        """Draw (x, y) pairs: x from the prior support, y from q(.; x)."""
        idx = rng.choice(len(self.probs), size=size, p=self.probs / self.probs.sum())
        cdf = np.cumsum(self.q, axis=1)
        cdf[:, -1] = 1.0
        u = rng.random(size)
        j = np.minimum((cdf[idx] < u[:, None]).sum(axis=1), self.masks.shape[0] - 1)
        return self.configs[idx], self.masks[j]

    @classmethod
    def constant(cls, game: GameSpec, mask) -> "DefenderTable":
        """Table that plays the same mask for every configuration."""
        configs, probs = enumerate_support(game)
        masks = all_masks(game.N)
        q = np.zeros((len(configs), len(masks)))
        q[:, mask_index(mask)] = 1.0
        return cls(configs, probs, masks, q)


def observe(x, y) -> np.ndarray:
    """Hadamard product x * y; masked attributes read as 0."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise SchemaError(f"configuration shape {x.shape} and mask shape {y.shape} differ")
    if not np.isin(y, (0, 1)).all():
        raise SchemaError("mask entries must be 0 or 1")
    return (x * y).astype(np.int8)


def recover(obs) -> tuple[np.ndarray, np.ndarray]:
    """Split an observation into (mask, visible values)."""
    obs = np.asarray(obs)
    mask = (obs != 0).astype(np.int8)
    return mask, obs[mask.astype(bool)]


def matches(x, e: Exploit) -> bool:
    """True iff configuration ``x`` satisfies every requirement of ``e``."""
    return all(int(x[i]) in vals for i, vals in e.required.items())


def all_masks(N: int) -> np.ndarray:
    """Every binary vector of length N, uint8 (2^N, N); last row is all ones."""
    idx = np.arange(2**N, dtype=np.int64)
    shifts = np.arange(N - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def mask_index(mask) -> int:
    bits = np.asarray(mask, dtype=np.int64)
    return int((bits << np.arange(len(bits) - 1, -1, -1)).sum())


def enumerate_support(game: GameSpec) -> tuple[np.ndarray, np.ndarray]:
    """All joint configurations with their prior probabilities.

    Returns:
      (configs int8 (K, m*n), probs (K,)) summing to 1.

    Raises:
      CapacityError: for structured priors or supports larger than the cap.
    """
    if game.prior.kind == "explicit-table":
        configs = np.array([x for x, _ in game.prior.table], dtype=np.int8)
        probs = np.array([p for _, p in game.prior.table])
        return configs, probs
    if game.prior.kind == "uniform-binary":
        size = math.prod(len(d) for d in game.schema.domains) ** game.m
        if size > ENUMERATION_CAP:
            raise CapacityError(
                f"support has {size} joint configurations (cap {ENUMERATION_CAP}); use the GAM solver"
            )
        configs = np.array(list(itertools.product(*(game.schema.domains * game.m))), dtype=np.int8)
        configs = configs.reshape(size, game.N)
        return configs, np.full(size, 1.0 / size)
    raise CapacityError("structured priors are not enumerable; use the GAM solver")


def posterior(q: DefenderTable, game: GameSpec, obs) -> dict:
    """Attacker posterior over support configurations given an observation.

    b(x) is proportional to p(x) q(y; x) [x * y == obs], with y read off the
    zero pattern of ``obs``.

    Raises:
      DomainError: when the observation has zero probability under (p, q).
    """
    obs = np.asarray(obs, dtype=np.int8)
    if obs.shape != (game.N,):
        raise SchemaError(f"observation length {obs.shape} does not match m*n={game.N}")
    y = (obs != 0).astype(np.uint8)
    j = mask_index(y)
    consistent = (q.configs * y == obs).all(axis=1)
    w = q.probs * q.q[:, j] * consistent
    total = w.sum()
    if total <= 0:
        raise DomainError(f"observation {obs.tolist()} has zero probability")
    w = w / total
    return {tuple(int(v) for v in q.configs[k]): float(w[k]) for k in np.flatnonzero(w > 0)}


# -- JSON game-spec files ---------------------------------------------------


def game_to_dict(game: GameSpec) -> dict:
    prior = {"kind": game.prior.kind}
    if game.prior.kind == "explicit-table":
        prior["table"] = [[list(x), p] for x, p in game.prior.table]
    if game.prior.seed is not None:
        prior["seed"] = game.prior.seed
    value = {"kind": game.value.kind}
    if game.value.kind == "explicit-table":
        value["table"] = [[list(x), v] for x, v in game.value.table]
    return {
        "schema": {
            "n": game.n,
            "V": game.schema.V,
            "domains": [list(d) for d in game.schema.domains],
            "roles": list(game.schema.roles) if game.schema.roles is not None else None,
        },
        "m": game.m,
        "prior": prior,
        "exploits": [{str(i): sorted(v) for i, v in sorted(e.required.items())} for e in game.exploits],
        "value": value,
        "cost": {"per_attribute": list(game.cost.per_attribute)},
    }


def _require(d: Mapping, key: str, where: str):
    if not isinstance(d, Mapping) or key not in d:
        raise SchemaError(f"{where}{key}: missing required field")
    return d[key]


def game_from_dict(doc: Mapping) -> GameSpec:
    schema_doc = _require(doc, "schema", "")
    n = _require(schema_doc, "n", "schema.")
    V = _require(schema_doc, "V", "schema.")
    domains = schema_doc.get("domains") or [[-1, 1]] * n
    if len(domains) != n:
        raise SchemaError(f"schema.domains: has {len(domains)} entries, expected n={n}")
    schema = AttributeSchema(tuple(tuple(d) for d in domains), V, schema_doc.get("roles"))
    m = _require(doc, "m", "")
    prior_doc = _require(doc, "prior", "")
    prior = Prior(_require(prior_doc, "kind", "prior."), prior_doc.get("table"), prior_doc.get("seed"))
    exploits = []
    for k, e in enumerate(_require(doc, "exploits", "")):
        if not isinstance(e, Mapping):
            raise SchemaError(f"exploits[{k}]: expected an object mapping attribute -> allowed values")
        try:
            exploits.append(Exploit({int(a): v for a, v in e.items()}))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"exploits[{k}]: {exc}") from None
    value_doc = _require(doc, "value", "")
    value = ValueFn(_require(value_doc, "kind", "value."), value_doc.get("table"))
    cost = CostFn(_require(_require(doc, "cost", ""), "per_attribute", "cost."))
    return GameSpec(schema, int(m), prior, tuple(exploits), value, cost)


def load_game(path) -> GameSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return game_from_dict(doc)


def save_game(game: GameSpec, path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game), indent=1) + "\n")
