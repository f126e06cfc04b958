"""Generative adversarial masking (GAM).

The defender's mixed strategy is a conditional generator: an MLP mapping a
joint configuration x and uniform noise r to a mask in (0, 1)^N (sigmoid
output, thresholded at 0.5 when snapped). The attacker is a softmax MLP over
exploits evaluated at x * y. Both are trained on a fixed sample of (x, r) by
alternating Adam steps: several ascent steps for the attacker on the attack
term, then one descent step for the generator on attack term + masking cost.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from maskgame.errors import ConfigurationError, TrainingError
from maskgame.evaluate import best_response_on_samples
from maskgame.game import GameSpec
from maskgame.nn import Adam, Mlp, load_nets, save_nets

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """GAM hyperparameters.

    ``batch`` is the number of (x, r) samples drawn once before training;
    ``snap_every`` is the binarization period (distinct from the sample count).
    ``cost_ramp`` is the fraction of iterations over which the generator's cost
    weight rises linearly to 1. With ``select_every`` > 0 the generator is
    scored every that many iterations by an empirical best response on a
    held-out sample of ``select_samples`` configurations, and the best-scoring
    parameters are returned.
    """

    batch: int = 5000
    iters: int = 500
    attacker_steps: int = 5
    lr_defender: float = 1e-3
    lr_attacker: float = 1e-3
    snap_every: int = 10
    attacker_warmup: int = 0
    cost_ramp: float = 0.5
    select_every: int = 10
    select_samples: int = 20000
    seed: int = 0
    hidden: tuple[int, ...] | None = None
    optimizer: str = "adam"
    dtype: str = "float32"

    def __post_init__(self):
        for name in ("batch", "iters", "attacker_steps", "snap_every"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if not 0.0 <= self.cost_ramp <= 1.0:
            raise ConfigurationError("cost_ramp must lie in [0, 1]")
        if self.select_every < 0 or self.select_samples < 1:
            raise ConfigurationError("select_every must be >= 0 and select_samples >= 1")
        if self.attacker_warmup < 0:
            raise ConfigurationError("attacker_warmup must be >= 0")
        if self.lr_defender <= 0 or self.lr_attacker <= 0:
            raise ConfigurationError("learning rates must be > 0")
        if self.optimizer != "adam":
            raise ConfigurationError(f"unsupported optimizer {self.optimizer!r}")
        if self.hidden is not None:
            self.hidden = tuple(int(h) for h in self.hidden)

    def widths(self, game: GameSpec) -> tuple[int, ...]:
        return self.hidden if self.hidden is not None else default_hidden(game)


def default_hidden(game: GameSpec) -> tuple[int, int]:
    return (64, 64)


@dataclass
class SampleBatch:
    """Fixed training sample: configurations, noise, and per-exploit gains."""

    X: np.ndarray
    R: np.ndarray
    gains: np.ndarray

    @classmethod
    def draw(cls, game: GameSpec, size: int, rng: np.random.Generator, dtype=np.float64) -> "SampleBatch":
        X = game.sample(rng, size)
        R = rng.random((size, game.N))
        return cls(X.astype(dtype), R.astype(dtype), game.attack_weights(X).astype(dtype))

    def __len__(self):
        return len(self.X)


class GeneratorNet:
    """Conditional mask generator; ``conditional=False`` gives the x-independent baseline."""

    def __init__(self, N, hidden=(64, 64), conditional=True, rng=None, dtype=np.float64):
        self.N = N
        self.conditional = conditional
        in_dim = 2 * N if conditional else N
        self.mlp = Mlp((in_dim, *hidden, N), output="sigmoid", rng=rng, dtype=dtype)

    def inputs(self, X, R):
        return np.concatenate([X, R], axis=1) if self.conditional else R

    def forward(self, X, R, snap=True):
        """Mask for each row; binary when ``snap`` is True."""
        y, _ = self.mlp.forward(self.inputs(X, R).astype(self.mlp.dtype))
        if not np.isfinite(y).all():
            raise FloatingPointError("non-finite generator output")
        return snap_mask(y) if snap else y

    def sample_masks(self, X, rng):
        R = rng.random(X.shape).astype(self.mlp.dtype)
        return self.forward(X.astype(self.mlp.dtype), R, snap=True).astype(np.int8)


class AttackerNet:
    def __init__(self, N, E, hidden=(64, 64), rng=None, dtype=np.float64):
        self.mlp = Mlp((N, *hidden, max(E, 1)), output="softmax", rng=rng, dtype=dtype)
        self.E = E

    def probs(self, obs):
        return self.mlp(np.asarray(obs, dtype=self.mlp.dtype))


def snap_mask(y):
    return (y >= 0.5).astype(y.dtype)


def gam_loss(gen: GeneratorNet, atk: AttackerNet, batch: SampleBatch, game: GameSpec, snap=False):
    """Batch mean of sum_e z(e; x * y) gain_e(x) + c(y).

    Returns (loss, attack_term, cost_term, cache); pass ``cache`` to ``gradients``.
    """
    y_cont, gen_acts = gen.mlp.forward(gen.inputs(batch.X, batch.R))
    y = snap_mask(y_cont) if snap else y_cont
    xt = batch.X * y
    z, atk_acts = atk.mlp.forward(xt)
    B = len(batch)
    costs = game.joint_costs.astype(y.dtype)
    attack = (z * batch.gains).sum() / B
    cost = ((1 - y) @ costs).sum() / B
    cache = (gen_acts, atk_acts, batch, costs)
    return float(attack + cost), float(attack), float(cost), cache


def gradients(gen: GeneratorNet, atk: AttackerNet, cache, attack_scale=1.0):
    """Reverse-mode gradients of ``gam_loss`` for (generator params, attacker params).

    The snap is treated as identity in the backward pass (straight-through),
    so the generator receives gradient through the attacker's input x * y.
    """
    gen_acts, atk_acts, batch, costs = cache
    B = len(batch)
    g_z = batch.gains * (attack_scale / B)
    atk_grads, g_xt = atk.mlp.backward(atk_acts, g_z)
    g_y = g_xt * batch.X - costs / B
    gen_grads, _ = gen.mlp.backward(gen_acts, g_y, need_input=False)
    return gen_grads, atk_grads


@dataclass
class GamResult:
    generator: GeneratorNet
    attacker: AttackerNet
    history: list
    final_loss: float
    seed: int
    config: TrainConfig
    runtime: float = 0.0
    extra: dict = field(default_factory=dict)

    def sampler(self):
        """Defender strategy sampler for the evaluation module."""
        return GeneratorSampler(self.generator)

    def save(self, path, game: GameSpec | None = None) -> None:
        meta = {
            "seed": self.seed,
            "config": asdict(self.config),
            "conditional": self.generator.conditional,
            "num_exploits": self.attacker.E,
            "final_loss": self.final_loss,
        }
        save_nets(path, {"generator": self.generator.mlp, "attacker": self.attacker.mlp}, meta)


class GeneratorSampler:
    """Draws x from the prior and y from the generator (always snapped)."""

    def __init__(self, generator: GeneratorNet):
        self.generator = generator

    def __call__(self, game: GameSpec, rng: np.random.Generator, size: int):
        X = game.sample(rng, size)
        return X, self.generator.sample_masks(X, rng)


def load_result(path):
    """Reload generator and attacker from a parameter archive; returns (generator, attacker, meta)."""
    nets, meta = load_nets(path)
    g = nets["generator"]
    N = g.sizes[-1]
    gen = GeneratorNet(N, g.sizes[1:-1], conditional=meta.get("conditional", True))
    gen.mlp = g
    a = nets["attacker"]
    atk = AttackerNet(N, meta.get("num_exploits", a.sizes[-1]), a.sizes[1:-1])
    atk.mlp = a
    return gen, atk, meta


def _train(game: GameSpec, cfg: TrainConfig, conditional: bool) -> GamResult:
    start = time.perf_counter()
    dtype = np.dtype(cfg.dtype)
    rng = np.random.default_rng(cfg.seed)
    hidden = cfg.widths(game)
    N, E = game.N, game.num_exploits
    gen = GeneratorNet(N, hidden, conditional=conditional, rng=rng, dtype=dtype)
    atk = AttackerNet(N, E, hidden, rng=rng, dtype=dtype)
    batch = SampleBatch.draw(game, cfg.batch, rng, dtype)
    if E == 0:
        batch.gains = np.zeros((len(batch), 1), dtype=dtype)
    if not np.isfinite(batch.gains).all():
        raise TrainingError("non-finite attack gains in the training sample", 0)
    gen_opt = Adam(gen.mlp.params, lr=cfg.lr_defender)
    atk_opt = Adam(atk.mlp.params, lr=cfg.lr_attacker)
    costs = game.joint_costs.astype(dtype)
    B = len(batch)
    g_z = batch.gains / B
    gen_in = gen.inputs(batch.X, batch.R)

    # attacker-only ascent so the first generator steps see an informative attacker
    if cfg.attacker_warmup:
        y_cont, _ = gen.mlp.forward(gen_in)
        xt = batch.X * y_cont
        for _ in range(cfg.attacker_warmup):
            _, atk_acts = atk.mlp.forward(xt)
            grads, _ = atk.mlp.backward(atk_acts, g_z, need_input=False)
            atk_opt.step(grads, ascend=True)

    selector = _Selector(game, gen, cfg, rng) if cfg.select_every else None

    history = []
    ramp_iters = cfg.cost_ramp * cfg.iters
    for it in range(cfg.iters):
        snap = (it + 1) % cfg.snap_every == 0 or it == cfg.iters - 1
        # the generator sees a cost weight rising linearly to 1; the recorded loss always uses full cost
        weight = min(1.0, (it + 1) / ramp_iters) if ramp_iters else 1.0
        # attacker ascent against the current (fixed) generator
        y_cont, _ = gen.mlp.forward(gen_in)
        y = snap_mask(y_cont) if snap else y_cont
        xt = batch.X * y
        for _ in range(cfg.attacker_steps):
            _, atk_acts = atk.mlp.forward(xt)
            grads, _ = atk.mlp.backward(atk_acts, g_z, need_input=False)
            atk_opt.step(grads, ascend=True)
        # generator descent on attack + cost
        y_cont, gen_acts = gen.mlp.forward(gen_in)
        y = snap_mask(y_cont) if snap else y_cont
        xt = batch.X * y
        z, atk_acts = atk.mlp.forward(xt)
        loss = float((z * batch.gains).sum() / B + ((1 - y) @ costs).sum() / B)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at iteration {it}", it)
        _, g_xt = atk.mlp.backward(atk_acts, g_z)
        g_y = g_xt * batch.X - (weight / B) * costs
        gen_grads, _ = gen.mlp.backward(gen_acts, g_y, need_input=False)
        gen_opt.step(gen_grads)
        history.append(loss)
        # only iterates trained on the full cost are candidates
        if selector and it + 1 >= ramp_iters and ((it + 1) % cfg.select_every == 0 or it == cfg.iters - 1):
            selector.score(gen, it)
        if log.isEnabledFor(logging.DEBUG) and (it % 50 == 0 or snap and it == cfg.iters - 1):
            log.debug("iter %d loss %.5f masked %.3f", it, loss, float((y < 0.5).mean()))

    extra = {}
    if selector:
        gen.mlp.set_flat(selector.best_params)
        extra = {"selected_iter": selector.best_iter, "selected_loss": selector.best_loss}
    return GamResult(
        generator=gen,
        attacker=atk,
        history=history,
        final_loss=history[-1],
        seed=cfg.seed,
        config=cfg,
        runtime=time.perf_counter() - start,
        extra=extra,
    )


class _Selector:
    """Keeps the generator parameters with the lowest held-out best-response loss."""

    def __init__(self, game, gen, cfg, rng):
        self.game = game
        self.X = game.sample(rng, cfg.select_samples)
        self.R = rng.random(self.X.shape).astype(gen.mlp.dtype)
        self.gains = game.attack_weights(self.X)
        self.best_loss = np.inf
        self.best_iter = -1
        self.best_params = gen.mlp.flat()

    def score(self, gen, it):
        Y = gen.forward(self.X.astype(gen.mlp.dtype), self.R, snap=True).astype(np.int8)
        attack = best_response_on_samples(self.X, Y, self.game, self.gains).value
        loss = attack + float(((1 - Y) @ self.game.joint_costs).mean())
        if loss < self.best_loss:
            self.best_loss, self.best_iter, self.best_params = loss, it, gen.mlp.flat()


def train_gam(game: GameSpec, cfg: TrainConfig | None = None) -> GamResult:
    """Train a conditional generator and attacker by alternating descent-ascent."""
    return _train(game, cfg or TrainConfig(), conditional=True)


def train_unconditional(game: GameSpec, cfg: TrainConfig | None = None) -> GamResult:
    """Same training loop with a generator that sees only the noise r (pooling baseline)."""
    return _train(game, cfg or TrainConfig(), conditional=False)
