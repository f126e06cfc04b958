"""Random and greedy masking baselines (unconditional masking lives in ``gam``)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from maskgame.errors import CapacityError
from maskgame.evaluate import best_response_on_samples
from maskgame.game import GameSpec, enumerate_support

log = logging.getLogger(__name__)


def random_mask(n: int, m: int = 1, seed=None, size: int | None = None) -> np.ndarray:
    """Fair i.i.d. bits: one joint mask of length m*n, or ``size`` of them."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shape = (n * m,) if size is None else (size, n * m)
    return rng.integers(0, 2, size=shape).astype(np.int8)


class RandomMaskSampler:
    """Fresh uniformly random mask for every sampled configuration."""

    def __call__(self, game, rng, size):
        X = game.sample(rng, size)
        return X, random_mask(game.n, game.m, rng, size=size)


@dataclass
class GreedyState:
    mask: np.ndarray
    masked: list = field(default_factory=list)
    loss: float = np.inf

    def add(self, attr: int, loss: float) -> None:
        self.mask[attr] = 0
        self.masked.append(attr)
        self.loss = loss


def greedy_mask(game: GameSpec, eval_budget: int = 10_000, seed: int = 0, exact: bool = False):
    """Forward greedy selection of a configuration-independent mask.

    Starts from no masking. Each round tries every still-visible attribute,
    scoring it by attacker best-response value plus masking cost, and masks
    the one with the largest loss reduction; stops when no reduction is
    positive. Ties go to the smallest attribute index. All candidates are
    scored on the same ``eval_budget`` prior samples, or on the exact support
    when ``exact`` is set (enumerable priors only).

    Returns:
      (mask, estimated loss, state)
    """
    if exact:
        X, weights = enumerate_support(game)
    else:
        rng = np.random.default_rng(seed)
        X = game.sample(rng, eval_budget)
        weights = None
    gains = game.attack_weights(X)

    def loss_of(mask):
        Y = np.broadcast_to(mask, X.shape)
        br = best_response_on_samples(X, Y, game, gains, weights=weights)
        return br.value + float(game.mask_cost(mask[None, :])[0])

    state = GreedyState(mask=np.ones(game.N, dtype=np.int8))
    state.loss = loss_of(state.mask)
    while True:
        best_attr, best_loss = None, state.loss
        for j in np.flatnonzero(state.mask == 1):
            cand = state.mask.copy()
            cand[j] = 0
            loss = loss_of(cand)
            if loss < best_loss - 1e-12:
                best_attr, best_loss = int(j), loss
        if best_attr is None:
            break
        log.debug("greedy masks attribute %d: %.5f -> %.5f", best_attr, state.loss, best_loss)
        state.add(best_attr, best_loss)
    return state.mask.copy(), state.loss, state


def greedy_exact_available(game: GameSpec) -> bool:
    try:
        enumerate_support(game)
    except CapacityError:
        return False
    return True
