import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskgame.errors import CapacityError, IterationLimitError
from maskgame.evaluate import TableSampler, equilibrium_gap, evaluate
from maskgame.exact import (
    EnumeratedGame,
    attack_value,
    attacker_best_response,
    build_defender_lp,
    solve_lp_cg,
)
from maskgame.fixtures import load_fixture
from maskgame.game import (
    AttributeSchema,
    CostFn,
    DefenderTable,
    Exploit,
    GameSpec,
    Prior,
    ValueFn,
    all_masks,
    enumerate_support,
)
from maskgame.generator import indicator_game, random_indicator_game

from oracles import best_response_value, epigraph_minimax, grid_minimax_n1

TABLE1 = {"table1-n2m2": 1.52, "table1-n4": 1.25, "table1-n5": 0.88, "table1-n6": 1.01}


def random_table(game, rng, sparsity=0.5):
    X, p = enumerate_support(game)
    masks = all_masks(game.N)
    q = rng.random((len(X), len(masks)))
    q[rng.random(q.shape) < sparsity] = 0.0
    q[:, -1] += 1e-3
    q /= q.sum(axis=1, keepdims=True)
    return DefenderTable(X, p, masks, q)


def test_lp_counting_n1():
    game = indicator_game(1, 1, [(1,)])
    enum = EnumeratedGame.build(game)
    lp = build_defender_lp(game, [np.zeros(enum.num_observations, dtype=int)], enum)
    assert lp.num_vars == 5
    assert lp.num_rows == 3
    assert list(lp.senses) == ["<=", "==", "=="]
    assert list(lp.free) == [4]


def test_no_exploits_masks_nothing():
    game = indicator_game(3, 1, [])
    res = solve_lp_cg(game)
    assert res.defender_loss == 0.0
    assert (res.defender.q[:, -1] == 1.0).all()


def test_all_dont_care_exploit_is_unavoidable():
    # masking cannot hide anything from an exploit with no requirements
    game = indicator_game(2, 1, [(-1, -1)])
    res = solve_lp_cg(game)
    assert res.defender_loss == pytest.approx(1.0, abs=1e-7)
    assert res.defender.expected_cost(game) == pytest.approx(0.0, abs=1e-7)


def test_single_exploit_best_response_plays_it_everywhere():
    game = indicator_game(2, 1, [(1, -1)])
    q = random_table(game, np.random.default_rng(0))
    z, value = attacker_best_response(q, game)
    assert (z.choice == 0).all()
    # one exploit: every device matching it is hit, whatever the mask
    assert value == pytest.approx(0.5 * 1.5)


def test_full_information_best_response_is_pointwise_max():
    game = indicator_game(3, 1, [(1, -1, -1), (-1, 1, 1), (-1, -1, 1)])
    q = DefenderTable.constant(game, [1, 1, 1])
    _, value = attacker_best_response(q, game)
    X, p = enumerate_support(game)
    gains = game.attack_weights(X)
    assert value == pytest.approx(float(p @ gains.max(axis=1)))


@given(st.integers(0, 2**31 - 1), st.integers(1, 2), st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_best_response_matches_strategy_enumeration(seed, n, E):
    rng = np.random.default_rng(seed)
    game = random_indicator_game(n, 1, E, seed)
    q = random_table(game, rng)
    _, value = attacker_best_response(q, game)
    assert value == pytest.approx(best_response_value(game, q.q), abs=1e-12)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_best_response_dominates_any_mixed_strategy(seed):
    rng = np.random.default_rng(seed)
    game = random_indicator_game(3, 1, 3, seed)
    enum = EnumeratedGame.build(game)
    q = random_table(game, rng)
    _, br = attacker_best_response(q, game, enum)
    z = rng.dirichlet(np.ones(game.num_exploits), size=enum.num_observations)
    assert attack_value(q, enum, z) <= br + 1e-12


def _value_table_game(c):
    schema = AttributeSchema.binary(1)
    return GameSpec(
        schema, 1, Prior("uniform-binary"),
        (Exploit({0: {1}}), Exploit({0: {-1}})),
        ValueFn("explicit-table", (((1,), 1.0), ((-1,), 0.6))),
        CostFn((c,)),
    )


@pytest.mark.parametrize("game", [
    indicator_game(1, 1, [(1,)]),
    _value_table_game(0.05),
    _value_table_game(0.01),
    _value_table_game(0.3),
], ids=["one-exploit", "two-exploits-c0.05", "two-exploits-c0.01", "two-exploits-c0.3"])
def test_n1_matches_fine_grid_minimax(game):
    res = solve_lp_cg(game)
    assert res.defender_loss == pytest.approx(grid_minimax_n1(game, step=1e-3), abs=1e-3)


def test_n1_two_exploits_randomizes_masking():
    game = _value_table_game(0.05)
    res = solve_lp_cg(game)
    hide = res.defender.q[:, 0]
    # masking is worth its cost for exactly one of the two configurations, and only partly
    assert ((hide > 1e-6) & (hide < 1 - 1e-6)).any()


@pytest.mark.parametrize("name, expected", TABLE1.items())
def test_table1_losses(name, expected):
    res = solve_lp_cg(load_fixture(name))
    assert res.defender_loss == pytest.approx(expected, abs=0.01)


@pytest.mark.parametrize("name", ["table1-n2m2", "table1-n4", "table1-n5"])
def test_equilibrium_invariants(name):
    game = load_fixture(name)
    res = solve_lp_cg(game, eps=1e-5)
    assert all(b >= a - 1e-9 for a, b in zip(res.history, res.history[1:]))
    assert res.defender.check_simplex(1e-7)
    cost = res.defender.expected_cost(game)
    assert res.defender_loss == pytest.approx(res.attacker_value + cost, abs=1e-6)
    _, br = attacker_best_response(res.defender, game)
    assert br <= res.attacker_value + 1e-5
    assert res.gap <= 1e-5
    assert res.defender_loss == pytest.approx(epigraph_minimax(game), abs=1e-6)


def test_attacker_mixture_is_a_best_response():
    game = load_fixture("table1-n4")
    res = solve_lp_cg(game)
    enum = EnumeratedGame.build(game)
    assert np.allclose(res.attacker.probs.sum(axis=1), 1.0)
    achieved = attack_value(res.defender, enum, res.attacker.probs)
    assert achieved == pytest.approx(res.attacker_value, abs=1e-6)


def test_monte_carlo_gap_of_lp_pair():
    game = load_fixture("table1-n2m2")
    res = solve_lp_cg(game)
    gap = equilibrium_gap(TableSampler(res.defender), res.attacker, game, M=100_000, seed=0)
    assert gap <= 0.02


def test_table_sampler_reproduces_lp_value():
    game = load_fixture("table1-n4")
    res = solve_lp_cg(game)
    report = evaluate(TableSampler(res.defender), game, M=100_000, seed=1)
    assert report.defender_loss == pytest.approx(1.25, abs=0.02)


def test_backends_agree():
    game = load_fixture("table1-n5")
    ours = solve_lp_cg(game, backend="simplex")
    ref = solve_lp_cg(game, backend="highs")
    assert ours.defender_loss == pytest.approx(ref.defender_loss, abs=1e-6)


def test_seed_reproducibility():
    game = load_fixture("table1-n4")
    a, b = solve_lp_cg(game, seed=3), solve_lp_cg(game, seed=3)
    assert a.history == b.history
    assert np.array_equal(a.defender.q, b.defender.q)


def test_round_limit_raises_with_gap():
    with pytest.raises(IterationLimitError) as info:
        solve_lp_cg(load_fixture("table1-n4"), max_rounds=1)
    assert info.value.gap > 1e-5


def test_capacity_refusal():
    with pytest.raises(CapacityError):
        solve_lp_cg(indicator_game(6, 2, [(1,) * 6]))


def test_strategy_dump(tmp_path):
    res = solve_lp_cg(load_fixture("table1-n4"))
    path = tmp_path / "s.json"
    res.to_json(path)
    import json

    doc = json.loads(path.read_text())
    assert doc["defender_loss"] == pytest.approx(1.2525, abs=1e-6)
    assert len(doc["defender"]) == 16
    for entry in doc["defender"]:
        assert sum(entry["probs"]) == pytest.approx(1.0, abs=1e-6)
        assert all(p > 1e-6 for p in entry["probs"])
