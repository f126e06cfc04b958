import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskgame.errors import CapacityError, ConfigurationError, DomainError, SchemaError
from maskgame.fixtures import NAMES, load_fixture
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
    game_from_dict,
    game_to_dict,
    load_game,
    mask_index,
    matches,
    observe,
    posterior,
    recover,
    save_game,
)
from maskgame.generator import (
    CASE_STUDY_EXPLOITS,
    StructuredLayout,
    case_study_instance,
    generate_structured_instance,
    indicator_game,
)


def binary_game(n=2, m=1, codes=((1, -1),), c=0.01):
    return indicator_game(n, m, codes, c)


# -- observe / recover -------------------------------------------------------


@pytest.mark.parametrize(
    "x, y, expected",
    [
        ([-1, 1], [1, 0], [-1, 0]),
        ([1, -1, 1], [1, 1, 1], [1, -1, 1]),
        ([1, -1, 1], [0, 0, 0], [0, 0, 0]),
    ],
)
def test_observe_examples(x, y, expected):
    assert observe(x, y).tolist() == expected


def test_observe_rejects_shape_mismatch_and_nonbinary_mask():
    with pytest.raises(SchemaError):
        observe([1, -1], [1, 0, 1])
    with pytest.raises(SchemaError):
        observe([1, -1], [1, 2])


@given(st.data())
def test_observation_round_trip(data):
    n = data.draw(st.integers(1, 12))
    x = np.array(data.draw(st.lists(st.sampled_from([-1, 1, 2, 3]), min_size=n, max_size=n)))
    y = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    mask, visible = recover(observe(x, y))
    assert mask.tolist() == y.tolist()
    assert visible.tolist() == x[y == 1].tolist()


# -- matches ---------------------------------------------------------------------


def test_matches_indicator_examples():
    e = Exploit.from_indicator([-1, 1, -1, -1])
    assert matches([1, 1, -1, 1], e)
    assert not matches([1, -1, 1, 1], e)


def test_empty_exploit_matches_everything():
    assert matches([3, -1, 2], Exploit({}))


@given(st.data())
def test_matches_agrees_with_attributewise_check(data):
    n = data.draw(st.integers(1, 6))
    x = data.draw(st.lists(st.sampled_from([-1, 1, 2, 3]), min_size=n, max_size=n))
    req = data.draw(
        st.dictionaries(
            st.integers(0, n - 1),
            st.sets(st.sampled_from([-1, 1, 2, 3]), min_size=1),
            max_size=n,
        )
    )
    e = Exploit(req)
    brute = True
    for i in range(n):
        if i in req and x[i] not in req[i]:
            brute = False
    assert matches(x, e) == brute


@given(st.data())
@settings(max_examples=50)
def test_attack_weights_agree_with_matches(data):
    n = data.draw(st.integers(1, 4))
    m = data.draw(st.integers(1, 2))
    codes = data.draw(st.lists(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n), max_size=3))
    game = indicator_game(n, m, codes)
    X, _ = enumerate_support(game)
    W = game.attack_weights(X)
    for k, x in enumerate(X):
        for e, exploit in enumerate(game.exploits):
            expected = sum(
                0.5 * (x[d * n:(d + 1) * n] + 1).sum()
                for d in range(m)
                if matches(x[d * n:(d + 1) * n], exploit)
            )
            assert W[k, e] == pytest.approx(expected)


# -- schema validation -------------------------------------------------------------


def test_schema_rejects_zero_in_domain():
    with pytest.raises(SchemaError, match="domains\\[1\\]"):
        AttributeSchema(((-1, 1), (0, 1)), V=1)


def test_exploit_outside_domain_rejected():
    schema = AttributeSchema.binary(2)
    with pytest.raises(SchemaError):
        GameSpec(schema, 1, Prior("uniform-binary"), (Exploit({0: {2}}),), ValueFn(), CostFn.uniform(2, 0.01))


def test_prior_table_must_sum_to_one():
    with pytest.raises(SchemaError, match="prior.table"):
        Prior("explicit-table", table=(((1,), 0.5), ((-1,), 0.4)))


# -- enumerate_support ---------------------------------------------------------------


def test_enumerate_uniform_binary():
    X, p = enumerate_support(binary_game(2, 1))
    assert len(X) == 4
    assert np.allclose(p, 0.25)
    X, p = enumerate_support(binary_game(2, 2, codes=()))
    assert len(X) == 16
    assert np.allclose(p, 0.0625)
    assert abs(p.sum() - 1) < 1e-9


def test_enumerate_explicit_table_passthrough():
    table = (((1, 1), 0.5), ((-1, 1), 0.3), ((1, -1), 0.2))
    game = GameSpec(AttributeSchema.binary(2), 1, Prior("explicit-table", table), (), ValueFn(),
                    CostFn.uniform(2, 0.0))
    X, p = enumerate_support(game)
    assert [tuple(x) for x in X] == [t[0] for t in table]
    assert p.tolist() == [0.5, 0.3, 0.2]


def test_enumerate_refuses_structured_and_oversized():
    with pytest.raises(CapacityError):
        enumerate_support(case_study_instance())
    with pytest.raises(CapacityError):
        enumerate_support(binary_game(21, 1, codes=()))


def test_all_masks_order():
    masks = all_masks(3)
    assert masks.shape == (8, 3)
    assert masks[-1].tolist() == [1, 1, 1]
    for j, mask in enumerate(masks):
        assert mask_index(mask) == j


# -- posterior -------------------------------------------------------------------------


def _table(game, rule):
    """Defender table whose mask distribution for x is given by rule(x) -> {mask: prob}."""
    X, p = enumerate_support(game)
    masks = all_masks(game.N)
    q = np.zeros((len(X), len(masks)))
    for k, x in enumerate(X):
        for mask, prob in rule(tuple(x)).items():
            q[k, mask_index(mask)] += prob
    return DefenderTable(X, p, masks, q)


def brute_force_posterior(table, obs):
    """Bayes rule by enumerating every (x, y) pair."""
    weights = {}
    for k, x in enumerate(table.configs):
        for j, y in enumerate(table.masks):
            if (x * y == obs).all():
                key = tuple(int(v) for v in x)
                weights[key] = weights.get(key, 0.0) + table.probs[k] * table.q[k, j]
    total = sum(weights.values())
    return {x: w / total for x, w in weights.items() if w > 0}


def test_posterior_full_mask_equals_prior():
    game = binary_game()
    q = _table(game, lambda x: {(0, 0): 1.0})
    post = posterior(q, game, [0, 0])
    assert post == pytest.approx({x: 0.25 for x in itertools.product([-1, 1], repeat=2)})


def test_posterior_no_mask_is_point_mass():
    game = binary_game()
    q = _table(game, lambda x: {(1, 1): 1.0})
    assert posterior(q, game, [1, -1]) == {(1, -1): 1.0}


def test_posterior_conditional_masking_matches_bayes_oracle():
    game = binary_game()
    q = _table(game, lambda x: {(0, 1): 1.0} if x[0] == 1 else {(1, 1): 1.0})
    post = posterior(q, game, [0, -1])
    assert post == pytest.approx(brute_force_posterior(q, np.array([0, -1])))
    assert post == pytest.approx({(1, -1): 1.0})


def test_posterior_unreachable_observation():
    game = binary_game()
    q = _table(game, lambda x: {(1, 1): 1.0})
    with pytest.raises(DomainError):
        posterior(q, game, [0, 0])


def random_table(game, rng):
    X, p = enumerate_support(game)
    masks = all_masks(game.N)
    q = rng.random((len(X), len(masks))) ** 3
    q[rng.random(q.shape) < 0.4] = 0.0
    q[:, -1] += 1e-3
    q /= q.sum(axis=1, keepdims=True)
    return DefenderTable(X, p, masks, q)


@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_posterior_normalizes_for_every_reachable_observation(seed, n):
    rng = np.random.default_rng(seed)
    game = binary_game(n, 1, codes=())
    q = random_table(game, rng)
    seen = set()
    for k, x in enumerate(q.configs):
        for j in np.flatnonzero(q.q[k] > 0):
            obs = tuple(int(v) for v in x * q.masks[j])
            if obs in seen:
                continue
            seen.add(obs)
            post = posterior(q, game, list(obs))
            assert abs(sum(post.values()) - 1.0) < 1e-9
            assert post == pytest.approx(brute_force_posterior(q, np.array(obs)), abs=1e-12)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_full_mask_posterior_is_prior_when_masking_ignores_x(seed):
    rng = np.random.default_rng(seed)
    game = binary_game(2, 1, codes=())
    dist = rng.dirichlet(np.ones(4))
    masks = all_masks(2)
    rule = {tuple(masks[j]): dist[j] for j in range(4)}
    q = _table(game, lambda x: rule)
    post = posterior(q, game, [0, 0])
    assert post == pytest.approx({tuple(x): 0.25 for x in q.configs})


# -- structured generator ------------------------------------------------------------


@pytest.mark.parametrize("n, m, V", [(20, 1, 3), (33, 2, 2), (80, 1, 4)])
def test_structured_samples_satisfy_generator_constraints(n, m, V):
    game = generate_structured_instance(n, m, 20, V, seed=n)
    layout = StructuredLayout.expanded(n)
    roles = game.schema.roles
    assert roles[:3] == ("os-flag",) * 3
    assert roles[3:6] == ("os-version",) * 3
    ports = [i for i, r in enumerate(roles) if r == "port"]
    assert ports == list(range(n - (n + 1) // 2, n))

    X = game.sample(np.random.default_rng(1), 10_000).reshape(-1, n)
    os_flags = X[:, :3]
    assert ((os_flags == 1).sum(axis=1) == 1).all()
    os_vers = X[:, 3:6]
    installed = os_flags == 1
    assert ((os_vers >= 1) & (os_vers <= V))[installed].all()
    assert (os_vers[~installed] == -1).all()
    for flag, ver in zip(layout.app_flags, layout.app_versions):
        if ver is None:
            continue
        present = X[:, flag] == 1
        assert ((X[present, ver] >= 1) & (X[present, ver] <= V)).all()
        assert (X[~present, ver] == -1).all()
    assert ((X[:, ports] == -1).sum(axis=1) >= 1).all()


def test_structured_exploits_target_open_ports_and_contiguous_ranges():
    game = generate_structured_instance(40, 1, 50, 4, seed=3)
    roles = game.schema.roles
    for e in game.exploits:
        port_reqs = [i for i in e.required if roles[i] == "port"]
        assert len(port_reqs) == 1
        assert e.required[port_reqs[0]] == {-1}
        os_flags = [i for i in e.required if roles[i] == "os-flag"]
        assert len(os_flags) == 1
        for i, vals in e.required.items():
            if roles[i] in ("os-version", "app-version"):
                lo, hi = min(vals), max(vals)
                assert vals == set(range(lo, hi + 1))


def test_structured_layout_needs_room():
    with pytest.raises(ConfigurationError):
        generate_structured_instance(8, 1, 5, 3, seed=0)


def test_structured_value_counts_installed_apps():
    game = generate_structured_instance(20, 1, 5, 3, seed=0)
    X = game.sample(np.random.default_rng(0), 200)
    apps = [i for i, r in enumerate(game.schema.roles) if r == "app-flag"]
    expected = 1 + (X[:, apps] != -1).sum(axis=1)
    assert np.array_equal(game.device_values(X)[:, 0], expected)


def test_case_study_fixture_pins_exploit_table():
    game = load_fixture("case-study")
    assert (game.n, game.m, game.num_exploits) == (20, 1, 19)
    assert set(game.cost.per_attribute) == {0.01}
    for e, (os, os_vers, app, app_vers, port) in zip(game.exploits, CASE_STUDY_EXPLOITS):
        assert e.required[os] == set(os_vers)
        assert e.required[port] == {-1}
        if app is not None:
            assert e.required[app] == set(app_vers)
        assert len(e.required) == (3 if app is not None else 2)
    assert game_to_dict(game) == game_to_dict(case_study_instance())


def test_case_study_samples_respect_layout():
    game = case_study_instance()
    X = game.sample(np.random.default_rng(0), 10_000)
    assert ((X[:, :3] != -1).sum(axis=1) == 1).all()
    assert ((X[:, 10:] == -1).sum(axis=1) >= 1).all()


# -- game-spec files -------------------------------------------------------------------


@pytest.mark.parametrize("name", NAMES)
def test_fixture_round_trip(name, tmp_path):
    game = load_fixture(name)
    path = tmp_path / "g.json"
    save_game(game, path)
    assert game_to_dict(load_game(path)) == game_to_dict(game)


def test_missing_field_error_names_the_field():
    doc = game_to_dict(binary_game())
    del doc["schema"]["n"]
    with pytest.raises(SchemaError, match="schema.n"):
        game_from_dict(doc)
    doc = game_to_dict(binary_game())
    del doc["cost"]
    with pytest.raises(SchemaError, match="cost"):
        game_from_dict(doc)


def test_invalid_json_is_a_schema_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_game(path)


def test_explicit_value_table_round_trip(tmp_path):
    table = (((1,), 0.6), ((-1,), 0.4))
    values = (((1,), 2.0), ((-1,), 0.5))
    game = GameSpec(AttributeSchema.binary(1), 1, Prior("explicit-table", table),
                    (Exploit({}),), ValueFn("explicit-table", values), CostFn((0.1,)))
    path = tmp_path / "g.json"
    save_game(game, path)
    again = load_game(path)
    assert again.attack_weights(np.array([[1], [-1]])).ravel().tolist() == [2.0, 0.5]
    assert json.loads(path.read_text())["value"]["kind"] == "explicit-table"


def test_mask_cost_counts_masked_attributes_per_device():
    game = binary_game(2, 2, codes=(), c=0.25)
    assert game.mask_cost(np.array([[0, 1, 0, 0], [1, 1, 1, 1]])).tolist() == [0.75, 0.0]
