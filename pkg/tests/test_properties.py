import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sophlearn.belief import BeliefState, DirichletCounts, bayes_update, update_concentration
from sophlearn.config import config_from_entries, dump_config, parse_text
from sophlearn.env import GridWorld, advance_clocks, position_transition
from sophlearn.harness import ExperimentConfig, one_way_anova
from sophlearn.planner import SearchConfig, softmax_expectation
from sophlearn.valuation import dirichlet_kl, epistemic_value, novelty_value, to_log_preference

settings.register_profile("repo", max_examples=150, deadline=None)
settings.load_profile("repo")

pos_floats = st.floats(min_value=0.01, max_value=10.0, allow_nan=False)


def simplex(n):
    return arrays(float, n, elements=pos_floats).map(lambda x: x / x.sum())


@given(st.integers(1, 8), st.integers(1, 8), st.lists(st.integers(0, 4), max_size=40), st.data())
def test_moves_stay_on_grid(w, h, actions, data):
    grid = GridWorld(w, h, np.zeros((4, w * h), dtype=int))
    pos = (data.draw(st.integers(0, w - 1)), data.draw(st.integers(0, h - 1)))
    for a in actions:
        nxt = position_transition(pos, a, grid)
        assert 0 <= nxt[0] < w and 0 <= nxt[1] < h
        assert abs(nxt[0] - pos[0]) + abs(nxt[1] - pos[1]) <= 1
        pos = nxt


@given(st.tuples(*[st.integers(0, 50)] * 3), st.integers(0, 3))
def test_clock_advance(clocks, resource):
    new = advance_clocks(clocks, resource)
    for i in range(3):
        assert new[i] == (0 if resource == i + 1 else clocks[i] + 1)


@given(arrays(float, 4, elements=st.floats(-200, 200)), st.floats(-1e3, 1e3), st.floats(0.01, 3.0))
def test_log_preference_shift_invariance(raw, shift, c):
    a, b = to_log_preference(raw, c), to_log_preference(raw + shift, c)
    assert np.argmax(a) == np.argmax(b)
    np.testing.assert_allclose(a, b, atol=1e-6)
    assert abs(np.exp(a).sum() - 1) < 1e-9


@given(st.integers(2, 5), st.integers(2, 5), st.data())
def test_epistemic_bounded_by_prior_entropy(n_s, n_o, data):
    q = data.draw(simplex(n_s))
    A = data.draw(arrays(float, (n_o, n_s), elements=pos_floats))
    A /= A.sum(axis=0)
    v = epistemic_value(q, A)
    assert -1e-12 <= v <= -(q * np.log(q)).sum() + 1e-9


@given(st.integers(2, 5), st.integers(1, 4), st.data())
def test_novelty_nonnegative(n_o, n_s, data):
    counts = data.draw(arrays(float, (n_o, n_s), elements=st.floats(1e-3, 100)))
    q = data.draw(simplex(n_s))
    assert novelty_value(counts, q, counts @ q / counts.sum()) >= 0


@given(st.integers(2, 5), st.data())
def test_dirichlet_kl_nonnegative_and_zero_on_self(n, data):
    a = data.draw(arrays(float, (n, 2), elements=st.floats(0.05, 50)))
    b = data.draw(arrays(float, (n, 2), elements=st.floats(0.05, 50)))
    assert np.all(dirichlet_kl(a, b) >= 0)
    np.testing.assert_allclose(dirichlet_kl(a, a), 0.0, atol=1e-9)


@given(st.integers(2, 4), st.integers(2, 4), st.data())
def test_bayes_update_returns_distributions(n, C, data):
    q = BeliefState(data.draw(simplex(n)), data.draw(simplex(C)))
    A = data.draw(arrays(float, (3, n, C), elements=pos_floats))
    A /= A.sum(axis=0)
    B_pos = data.draw(arrays(float, (n, n, 2), elements=pos_floats))
    B_pos /= B_pos.sum(axis=0)
    B_ctx = data.draw(arrays(float, (C, C), elements=pos_floats))
    B_ctx /= B_ctx.sum(axis=0)
    post = bayes_update(q, data.draw(st.integers(0, 1)), (data.draw(st.integers(0, 2)),), [A], [B_pos, B_ctx])
    for f in (post.position, post.context):
        assert np.all(f >= 0) and abs(f.sum() - 1) < 1e-9


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 3), st.data())
def test_update_concentration_adds_one(n, C, o, data):
    counts = DirichletCounts.flat((4, n, C), 0.25)
    belief = data.draw(simplex(n * C)).reshape(n, C)
    new = update_concentration(counts, belief, o)
    assert abs(new.total() - counts.total() - 1) < 1e-9
    assert np.all(new.counts >= counts.counts)


@given(arrays(float, st.integers(1, 6), elements=st.floats(-1e3, 1e3)), st.floats(0.05, 10))
def test_softmax_expectation_is_between_min_and_max(v, temp):
    e = softmax_expectation(v, temp)
    assert v.min() - 1e-9 <= e <= v.max() + 1e-9


@given(st.lists(st.lists(st.floats(0, 100), min_size=2, max_size=10), min_size=2, max_size=4),
       st.floats(-50, 50))
def test_anova_invariant_to_shift(groups, shift):
    if any(np.ptp(g) == 0 for g in groups) or sum(np.var(g) for g in groups) < 1e-6:
        return
    F1, p1 = one_way_anova(groups)
    F2, p2 = one_way_anova([[x + shift for x in g] for g in groups])
    assert abs(F1 - F2) <= 1e-6 * max(1.0, F1)
    assert 0 <= p1 <= 1


@given(st.integers(1, 50), st.integers(1, 200), st.integers(0, 2 ** 31), st.integers(0, 5),
       st.floats(0.0, 0.99), st.sampled_from(["full-model", "unknown-likelihood", "unknown-transition"]),
       st.lists(st.sampled_from(["SL", "SI", "BA", "BA+UCB"]), min_size=1, max_size=4, unique=True))
def test_config_round_trip(episodes, iterations, seed, horizon, thr, scenario, algs):
    cfg = ExperimentConfig(scenario=scenario, algorithms=tuple(algs), episodes=episodes, iterations=iterations,
                           seed=seed, search=SearchConfig(horizon=horizon, state_prune_threshold=thr))
    assert config_from_entries(parse_text(dump_config(cfg))) == cfg
