import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from miasched.frame_solver import penalties
from miasched.model import ContractError
from miasched.oracle import (
    GuardExceeded,
    decode_policies,
    enumerate_values,
    frontier,
    min_expected_delay,
    policy_stats,
    theta_star,
    verify_dp,
)

from conftest import make_model, random_model


def adaptive_optimum(model, length, pen):
    """Minimum expected frame penalty over policies that may use the full
    observed history (every past power and gain), by unmemoised tree search."""
    probs, k_tab = model.channel.probs, model.rates.k

    def value(history):
        done = sum(k_tab[i][j] for j, i in history)
        if done >= length:
            return 0.0
        return min(
            pen[j] + sum(p * value(history + ((j, i),)) for i, p in enumerate(probs) if p > 0)
            for j in range(len(pen))
        )

    return value(())


def test_policy_stats_examples():
    m = make_model([0.5, 1.5], [1.0], [1.0], [[2, 2]], [4])
    st_ = policy_stats([1, 1, 1, 1], m, 4, 1.0)
    assert st_.expected_length == 2.0
    assert st_.expected_surplus == 2 * (1.5 - 1.0)
    two = make_model([1.0], [1.0, 2.0], [0.5, 0.5], [[1], [2]], [2])
    assert policy_stats([0, 0], two, 2, 2.0).expected_length == 1 + 0.5 * 1
    for pol in ([0], [1]):
        assert policy_stats(pol, make_model([0.5, 1.5], [1.0], [1.0], [[1, 2]], [1]), 1, 1.0).expected_length == 1


def test_policy_stats_penalty_is_linear(small_model):
    s = policy_stats([0, 1, 0, 1, 1, 0], small_model, 6, 1.0)
    q, v = 3.5, 2.0
    direct = v * s.expected_length + q * s.expected_surplus
    assert s.expected_penalty(q, v) == direct


def test_policy_stats_validates(small_model):
    with pytest.raises(ContractError):
        policy_stats([0, 1], small_model, 3, 1.0)
    with pytest.raises(ContractError):
        policy_stats([0, 2, 0], small_model, 3, 1.0)


def test_policy_stats_by_simulation(small_model):
    """Monte Carlo check of the recursion for one policy."""
    rng = np.random.default_rng(0)
    pol = [1, 0, 0, 1, 0, 1]
    k_tab, levels = small_model.rates.k, small_model.menu.levels
    lengths, surplus = [], []
    for _ in range(40_000):
        rem, t, s = 6, 0, 0.0
        while rem > 0:
            j = pol[rem - 1]
            rem -= k_tab[rng.integers(2)][j]
            t += 1
            s += levels[j] - 1.0
        lengths.append(t)
        surplus.append(s)
    st_ = policy_stats(pol, small_model, 6, 1.0)
    assert abs(np.mean(lengths) - st_.expected_length) < 4 * np.std(lengths) / 200
    assert abs(np.mean(surplus) - st_.expected_surplus) < 4 * np.std(surplus) / 200


def test_enumeration_matches_scalar(small_model):
    ones, surplus = [1.0, 1.0], [-0.5, 0.5]
    for codes, (e, s) in enumerate_values(small_model, 6, [ones, surplus]):
        for c in codes[::7]:
            pol = decode_policies(np.array([c]), 2, 6)[0].tolist()
            ref = policy_stats(pol, small_model, 6, 1.0)
            assert e[c] == pytest.approx(ref.expected_length, rel=1e-14)
            assert s[c] == pytest.approx(ref.expected_surplus, rel=1e-14, abs=1e-15)


def test_verify_dp_static_example():
    m = make_model([1.0, 2.0], [1.0], [1.0], [[1, 3]], [4])
    assert penalties(3.0, 5.0, m.menu, 1.0) == (5.0, 8.0)
    res = verify_dp(m, 4, q=3.0, v=5.0, beta=1.0)
    assert res.oracle_value == 13.0 and res.dp_value == 13.0 and res.match


def test_verify_dp_zero_penalty():
    m = make_model([1.0, 2.0], [1.0, 2.0], [0.5, 0.5], [[1, 2], [2, 3]], [5])
    res = verify_dp(m, 5, q=0.0, v=0.0, beta=1.5)
    assert res.dp_value == 0.0 and res.oracle_value == 0.0


def test_verify_dp_single_unit(small_model):
    pen = penalties(4.0, 3.0, small_model.menu, 1.0)
    one = make_model([0.5, 1.5], [1.0, 4.0], [0.5, 0.5], [[1, 2], [2, 4]], [1])
    res = verify_dp(one, 1, q=4.0, v=3.0, beta=1.0)
    assert res.dp_value == res.oracle_value == min(pen)


def test_verify_dp_guard():
    m = make_model([1.0, 2.0, 3.0], [1.0], [1.0], [[1, 2, 3]], [15])
    with pytest.raises(GuardExceeded, match="exceeds"):
        verify_dp(m, 15, q=0.0, v=1.0, beta=4.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dp_equals_history_dependent_optimum(seed):
    rng = np.random.default_rng(seed)
    length = int(rng.integers(1, 6))
    m = random_model(rng, n_opt=int(rng.integers(1, 3)), n_gain=int(rng.integers(1, 3)), lengths=(length,))
    pen = tuple(np.sort(rng.uniform(0, 5, len(m.menu))).tolist())
    from miasched.frame_solver import build_value_table_stochastic

    table = build_value_table_stochastic(length, pen, m)
    assert table.values[length] == pytest.approx(adaptive_optimum(m, length, pen), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_verify_dp_random(seed):
    rng = np.random.default_rng(seed)
    length = int(rng.integers(1, 9))
    m = random_model(rng, lengths=(length,))
    beta = float(m.menu.lowest) + float(rng.uniform(0.1, 2.0))
    q = float(rng.uniform(0, 20))
    assert verify_dp(m, length, q, float(rng.choice([0.1, 1.0, 10.0])), beta).match


def test_lowest_power_shortcut_is_optimal(small_model):
    res = verify_dp(small_model, 6, q=1000.0, v=1.0, beta=1.0)
    assert res.match
    assert res.oracle_policy == (0,) * 6


# --- theta* --------------------------------------------------------------


def lp_theta(model, beta):
    """Same optimum as an explicit LP over mixture weights (independent solver)."""
    fronts = [frontier(model, L, p, beta) for L, p in zip(model.packets.lengths, model.packets.probs)]
    c, a_ub, blocks = [], [], []
    for fr in fronts:
        c.extend(fr.prob * fr.expected_length)
        a_ub.extend(fr.prob * fr.surplus)
        blocks.append(len(fr.surplus))
    n = len(c)
    a_eq = np.zeros((len(blocks), n))
    start = 0
    for r, size in enumerate(blocks):
        a_eq[r, start : start + size] = 1
        start += size
    res = linprog(c, A_ub=[a_ub], b_ub=[0.0], A_eq=a_eq, b_eq=np.ones(len(blocks)), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def grid_theta(model, beta, steps=2001):
    """One packet length, two policies at a time, dense grid over the mixing weight."""
    (L,), = [model.packets.lengths]
    fr = frontier(model, L, 1.0, beta)
    pts = list(zip(fr.surplus, fr.expected_length))
    best = np.inf
    w = np.linspace(0, 1, steps)
    for (sa, ea), (sb, eb) in itertools.combinations(pts, 2):
        s = w * sa + (1 - w) * sb
        e = w * ea + (1 - w) * eb
        ok = s <= 1e-12
        if ok.any():
            best = min(best, e[ok].min())
    for s, e in pts:
        if s <= 0:
            best = min(best, e)
    return best


def test_theta_generous_budget_is_unconstrained(small_model):
    res = theta_star(small_model, 1.5)
    assert res.theta == min_expected_delay(small_model, 1.5)
    assert res.multiplier == 0.0


def test_theta_single_option():
    m = make_model([0.5], [1.0], [1.0], [[1]], [5])
    assert theta_star(m, 1.0).theta == 5.0


def test_theta_two_options_tight_budget():
    m = make_model([0.5, 1.5], [1.0, 2.0], [0.5, 0.5], [[1, 2], [1, 3]], [4])
    res = theta_star(m, 1.0)
    assert len(res.support) == 2  # strictly mixed
    assert sum(x["weight"] for x in res.support) == pytest.approx(1.0)
    ref = grid_theta(m, 1.0)
    assert res.theta <= ref + 1e-12
    assert res.theta == pytest.approx(ref, abs=2e-3)
    assert res.theta == pytest.approx(lp_theta(m, 1.0), rel=1e-9)


def test_theta_matches_lp(small_model, three_by_three):
    for model, beta in ((small_model, 1.0), (small_model, 0.8), (three_by_three, 0.75), (three_by_three, 1.2)):
        assert theta_star(model, beta).theta == pytest.approx(lp_theta(model, beta), rel=1e-9)


@pytest.mark.parametrize("beta", [0.6, 0.9, 1.0, 1.3])
def test_theta_support_is_consistent(small_model, beta):
    res = theta_star(small_model, beta)
    e = s = 0.0
    for part in res.support:
        ref = policy_stats(part["policy"], small_model, part["length"], beta)
        assert part["expected_length"] == pytest.approx(ref.expected_length, rel=1e-12)
        e += part["length_prob"] * part["weight"] * part["expected_length"]
        s += part["length_prob"] * part["weight"] * part["expected_surplus"]
    assert s <= 1e-9
    assert abs(e - res.theta) <= 1e-9
    assert res.theta >= min_expected_delay(small_model, beta) - 1e-12


def test_theta_nonincreasing_in_beta(three_by_three):
    thetas = [theta_star(three_by_three, b).theta for b in np.linspace(0.3, 2.2, 12)]
    assert all(b <= a + 1e-12 for a, b in zip(thetas, thetas[1:]))


def test_theta_infeasible_budget(small_model):
    with pytest.raises(ContractError):
        theta_star(small_model, 0.5)


def test_envelope_is_convex_and_decreasing(three_by_three):
    fr = frontier(three_by_three, 9, 0.25, 0.75)
    pts = [fr.point(c) for c in fr.envelope]  # min-length end first
    s = [p[0] for p in pts]
    e = [p[1] for p in pts]
    assert all(b < a for a, b in zip(s, s[1:]))
    assert all(b > a for a, b in zip(e, e[1:]))
    slopes = [(e[i + 1] - e[i]) / (s[i] - s[i + 1]) for i in range(len(pts) - 1)]
    assert all(b >= a for a, b in zip(slopes, slopes[1:]))
    # every enumerated point lies on or above the envelope
    for lam in slopes + [0.0, slopes[-1] * 2 if slopes else 1.0]:
        best = min(ei + lam * si for si, ei in pts)
        assert (fr.expected_length + lam * fr.surplus >= best - 1e-9).all()
