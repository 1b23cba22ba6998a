import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from risnoma.errors import ConfigError
from risnoma.noma import (ClusterPlan, achievable_rate, decoding_order, evaluate_oma,
                          evaluate_ph, evaluate_zf, form_clusters, sic_chain_feasible,
                          sic_feasible, sinr_ph, sinr_zf)
from risnoma.precoding import SinrTargets, orthogonal_projection, ph_noma_precoder, zf_precoder


def crand(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_form_clusters_examples():
    assert form_clusters([6, 5, 4, 3, 2, 1]).pairs == ((0, 5), (1, 4), (2, 3))
    assert form_clusters([1.0, 3.0]).pairs == ((1, 0),)
    assert form_clusters([2.0, 2.0]).pairs == ((0, 1),)


@pytest.mark.parametrize("k", [1, 3, 5])
def test_form_clusters_odd(k):
    with pytest.raises(ConfigError):
        form_clusters(np.ones(k))


@given(st.lists(st.floats(0, 10), min_size=1, max_size=6).map(lambda x: x + x[:1] if len(x) % 2 else x))
def test_form_clusters_partition(gains):
    plan = form_clusters(gains)
    members = sorted(u for p in plan.pairs for u in p)
    assert members == list(range(len(gains)))
    for a, b in plan.pairs:
        assert gains[a] >= gains[b]


def test_duplicate_membership_rejected():
    with pytest.raises(ConfigError):
        ClusterPlan(((0, 1), (1, 2)))


def test_decoding_order_examples():
    plan = ClusterPlan(((0, 1),))
    assert decoding_order(plan, [2.0, 1.0]) == [(0, 1)]
    assert decoding_order(plan, [1.0, 2.0]) == [(1, 0)]
    assert decoding_order(plan, [1.0, 1.0]) == [(0, 1)]
    assert decoding_order(ClusterPlan(((1, 0),)), [1.0, 1.0]) == [(0, 1)]


@given(st.lists(st.floats(0.01, 10), min_size=4, max_size=4, unique=True))
def test_decoding_order_reverses_with_gains(gains):
    plan = ClusterPlan(((0, 1), (2, 3)))
    flipped = [gains[1], gains[0], gains[3], gains[2]]
    a = decoding_order(plan, gains)
    b = decoding_order(plan, flipped)
    assert [tuple(reversed(o)) for o in a] == [tuple(o) for o in b]


def test_sic_feasible_examples():
    assert sic_feasible(1.5, 1.5)
    assert sic_feasible(2.0, 1.5)
    assert not sic_feasible(1.0, 1.5)


def test_sic_chain_three_users():
    r = [[9, 3, 2], [0, 3, 2], [0, 0, 2]]
    assert sic_chain_feasible([0, 1, 2], r)
    r[1][2] = 1.0
    assert not sic_chain_feasible([0, 1, 2], r)


def test_sic_verdict_survives_noise_scaling():
    """Interference-free pair: the decode verdict depends on gain ratios only."""
    rng = np.random.default_rng(1)
    for _ in range(200):
        ga, gb = rng.uniform(0.1, 5, size=2)
        pa, pb = rng.uniform(0.1, 1, size=2)
        verdicts = set()
        for noise in (1e-3, 1e-1, 1.0, 10.0):
            # user b's signal as seen at a and at b, with a's stream interfering
            at_a = ga * pb / (ga * pa + noise)
            at_b = gb * pb / (gb * pa + noise)
            verdicts.add(sic_feasible(at_a, at_b))
        assert verdicts == {ga >= gb}


def test_sinr_zf_examples():
    w = np.eye(2)
    ga, _ = sinr_zf(np.zeros(2), w, 0, [2.0, 0.0], 0.3, 0.1)
    assert ga == pytest.approx(6.0)
    _, gb = sinr_zf(np.array([1.0, 0.0]), w, 0, [2.0, 0.0], 1.0, 0.1)
    assert gb == 0.0
    _, gb = sinr_zf(np.array([1.0]), np.eye(1), 0, [1.0], 0.2, 0.1)
    assert gb == pytest.approx(0.8 / 0.3)
    with pytest.raises(ValueError):
        sinr_zf(np.ones(2), w, 0, [1, 1], 0.5, 0.0)


def test_zf_strong_user_ignores_other_clusters():
    rng = np.random.default_rng(4)
    w = zf_precoder(crand(rng, 4, 2)).W
    hb = crand(rng, 4)
    base = sinr_zf(hb, w, 0, [1.0, 0.0], 0.3, 0.1)
    weak = []
    for p_other in (0.0, 0.5, 1.0, 4.0):
        ga, gb = sinr_zf(hb, w, 0, [1.0, p_other], 0.3, 0.1)
        assert ga == base[0]
        weak.append(gb)
    assert all(x > y for x, y in zip(weak, weak[1:]))


def test_sinr_ph_examples():
    rng = np.random.default_rng(7)
    h_a, h_b = crand(rng, 6), crand(rng, 6)
    p = orthogonal_projection(crand(rng, 6, 2))
    g_a, g_b = p @ h_a, p @ h_b
    wb = crand(rng, 6)
    s = sinr_ph(np.zeros(6), wb, g_a=g_a, g_b=g_b, noise=0.5)
    assert s.gamma_a == 0.0
    assert s.gamma_b == pytest.approx(abs(np.vdot(g_b, wb)) ** 2 / 0.5)
    beams = ph_noma_precoder(h_a, h_b, p, SinrTargets(3.0, 1.0), noise=0.5)
    s = sinr_ph(beams, g_a=g_a, g_b=g_b, noise=0.5)
    assert (s.gamma_a, s.gamma_b) == (pytest.approx(3.0, rel=1e-6), pytest.approx(1.0, rel=1e-6))
    s2 = sinr_ph(2 * beams.w_a, 2 * beams.w_b, g_a=g_a, g_b=g_b, noise=0.5)
    assert s2.gamma_a == pytest.approx(4 * s.gamma_a)
    assert s.gamma_b < s2.gamma_b < 4 * s.gamma_b


def test_achievable_rate_examples():
    assert achievable_rate(0.0, 1.0) == 0.0
    assert achievable_rate(1.0, 1.0) == 1.0
    assert achievable_rate(3.0, 1e6) == pytest.approx(2e6)
    with pytest.raises(ValueError):
        achievable_rate(1.0, 0.0)


@given(st.floats(0, 1e6), st.floats(1e-6, 1e3), st.floats(0.1, 1e7))
def test_rate_monotone_and_linear_in_bandwidth(g, dg, b):
    assert achievable_rate(g + dg, b) > achievable_rate(g, b)
    assert achievable_rate(g, 2 * b) == pytest.approx(2 * achievable_rate(g, b), rel=1e-12)


def _scene(seed, k=4, m=4):
    rng = np.random.default_rng(seed)
    rows = crand(rng, k, m)
    plan = form_clusters(np.sum(np.abs(rows) ** 2, axis=1))
    return rows, decoding_order(plan, np.sum(np.abs(rows) ** 2, axis=1))


@given(st.integers(0, 10 ** 6))
def test_evaluate_ph_meets_targets_without_leakage(seed):
    rows, orders = _scene(seed)
    targets = np.array([2.0, 0.5, 3.0, 1.0])
    bud = evaluate_ph(rows, orders, targets, 0.1, 1.0)
    assert np.allclose(bud.sinr, targets, rtol=1e-6)
    assert bud.rate == pytest.approx(np.log2(1 + targets), rel=1e-6)


def test_evaluate_zf_and_oma_shapes():
    rows, orders = _scene(3)
    powers = np.full(4, 0.5)
    zf = evaluate_zf(rows, orders, powers, 0.1, 1e6)
    oma = evaluate_oma(rows, orders, powers, 0.1, 1e6)
    assert zf.sinr.shape == oma.sinr.shape == (4,)
    assert zf.sum_power == pytest.approx(2.0)
    assert oma.sum_power == pytest.approx(2.0)
    # time sharing serves each user alone: the strong user's SINR is the full
    # cluster power over noise through its unit-norm ZF beam
    w = zf_precoder(rows[[a for a, _ in orders]].conj().T).W
    a = orders[0][0]
    gain = abs(rows[a] @ w[:, 0]) ** 2 / np.sum(np.abs(w[:, 0]) ** 2)
    assert oma.sinr[a] == pytest.approx(gain * 1.0 / 0.1, rel=1e-9)
