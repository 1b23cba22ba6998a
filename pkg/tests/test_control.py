import numpy as np
import pytest

from risnoma.channel import SmallScaleDraw, build_links
from risnoma.control import (_stack_cost, align_phases, equal_split_powers, mos_targets,
                             ph_at_power, projected_gains, static_link, zf_powers)
from risnoma.env import SceneConfig, draw_users, nearest_facade_point
from risnoma.noma import decoding_order, form_clusters
from risnoma.precoding import orthogonal_projection
from risnoma.units import db_to_linear, dbm_to_watt

SCENE = SceneConfig()


def setup(seed):
    rng = np.random.default_rng(seed)
    users = draw_users(SCENE, rng)
    draw = SmallScaleDraw.draw(SCENE.n_users, SCENE.n_antennas, SCENE.n_elements, rng)
    plan = form_clusters(np.sum(np.abs(draw.direct) ** 2, axis=1))
    pos = nearest_facade_point(SCENE.facades, users.mean(axis=0))
    links = build_links(SCENE.bs_pos, users, pos, draw, SCENE.pathloss, SCENE.k_factor,
                        db_to_linear(-SCENE.direct_blockage_db))
    return rng, users, draw, plan, pos, links


def test_projected_gains_direct():
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    pairs = ((0, 1), (2, 3))
    g = projected_gains(rows, pairs)
    p = orthogonal_projection(rows[[2, 3]].conj().T)
    assert g[0] == pytest.approx(np.linalg.norm(p @ rows[0].conj()) ** 2)


@pytest.mark.parametrize("seed", range(4))
def test_alignment_never_increases_cost(seed):
    rng, _, _, plan, _, links = setup(seed)
    theta0 = rng.uniform(0, 2 * np.pi, SCENE.n_elements)
    theta = align_phases(links, theta0, plan.pairs)
    before = _stack_cost(links.rows(theta0)[None], plan.pairs)[0]
    after = _stack_cost(links.rows(theta)[None], plan.pairs)[0]
    assert after <= before


def test_mos_targets_respect_budget_and_floors():
    g = np.array([1e-12, 5e-13, 2e-12, 1e-13])
    noise = SCENE.noise
    floors = SCENE.floors()
    budget = dbm_to_watt(20.0)
    t = mos_targets(g, budget, floors, noise, SCENE.bandwidth, SCENE.mos_params)
    assert np.all(t >= floors * (1 - 1e-12))
    assert np.sum(t * noise / g) <= budget * (1 + 1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_ph_at_power_meets_budget(seed):
    rng, _, _, plan, _, links = setup(seed)
    theta = align_phases(links, rng.uniform(0, 2 * np.pi, SCENE.n_elements), plan.pairs)
    rows = links.rows(theta)
    orders = decoding_order(plan, np.sum(np.abs(rows) ** 2, axis=1))
    budget = dbm_to_watt(20.0)
    lb = ph_at_power(rows, orders, plan.pairs, budget, SCENE, SCENE.noise)
    assert lb.sum_power == pytest.approx(budget, rel=1e-6)


def test_power_splits_sum_to_budget():
    _, _, _, plan, _, links = setup(1)
    rows = links.rows(np.zeros(SCENE.n_elements))
    orders = decoding_order(plan, np.sum(np.abs(rows) ** 2, axis=1))
    assert np.sum(equal_split_powers(orders, 0.1, 4)) == pytest.approx(0.1)
    p = zf_powers(rows, orders, 0.1, SCENE.noise, SCENE.mos_params, SCENE.bandwidth)
    assert np.sum(p) == pytest.approx(0.1)
    for a, b in orders:
        assert p[a] + p[b] == pytest.approx(0.05)


@pytest.mark.parametrize("scheme", ["ph", "zf", "zf_equal", "oma"])
def test_static_link_schemes(scheme):
    rng, users, draw, plan, pos, _ = setup(2)
    res = static_link(SCENE, users, draw, pos, plan, dbm_to_watt(20.0), rng, scheme=scheme)
    assert res.ee > 0 and np.isfinite(res.ee)
    assert res.total_power == pytest.approx(res.budget.sum_power + 4 * 0.01 + SCENE.power.p_bs
                                            + SCENE.n_elements * 0.25)


def test_unknown_scheme():
    rng, users, draw, plan, pos, _ = setup(2)
    with pytest.raises(ValueError):
        static_link(SCENE, users, draw, pos, plan, 0.1, rng, scheme="cdma")


def test_fixed_order_matches_dynamic_when_gains_do_not_cross():
    matched = 0
    for seed in range(30):
        _, users, draw, plan, pos, _ = setup(seed)
        dyn = static_link(SCENE, users, draw, pos, plan, 0.1, np.random.default_rng(seed))
        fix = static_link(SCENE, users, draw, pos, plan, 0.1, np.random.default_rng(seed),
                          fixed_order=True)
        if dyn.budget.orders == fix.budget.orders:
            matched += 1
            assert dyn.ee == pytest.approx(fix.ee, rel=1e-12)
    assert matched > 0
