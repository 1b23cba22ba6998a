"""Model-based controllers used by the sweep baselines.

Given channels, these pick RIS phases, SINR targets or per-user powers in
closed form or by a short search, so that sweeps over transmit power or
element count can be evaluated without training an agent per grid point.
"""

from dataclasses import dataclass

import numpy as np

from .channel import build_links
from .errors import DegenerateGeometryError, SingularMatrixError
from .metrics import mos, slot_energy_efficiency
from .noma import decoding_order, evaluate_oma, evaluate_ph, evaluate_zf
from .precoding import orthogonal_projection, zf_precoder
from .units import db_to_linear

PHASE_LEVELS = np.arange(20) * np.pi / 10


def _projectors(rows, pairs):
    """Per-cluster projector onto the complement of the other clusters' channels."""
    cols = rows.conj().T
    k = rows.shape[0]
    out = []
    for a, b in pairs:
        others = [j for j in range(k) if j not in (a, b)]
        out.append(orthogonal_projection(cols[:, others]))
    return out


def projected_gains(rows, pairs):
    """``||P_l h_k||^2`` for every user, with ``P_l`` its cluster's projector."""
    g = np.zeros(rows.shape[0])
    cols = rows.conj().T
    for (a, b), p in zip(pairs, _projectors(rows, pairs)):
        for u in (a, b):
            g[u] = np.linalg.norm(p @ cols[:, u]) ** 2
    return g


def _stack_cost(stack, pairs):
    """Sum over users of ``1 / ||P h||^2`` for a stack of candidate row sets (S x K x M)."""
    s, k, m = stack.shape
    cols = np.conj(np.transpose(stack, (0, 2, 1)))  # S x M x K
    cost = np.zeros(s)
    eye = np.eye(m)
    for a, b in pairs:
        others = [j for j in range(k) if j not in (a, b)]
        if others:
            hh = cols[:, :, others]
            hh_h = np.conj(np.transpose(hh, (0, 2, 1)))
            p = eye[None] - hh @ np.linalg.solve(hh_h @ hh, hh_h)
        else:
            p = np.broadcast_to(eye, (s, m, m))
        for u in (a, b):
            g = np.sum(np.abs(p @ cols[:, :, u][:, :, None]) ** 2, axis=(1, 2))
            cost += 1.0 / np.maximum(g, np.finfo(float).tiny)
    return cost


def align_phases(links, theta0, pairs, sweeps=2):
    """Coordinate search over the discrete phase levels.

    Each element in turn takes the level minimising the sum of inverse
    projected gains, which is the quantity PH-NOMA power scales with.
    """
    theta = np.array(theta0, dtype=float)
    if links.n_elements == 0:
        return theta
    ph = links.beta * np.exp(1j * PHASE_LEVELS)
    for _ in range(sweeps):
        for n in range(links.n_elements):
            v = links.beta * np.exp(1j * theta)
            v[n] = 0.0
            base = links.direct + np.einsum("n,knm->km", v, links.cascade)
            stack = base[None] + ph[:, None, None] * links.cascade[None, :, n, :]
            with np.errstate(all="ignore"):
                cost = _stack_cost(stack, pairs)
            cost = np.where(np.isfinite(cost), cost, np.inf)
            theta[n] = PHASE_LEVELS[int(np.argmin(cost))]
    return theta


def mos_targets(gains, budget, floors, noise, bandwidth, mos_params, grid=300):
    """SINR targets maximising sum MOS for a power budget.

    ``gains`` are projected channel gains; user k reaches SINR ``p g_k / noise``
    with power p. Per-user powers come from a Lagrangian search on a log grid,
    never below what the SINR floor needs.
    """
    g = np.asarray(gains, dtype=float) / noise
    floors = np.asarray(floors, dtype=float)
    p = np.logspace(-9, np.log10(budget), grid)[None, :]
    p = np.maximum(p, (floors / g)[:, None])
    q = mos(bandwidth * np.log2(1.0 + p * g[:, None]), mos_params)
    idx = np.arange(len(g))
    lo, hi = -20.0, 5.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        pick = p[idx, np.argmax(q - 10.0 ** mid * p, axis=1)]
        if pick.sum() > budget:
            lo = mid
        else:
            hi = mid
    pick = p[idx, np.argmax(q - 10.0 ** hi * p, axis=1)]
    return pick * g


def _bisect_log(f, target, lo, hi, iters=40):
    """Largest x (log-bisection) with f(x) <= target, assuming f increasing."""
    lo, hi = np.log(lo), np.log(hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(np.exp(mid)) > target:
            hi = mid
        else:
            lo = mid
    return float(np.exp(lo))


def ph_at_power(rows, orders, pairs, budget, scene, noise, repair=True):
    """PH-NOMA link budget whose exact radiated power matches ``budget``.

    Targets follow :func:`mos_targets` on the projected gains and are then
    scaled by one common factor until the closed-form beam powers add up to
    the budget.
    """
    floors = scene.floors()
    gains = projected_gains(rows, pairs)
    if np.any(gains <= 0):
        raise DegenerateGeometryError("a user has no component outside the nulled subspace")
    t = mos_targets(gains, budget, floors, noise, scene.bandwidth, scene.mos_params)

    def power(s):
        return evaluate_ph(rows, orders, t * s, noise, scene.bandwidth, repair=repair).sum_power

    s = _bisect_log(power, budget, 1e-6, 1e6)
    return evaluate_ph(rows, orders, t * s, noise, scene.bandwidth, repair=repair)


def zf_powers(rows, orders, budget, noise, mos_params, bandwidth, n_alpha=101):
    """Per-user ZF powers: equal cluster power, split maximising the cluster's MOS.

    The split is searched on a uniform grid of ``alpha`` (the first user's share).
    """
    strong = [a for a, _ in orders]
    zf = zf_precoder(rows[strong].conj().T)
    unit = zf.W / np.sqrt(zf.beam_norms2)
    n_cl = len(orders)
    pl = budget / n_cl
    g = np.abs(rows @ unit) ** 2
    alpha = np.linspace(0.0, 1.0, n_alpha)
    powers = np.zeros(rows.shape[0])
    for l, (a, b) in enumerate(orders):
        inter_b = sum(g[b, j] * pl for j in range(n_cl) if j != l)
        inter_a = sum(g[a, j] * pl for j in range(n_cl) if j != l)
        ga = alpha * pl * g[a, l] / (inter_a + noise)
        gb = (1 - alpha) * pl * g[b, l] / (alpha * pl * g[b, l] + inter_b + noise)
        q = mos(bandwidth * np.log2(1 + ga), mos_params) + mos(bandwidth * np.log2(1 + gb), mos_params)
        i = int(np.argmax(q))
        powers[a], powers[b] = alpha[i] * pl, (1 - alpha[i]) * pl
    return powers


def equal_split_powers(orders, budget, n_users):
    """Equal cluster power and an equal split inside each cluster."""
    powers = np.zeros(n_users)
    share = budget / (2 * len(orders))
    for a, b in orders:
        powers[a] = powers[b] = share
    return powers


@dataclass
class StaticResult:
    ee: float
    sum_mos: float
    total_power: float
    budget: object


def static_link(scene, users, draw, ris_pos, plan, budget, rng, scheme="ph",
                fixed_order=False, align=True):
    """Evaluate one channel realization under a model-based controller.

    ``scheme`` is one of ``ph``, ``zf``, ``zf_equal`` or ``oma``. Phases start
    uniformly random and are aligned unless ``align`` is false. With
    ``fixed_order`` the decoding order is taken at the random starting phases
    and kept, without any SIC-driven reordering.
    """
    n = draw.ris_user.shape[1]
    links = build_links(scene.bs_pos, users, ris_pos, draw, scene.pathloss, scene.k_factor,
                        db_to_linear(-scene.direct_blockage_db))
    theta0 = rng.uniform(0.0, 2 * np.pi, size=n)
    start_orders = decoding_order(plan, np.sum(np.abs(links.rows(theta0)) ** 2, axis=1))
    theta = align_phases(links, theta0, plan.pairs) if (align and n) else theta0
    rows = links.rows(theta)
    orders = start_orders if fixed_order else decoding_order(plan, np.sum(np.abs(rows) ** 2, axis=1))
    noise = scene.noise
    if scheme == "ph":
        lb = ph_at_power(rows, orders, plan.pairs, budget, scene, noise, repair=not fixed_order)
    elif scheme == "zf":
        p = zf_powers(rows, orders, budget, noise, scene.mos_params, scene.bandwidth)
        lb = evaluate_zf(rows, orders, p, noise, scene.bandwidth)
    elif scheme == "zf_equal":
        lb = evaluate_zf(rows, orders, equal_split_powers(orders, budget, scene.n_users),
                         noise, scene.bandwidth)
    elif scheme == "oma":
        lb = evaluate_oma(rows, orders, equal_split_powers(orders, budget, scene.n_users),
                          noise, scene.bandwidth)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    ee, q, p = slot_energy_efficiency(lb.rate, lb.sum_power, n, scene.mos_params, scene.power)
    return StaticResult(ee, q, p, lb)


def safe_static_link(*args, **kwargs):
    """:func:`static_link`, returning None when the geometry is singular."""
    try:
        return static_link(*args, **kwargs)
    except (SingularMatrixError, DegenerateGeometryError):
        return None
