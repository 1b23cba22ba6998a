"""User pairing, SIC decoding order and SINR/rate evaluation.

Channel rows use the received-signal convention of :mod:`risnoma.channel`
(user k receives ``rows[k] @ x``). A cluster order ``(a, b)`` means user a
decodes first and cancels b's signal by SIC; b decodes its own signal
directly.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .precoding import SinrTargets, orthogonal_projection, ph_noma_precoder, zf_precoder

# relative slack when comparing decode SINRs; identical channels sit exactly on the boundary
SIC_RTOL = 1e-9


@dataclass(frozen=True)
class ClusterPlan:
    pairs: tuple  # ((strong, weak), ...)

    def __post_init__(self):
        members = [u for p in self.pairs for u in p]
        if len(set(members)) != len(members):
            raise ConfigError("a user appears in more than one cluster")

    @property
    def n_clusters(self):
        return len(self.pairs)

    @property
    def n_users(self):
        return 2 * len(self.pairs)

    def cluster_of(self, user):
        for l, p in enumerate(self.pairs):
            if user in p:
                return l
        raise KeyError(user)


def _rank_desc(gains):
    gains = np.asarray(gains, dtype=float)
    # stable sort on -gain keeps lower index first among equal gains
    return [int(i) for i in np.argsort(-gains, kind="stable")]


def form_clusters(channel_gains):
    """Pair the i-th strongest user with the i-th weakest one."""
    k = len(channel_gains)
    if k < 2 or k % 2:
        raise ConfigError(f"need an even number of users >= 2, got {k}")
    ranked = _rank_desc(channel_gains)
    return ClusterPlan(tuple((ranked[i], ranked[k - 1 - i]) for i in range(k // 2)))


def decoding_order(plan, gains):
    """Per-cluster ``(first, second)`` by descending effective gain."""
    gains = np.asarray(gains, dtype=float)
    orders = []
    for a, b in plan.pairs:
        if gains[b] > gains[a] or (gains[b] == gains[a] and b < a):
            a, b = b, a
        orders.append((a, b))
    return orders


def sic_feasible(rate_b_at_a, rate_b_at_b, rtol=SIC_RTOL):
    """True when the first decoder can decode the second user's message."""
    return rate_b_at_a >= rate_b_at_b * (1.0 - rtol)


def sic_chain_feasible(order, decode_rates, rtol=SIC_RTOL):
    """Pairwise check for an ordered cluster of any size.

    ``decode_rates[i][j]`` is the rate at which user i decodes user j's
    message; every user earlier in ``order`` must decode each later user at
    least as fast as that user decodes itself.
    """
    for pos, j in enumerate(order):
        for i in order[:pos]:
            if not sic_feasible(decode_rates[i][j], decode_rates[j][j], rtol):
                return False
    return True


def sinr_zf(h_weak, W, cluster, cluster_powers, alpha_a, noise):
    """Strong/weak SINRs for cluster ``cluster`` under ZF precoding.

    The strong user sees ``alpha_a P_l / noise``; the weak user is limited by
    the strong user's share of the same beam plus the other clusters' beams.
    """
    if noise <= 0:
        raise ValueError("noise power must be positive")
    alpha_b = 1.0 - alpha_a
    if not (0.0 <= alpha_a <= 1.0):
        raise ValueError("power split must lie in [0, 1]")
    h_weak = np.ravel(np.asarray(h_weak, dtype=complex))
    W = np.atleast_2d(W)
    p = np.asarray(cluster_powers, dtype=float)
    gains = np.abs(h_weak @ W) ** 2
    own = gains[cluster] * p[cluster]
    inter = float(np.sum(gains * p) - own)
    gamma_a = alpha_a * p[cluster] / noise
    gamma_b = own * alpha_b / (own * alpha_a + inter + noise)
    return float(gamma_a), float(gamma_b)


@dataclass
class SinrPair:
    gamma_a: float
    gamma_b: float
    gamma_b_at_a: float  # SINR at user a when decoding b's message

    @property
    def sic_ok(self):
        return sic_feasible(self.gamma_b_at_a, self.gamma_b)


def sinr_ph(beams_or_wa, w_b=None, g_a=None, g_b=None, noise=1.0):
    """PH-NOMA SINRs from projected channels ``g_a = P h_a``, ``g_b = P h_b``.

    Accepts either a :class:`PhNomaBeams` plus the projected channels, or the
    two beam vectors explicitly.
    """
    if w_b is None:
        w_a, w_b = beams_or_wa.w_a, beams_or_wa.w_b
    else:
        w_a = beams_or_wa
    w_a = np.ravel(w_a)
    w_b = np.ravel(w_b)
    aa = abs(np.vdot(g_a, w_a)) ** 2
    ab = abs(np.vdot(g_a, w_b)) ** 2
    ba = abs(np.vdot(g_b, w_a)) ** 2
    bb = abs(np.vdot(g_b, w_b)) ** 2
    return SinrPair(aa / noise, bb / (ba + noise), ab / (aa + noise))


def achievable_rate(gamma, bandwidth):
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SINR must be non-negative")
    out = bandwidth * np.log2(1.0 + gamma)
    return float(out) if out.ndim == 0 else out


@dataclass
class LinkBudget:
    sinr: np.ndarray  # per user
    rate: np.ndarray  # bits/s
    power: np.ndarray  # watts radiated for each user's stream
    orders: list
    sic_ok: list
    beams: list = field(default_factory=list)

    @property
    def sum_power(self):
        return float(np.sum(self.power))


def _superposition_sinr(rows, streams, orders, noise, penalize_sic=False):
    """SINRs for per-cluster two-user superposition.

    ``streams[l] = (beam_a, beam_b)`` are the power-scaled transmit vectors of
    cluster l. Inter-cluster leakage is always counted. User a is credited
    with perfect cancellation of b's signal (the design model); the decode
    condition is still evaluated and reported. With ``penalize_sic`` a failed
    decode leaves b's signal in a's interference instead.
    """
    k = rows.shape[0]
    beams = np.stack([s for pair in streams for s in pair], axis=1)  # M x 2L
    rx = np.abs(rows @ beams) ** 2  # K x 2L
    total = rx.sum(axis=1)
    sinr = np.zeros(k)
    sic_ok = []
    for l, (a, b) in enumerate(orders):
        ia, ib = 2 * l, 2 * l + 1
        inter_a = total[a] - rx[a, ia] - rx[a, ib]
        inter_b = total[b] - rx[b, ia] - rx[b, ib]
        g_b = rx[b, ib] / (rx[b, ia] + inter_b + noise)
        g_b_at_a = rx[a, ib] / (rx[a, ia] + inter_a + noise)
        ok = sic_feasible(g_b_at_a, g_b)
        leak = rx[a, ib] if (penalize_sic and not ok) else 0.0
        sinr[a], sinr[b] = rx[a, ia] / (inter_a + noise + leak), g_b
        sic_ok.append(bool(ok))
    return sinr, sic_ok


def ph_cluster_beams(rows, order, others, targets, noise, p_perp=None):
    """PH-NOMA beams for one cluster; ``others`` are the users to null."""
    cols = rows.conj().T  # M x K, column k is h_k
    if p_perp is None:
        p_perp = orthogonal_projection(cols[:, others])
    a, b = order
    return ph_noma_precoder(cols[:, a], cols[:, b], p_perp,
                            SinrTargets(float(targets[a]), float(targets[b])), noise)


def _cluster_sic_ok(rows, order, beams, noise):
    a, b = order
    aa = abs(rows[a] @ beams.w_a) ** 2
    ab = abs(rows[a] @ beams.w_b) ** 2
    ba = abs(rows[b] @ beams.w_a) ** 2
    bb = abs(rows[b] @ beams.w_b) ** 2
    return sic_feasible(ab / (aa + noise), bb / (ba + noise))


def evaluate_ph(rows, orders, targets, noise, bandwidth, repair=False, penalize_sic=False):
    """PH-NOMA link budget for SINR ``targets`` (indexed by user).

    With ``repair`` a cluster whose decode condition fails is flipped when the
    flipped order satisfies it. Nulling makes clusters independent, so the
    check is done cluster by cluster.
    """
    rows = np.asarray(rows, dtype=complex)
    k = rows.shape[0]
    cols = rows.conj().T
    beams, streams, final = [], [], []
    power = np.zeros(k)
    for a, b in orders:
        others = [j for j in range(k) if j != a and j != b]
        p_perp = orthogonal_projection(cols[:, others])
        bm = ph_cluster_beams(rows, (a, b), others, targets, noise, p_perp)
        if repair and not _cluster_sic_ok(rows, (a, b), bm, noise):
            alt = ph_cluster_beams(rows, (b, a), others, targets, noise, p_perp)
            if _cluster_sic_ok(rows, (b, a), alt, noise):
                a, b, bm = b, a, alt
        final.append((a, b))
        beams.append(bm)
        streams.append((bm.w_a, bm.w_b))
        power[a], power[b] = bm.power_a, bm.power_b
    sinr, sic_ok = _superposition_sinr(rows, streams, final, noise, penalize_sic)
    return LinkBudget(sinr, achievable_rate(sinr, bandwidth), power, final, sic_ok, beams)


def evaluate_zf(rows, orders, user_powers, noise, bandwidth, penalize_sic=False):
    """ZF on the first-decoding users; ``user_powers`` are radiated watts per user."""
    rows = np.asarray(rows, dtype=complex)
    strong = [a for a, _ in orders]
    zf = zf_precoder(rows[strong].conj().T)
    norms2 = zf.beam_norms2
    streams = []
    for l, (a, b) in enumerate(orders):
        w = zf.W[:, l] / np.sqrt(norms2[l])
        streams.append((np.sqrt(user_powers[a]) * w, np.sqrt(user_powers[b]) * w))
    sinr, sic_ok = _superposition_sinr(rows, streams, orders, noise, penalize_sic)
    power = np.asarray(user_powers, dtype=float).copy()
    return LinkBudget(sinr, achievable_rate(sinr, bandwidth), power, list(orders), sic_ok, [zf])


def evaluate_oma(rows, orders, user_powers, noise, bandwidth):
    """Per-cluster time sharing over the same strong-user ZF beams.

    Each user is served alone in half of the slots with the whole cluster
    power; rates are halved. Clusters transmit simultaneously.
    """
    rows = np.asarray(rows, dtype=complex)
    k = rows.shape[0]
    strong = [a for a, _ in orders]
    zf = zf_precoder(rows[strong].conj().T)
    unit = zf.W / np.sqrt(zf.beam_norms2)
    user_powers = np.asarray(user_powers, dtype=float)
    cluster_p = np.array([user_powers[a] + user_powers[b] for a, b in orders])
    sinr = np.zeros(k)
    for slot in (0, 1):
        served = [o[slot] for o in orders]
        rx = np.abs(rows[served] @ unit) ** 2 * cluster_p  # served users x clusters
        for l, user in enumerate(served):
            sinr[user] = rx[l, l] / (rx[l].sum() - rx[l, l] + noise)
    # each user draws half its cluster's power on average
    power = np.zeros(k)
    for l, (a, b) in enumerate(orders):
        power[a] = power[b] = cluster_p[l] / 2.0
    rate = 0.5 * achievable_rate(sinr, bandwidth)
    return LinkBudget(sinr, rate, power, list(orders), [True] * len(orders), [zf])
