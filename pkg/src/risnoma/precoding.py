"""Zero-forcing and projection-hybrid NOMA (PH-NOMA) precoders.

Channel vectors here are column vectors ``h`` such that a user receives
``h^H x``; the combined matrix ``H`` stacks them as columns (M x L).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, DimensionError, SingularMatrixError

DEFAULT_COND_CAP = 1e12
_TINY = np.finfo(float).tiny


def _gram_inverse(h, cond_cap, what):
    gram = h.conj().T @ h
    # one Hermitian eigendecomposition yields both the condition number and the inverse
    lam, vec = np.linalg.eigh(gram)
    lo, hi = lam[0], lam[-1]
    if not (np.isfinite(hi) and lo > 0 and hi / lo <= cond_cap):
        cond = np.inf if lo <= 0 else hi / lo
        raise SingularMatrixError(
            f"{what}: Gram matrix condition number {cond:.3g} exceeds cap {cond_cap:.3g}",
            columns=h.shape[1])
    return (vec / lam) @ vec.conj().T


def pseudo_inverse(h, cond_cap=DEFAULT_COND_CAP):
    """Right pseudo-inverse ``H (H^H H)^-1`` so that ``H^H @ result = I_L``."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    m, l = h.shape
    if l > m:
        raise DimensionError(f"need L <= M for zero forcing, got M={m}, L={l}")
    return h @ _gram_inverse(h, cond_cap, f"combined channel ({l} columns)")


@dataclass
class ZfPrecoder:
    W: np.ndarray  # M x L, column l serves cluster l

    @property
    def beam_norms2(self):
        return np.sum(np.abs(self.W) ** 2, axis=0)


def zf_precoder(h_combined, cond_cap=DEFAULT_COND_CAP):
    """ZF beams with ``h_j^H w_l = 0`` for j != l and ``h_l^H w_l = 1``."""
    return ZfPrecoder(pseudo_inverse(h_combined, cond_cap))


def orthogonal_projection(h_hat, cond_cap=DEFAULT_COND_CAP):
    """Projector onto the orthogonal complement of the columns of ``h_hat``."""
    h_hat = np.asarray(h_hat, dtype=complex)
    if h_hat.ndim == 1:
        h_hat = h_hat[:, None]
    m = h_hat.shape[0]
    if h_hat.shape[1] == 0:
        return np.eye(m, dtype=complex)
    p = np.eye(m, dtype=complex) - h_hat @ _gram_inverse(h_hat, cond_cap, "nulled subspace") @ h_hat.conj().T
    return 0.5 * (p + p.conj().T)


def channel_correlation(h_a, h_b):
    """``|h_b^H h_a|^2 / (|h_a|^2 |h_b|^2)``, i.e. cos^2 of the angle between them."""
    h_a = np.ravel(np.asarray(h_a, dtype=complex))
    h_b = np.ravel(np.asarray(h_b, dtype=complex))
    na = np.vdot(h_a, h_a).real
    nb = np.vdot(h_b, h_b).real
    if na == 0 or nb == 0:
        raise ValueError("channel correlation is undefined for a zero vector")
    u = abs(np.vdot(h_b, h_a)) ** 2 / (na * nb)
    return float(min(max(u, 0.0), 1.0))


@dataclass(frozen=True)
class SinrTargets:
    gamma_a: float
    gamma_b: float

    def __post_init__(self):
        for g in (self.gamma_a, self.gamma_b):
            if not np.isfinite(g) or g < 0:
                raise ValueError(f"SINR targets must be finite and non-negative, got {g}")


@dataclass
class PhNomaBeams:
    w_a: np.ndarray
    w_b: np.ndarray
    nu_a: float
    nu_b: float
    u: float  # cos^2 between the projected channels
    e_a: np.ndarray
    e_b: np.ndarray
    proj_norm_a2: float
    proj_norm_b2: float

    @property
    def power_a(self):
        return float(np.vdot(self.w_a, self.w_a).real)

    @property
    def power_b(self):
        return float(np.vdot(self.w_b, self.w_b).real)


def ph_noma_precoder(h_a, h_b, p_perp, targets, noise=1.0, degenerate_tol=1e-12):
    """Minimum-power beams for a two-user cluster inside the nulled subspace.

    User a (decodes first, applies SIC) and user b reach exactly
    ``targets.gamma_a`` / ``targets.gamma_b`` under the PH-NOMA SINR model
    with noise power ``noise``.
    """
    h_a = np.ravel(np.asarray(h_a, dtype=complex))
    h_b = np.ravel(np.asarray(h_b, dtype=complex))
    if p_perp.shape != (h_a.size, h_a.size) or h_b.size != h_a.size:
        raise DimensionError("projection and channel dimensions disagree")
    g_a = p_perp @ h_a
    g_b = p_perp @ h_b
    na2 = np.vdot(g_a, g_a).real
    nb2 = np.vdot(g_b, g_b).real
    for label, n2, h in (("a", na2, h_a), ("b", nb2, h_b)):
        if n2 <= degenerate_tol * max(np.vdot(h, h).real, _TINY):
            raise DegenerateGeometryError(f"user {label}'s projected channel vanishes")
    e_a = g_a / np.sqrt(na2)
    e_b = g_b / np.sqrt(nb2)
    rho = np.vdot(e_b, e_a)  # e_b^H e_a
    u = float(min(abs(rho) ** 2, 1.0))
    sin2 = 1.0 - u
    ga, gb = targets.gamma_a, targets.gamma_b

    nu_a2 = ga * noise / na2 / (1.0 + gb * sin2) ** 2
    nu_b2 = gb * noise / nb2 + gb * u * nu_a2
    nu_a, nu_b = np.sqrt(nu_a2), np.sqrt(nu_b2)
    w_a = nu_a * ((1.0 + gb) * e_a - gb * rho * e_b)
    w_b = nu_b * e_b
    return PhNomaBeams(w_a, w_b, float(nu_a), float(nu_b), u, e_a, e_b, float(na2), float(nb2))


def transmit_powers(targets, proj_norm_a2, proj_norm_b2, u, noise=1.0):
    """Closed-form ``(|w_a|^2, |w_b|^2)`` for PH-NOMA beams."""
    ga, gb = targets.gamma_a, targets.gamma_b
    sin2 = 1.0 - u
    denom = (1.0 + gb * sin2) ** 2
    p_a = ga * noise / proj_norm_a2 * ((1.0 + gb * sin2) * (1.0 + gb) - gb * u) / denom
    p_b = gb * noise / proj_norm_b2 + ga * noise / proj_norm_a2 * gb * u / denom
    return float(p_a), float(p_b)
