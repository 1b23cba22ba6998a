"""Geometry, path loss, small-scale fading and the composite BS->user channel.

Channel rows follow the received-signal convention: the row ``h`` of user k
is the 1xM vector such that user k receives ``h @ x`` for a transmit vector
``x``. The composite row is ``h_direct + h_ris_user @ diag(v) @ H_bs_ris``
with ``v_n = beta * exp(1j * theta_n)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

TWO_PI = 2.0 * np.pi

LINKS = ("bs_mu", "bs_ris", "ris_mu")


@dataclass(frozen=True)
class PathLossParams:
    c0: float = 1e-3  # -30 dB at the reference distance
    d0: float = 1.0
    alpha_bs_mu: float = 3.5
    alpha_bs_ris: float = 2.2
    alpha_ris_mu: float = 2.8

    def __post_init__(self):
        if self.c0 <= 0 or self.d0 <= 0:
            raise ValueError("c0 and d0 must be positive")
        if min(self.alpha_bs_mu, self.alpha_bs_ris, self.alpha_ris_mu) <= 0:
            raise ValueError("path-loss exponents must be positive")

    def alpha(self, link):
        try:
            return getattr(self, "alpha_" + link)
        except AttributeError:
            raise ValueError(f"unknown link class {link!r}; expected one of {LINKS}") from None


def path_loss(d, params=PathLossParams(), link="bs_mu", alpha=None):
    """Linear power gain ``c0 * (d / d0) ** -alpha``.

    ``alpha`` overrides the exponent of ``link`` when given.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path loss is undefined for non-positive distance")
    a = params.alpha(link) if alpha is None else alpha
    out = params.c0 * (d / params.d0) ** (-a)
    return float(out) if out.ndim == 0 else out


def wrap_phase(theta):
    """Wrap angles into [0, 2*pi)."""
    out = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


@dataclass
class PhaseConfig:
    theta: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        self.theta = wrap_phase(np.atleast_1d(self.theta))

    @property
    def n(self):
        return self.theta.size

    def coefficients(self):
        return self.beta * np.exp(1j * self.theta)


def phase_matrix(cfg):
    """N x N diagonal reflection matrix."""
    return np.diag(cfg.coefficients())


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def crandn(rng, *shape):
    """Circularly symmetric complex Gaussian samples with unit second moment."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_fading(rows, cols, kind="rayleigh", k_factor=None, los=None, rng=None):
    """Draw a rows x cols small-scale fading matrix.

    ``kind="rician"`` mixes the deterministic ``los`` component with a
    unit-power scatter term: ``sqrt(K/(K+1)) los + sqrt(1/(K+1)) scatter``.
    ``k_factor=np.inf`` returns ``los`` exactly.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    rng = _as_rng(rng)
    scatter = crandn(rng, rows, cols)
    if kind == "rayleigh":
        return scatter
    if kind != "rician":
        raise ValueError(f"unknown fading kind {kind!r}")
    if k_factor is None or k_factor < 0:
        raise ValueError("rician fading needs k_factor >= 0")
    los = np.asarray(los, dtype=complex)
    if los.shape != (rows, cols):
        raise DimensionError(f"LoS component has shape {los.shape}, expected {(rows, cols)}")
    return rician_mix(los, scatter, k_factor)


def rician_mix(los, scatter, k_factor):
    if np.isinf(k_factor):
        return np.array(los, dtype=complex)
    return np.sqrt(k_factor / (k_factor + 1.0)) * los + np.sqrt(1.0 / (k_factor + 1.0)) * scatter


def ula_response(n, cos_angle):
    """Half-wavelength uniform linear array response (unit-modulus entries)."""
    return np.exp(1j * np.pi * np.arange(n) * cos_angle)


def los_component(n_ris, n_bs, bs_pos, ris_pos):
    """Rank-one N x M line-of-sight BS->RIS matrix; both arrays lie along x."""
    delta = np.asarray(ris_pos, dtype=float) - np.asarray(bs_pos, dtype=float)
    dist = np.linalg.norm(delta)
    cos_x = delta[0] / dist if dist > 0 else 1.0
    return np.outer(ula_response(n_ris, -cos_x), ula_response(n_bs, cos_x).conj())


def composite_channel(h_direct, h_ris_user, cfg, h_bs_ris):
    """``h_direct + h_ris_user @ Theta @ h_bs_ris`` as a 1 x M row."""
    h_direct = np.atleast_2d(np.asarray(h_direct, dtype=complex))
    h_ris_user = np.atleast_2d(np.asarray(h_ris_user, dtype=complex))
    h_bs_ris = np.atleast_2d(np.asarray(h_bs_ris, dtype=complex))
    n, m = h_bs_ris.shape
    if h_direct.shape != (1, m):
        raise DimensionError(f"direct channel must be 1x{m}, got {h_direct.shape}")
    if h_ris_user.shape != (1, n):
        raise DimensionError(f"RIS-user channel must be 1x{n}, got {h_ris_user.shape}")
    if cfg.n != n:
        raise DimensionError(f"phase configuration has {cfg.n} elements, channel has {n}")
    return h_direct + (h_ris_user * cfg.coefficients()) @ h_bs_ris


def distance(a, b):
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


@dataclass
class SmallScaleDraw:
    """One block-fading realization, held fixed for an episode."""

    direct: np.ndarray  # K x M
    ris_user: np.ndarray  # K x N
    bs_ris_scatter: np.ndarray  # N x M

    @classmethod
    def draw(cls, n_users, n_antennas, n_elements, rng):
        rng = _as_rng(rng)
        return cls(
            direct=crandn(rng, n_users, n_antennas),
            ris_user=crandn(rng, n_users, n_elements),
            bs_ris_scatter=crandn(rng, n_elements, n_antennas),
        )

    def truncated(self, n_elements):
        """The same draw restricted to the first ``n_elements`` RIS elements."""
        return SmallScaleDraw(self.direct, self.ris_user[:, :n_elements],
                              self.bs_ris_scatter[:n_elements])


@dataclass
class LinkSet:
    """Large-scale-weighted links for every user at one RIS position.

    ``rows(theta)`` gives the K x M composite channel rows; ``cascade[k, n]``
    is the M-vector contributed by element n to user k at unit reflection.
    """

    direct: np.ndarray  # K x M
    cascade: np.ndarray  # K x N x M
    beta: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def n_elements(self):
        return self.cascade.shape[1]

    def rows(self, theta):
        if self.n_elements == 0:
            return self.direct.copy()
        v = self.beta * np.exp(1j * np.asarray(theta, dtype=float))
        return self.direct + np.einsum("n,knm->km", v, self.cascade)


def build_links(bs_pos, user_pos, ris_pos, draw, pathloss=PathLossParams(),
                k_factor=10.0, direct_blockage=1.0, beta=1.0):
    """Apply path loss to a small-scale draw and return the :class:`LinkSet`.

    ``direct_blockage`` is a linear power attenuation (<= 1) applied on top of
    the BS-MU path loss. Path loss enters as an amplitude factor sqrt(eta(d)).
    """
    bs_pos = np.asarray(bs_pos, dtype=float)
    users = np.asarray(user_pos, dtype=float)
    if users.shape[1] == 2:
        users = np.hstack([users, np.zeros((users.shape[0], 1))])
    k_users, m = draw.direct.shape
    n = draw.ris_user.shape[1]

    d_bu = np.linalg.norm(users - bs_pos, axis=1)
    amp_direct = np.sqrt(path_loss(d_bu, pathloss, "bs_mu") * direct_blockage)
    direct = amp_direct[:, None] * draw.direct

    if n == 0:
        return LinkSet(direct, np.zeros((k_users, 0, m), dtype=complex), beta)

    ris_pos = np.asarray(ris_pos, dtype=float)
    d_br = distance(bs_pos, ris_pos)
    los = los_component(n, m, bs_pos, ris_pos)
    g = np.sqrt(path_loss(d_br, pathloss, "bs_ris")) * rician_mix(los, draw.bs_ris_scatter, k_factor)
    d_ru = np.linalg.norm(users - ris_pos, axis=1)
    r = np.sqrt(path_loss(d_ru, pathloss, "ris_mu"))[:, None] * draw.ris_user
    cascade = r[:, :, None] * g[None, :, :]
    return LinkSet(direct, cascade, beta)
