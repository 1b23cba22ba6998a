"""MOS mapping, power dissipation, energy efficiency and the step reward."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .units import dbm_to_watt, dbw_to_watt

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MosParams:
    lam: float
    tau: float
    q_min: float = 1.0
    q_max: float = 4.5

    def __post_init__(self):
        if self.lam <= 0 or self.tau <= 0:
            raise ValueError("lambda and tau must be positive")
        if not self.q_min < self.q_max:
            raise ValueError("q_min must be below q_max")

    @classmethod
    def calibrate(cls, r_min, r_max, q_min=1.0, q_max=4.5):
        """Choose lambda, tau so that mos(r_min) = q_min and mos(r_max) = q_max."""
        if not 0 < r_min < r_max:
            raise ValueError("need 0 < r_min < r_max")
        lam = (q_max - q_min) / math.log10(r_max / r_min)
        tau = 10.0 ** (q_min / lam) / r_min
        return cls(lam, tau, q_min, q_max)

    def rate_for(self, q):
        """Rate at which the unclamped score equals ``q``."""
        return 10.0 ** (q / self.lam) / self.tau


def mos(rate, p):
    """Clamped ``lambda * log10(tau * rate)``; non-positive rates score ``q_min``."""
    rate = np.asarray(rate, dtype=float)
    if np.any(rate <= 0):
        log.debug("non-positive rate floored to q_min")
    with np.errstate(divide="ignore"):
        raw = p.lam * np.log10(np.where(rate > 0, p.tau * rate, 1.0))
    q = np.where(rate > 0, np.clip(raw, p.q_min, p.q_max), p.q_min)
    return float(q) if q.ndim == 0 else q


@dataclass(frozen=True)
class PowerModel:
    p_mu: float = dbm_to_watt(10.0)  # 10 dBm per user device
    p_bs: float = dbw_to_watt(9.0)  # 9 dBW BS hardware
    p_n: float = 0.25  # per varactor diode
    p_max: float = dbm_to_watt(20.0)  # BS transmit cap

    def __post_init__(self):
        if min(self.p_mu, self.p_bs, self.p_n, self.p_max) < 0:
            raise ValueError("power model entries must be non-negative")


def total_power(beam_power, n_users, n_elements, pm):
    """Transmit + user hardware + BS hardware + varactor power, in watts."""
    if beam_power < 0 or n_users < 0 or n_elements < 0:
        raise ValueError("power terms must be non-negative")
    return beam_power + n_users * pm.p_mu + pm.p_bs + n_elements * pm.p_n


def energy_efficiency(sum_mos, power):
    """Sum MOS per joule of one slot."""
    if power <= 0:
        raise ValueError("total power must be positive")
    return sum_mos / power


def step_reward(ee_now, ee_prev):
    return ee_now - ee_prev


def slot_energy_efficiency(rates, beam_power, n_elements, mos_params, pm):
    """Per-slot EE from per-user rates; also returns (sum_mos, total_power)."""
    q = np.sum(mos(np.asarray(rates, dtype=float), mos_params))
    p = total_power(beam_power, len(rates), n_elements, pm)
    return energy_efficiency(float(q), p), float(q), p
