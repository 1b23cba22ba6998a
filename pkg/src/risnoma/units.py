"""Decibel conversions and unit-suffixed value parsing.

Everything inside the package works in linear watts / linear ratios; values
carrying a unit suffix are converted once, when a configuration is loaded.
"""

import math
import re

from .errors import ConfigError


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(x):
    return 10.0 * math.log10(x)


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def dbw_to_watt(dbw):
    return 10.0 ** (dbw / 10.0)


def watt_to_dbm(w):
    return 10.0 * math.log10(w) + 30.0


def noise_power(bandwidth_hz, density_dbm_hz=-169.0):
    """Thermal noise power in watts over ``bandwidth_hz``."""
    return dbm_to_watt(density_dbm_hz) * bandwidth_hz


_VALUE_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z/]*)\s*$")

_SCALE = {
    "": 1.0,
    "w": 1.0,
    "mw": 1e-3,
    "hz": 1.0,
    "khz": 1e3,
    "mhz": 1e6,
    "ghz": 1e9,
    "m": 1.0,
    "s": 1.0,
    "bps": 1.0,
    "kbps": 1e3,
    "mbps": 1e6,
}


def parse_quantity(text):
    """Parse ``"9 dBW"``, ``"10dBm"``, ``"-30 dB"``, ``"1 MHz"`` or a bare number.

    dB-family suffixes are converted to linear scale (watts for dBm/dBW).
    ``dBm/Hz`` is converted to W/Hz.
    """
    m = _VALUE_RE.match(str(text))
    if m is None:
        raise ConfigError(f"cannot parse quantity {text!r}")
    value = float(m.group(1))
    unit = m.group(2).lower()
    if unit == "db":
        return db_to_linear(value)
    if unit == "dbm":
        return dbm_to_watt(value)
    if unit == "dbw":
        return dbw_to_watt(value)
    if unit == "dbm/hz":
        return dbm_to_watt(value)
    if unit in _SCALE:
        return value * _SCALE[unit]
    raise ConfigError(f"unknown unit {m.group(2)!r} in {text!r}")
