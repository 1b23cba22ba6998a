"""INI-style experiment configuration.

Sections ``[scene]``, ``[power]``, ``[pathloss]``, ``[agent]`` and
``[experiment]`` hold flat ``key = value`` pairs. Defaults come from the
dataclasses; values may carry unit suffixes (``dBm``, ``dBW``, ``dB``,
``MHz``...) and are converted once here.
"""

import configparser
import dataclasses
import re

from .env import SceneConfig
from .errors import ConfigError
from .rl import AgentConfig, EpsilonSchedule, FixedEpsilon
from .units import parse_quantity

# fields that stay in decibels; a "dB"/"dBm" suffix is stripped, not converted
_DB_FIELDS = {"direct_blockage_db", "n0_dbm_hz", "target_step_db"}
_DB_UNIT = re.compile(r"(?i)\s*(dbm/hz|dbm|dbw|db)\s*$")


def _number(key, text):
    if key in _DB_FIELDS:
        return float(_DB_UNIT.sub("", text))
    return parse_quantity(text)


def _coerce(key, text, default):
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ConfigError(f"{key}: expected a boolean, got {text!r}")
        return low in ("true", "yes", "1")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if isinstance(default, float):
        return _number(key, text)
    if isinstance(default, tuple):
        return tuple(_coerce(key, t, default[0] if default else 0.0) for t in text.split(",") if t.strip())
    if isinstance(default, str):
        return text
    return _number(key, text)


def _apply(obj, section, items):
    fields = {f.name for f in dataclasses.fields(obj)}
    changes = {}
    for key, text in items:
        if key not in fields:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        changes[key] = _coerce(key, text, getattr(obj, key))
    return dataclasses.replace(obj, **changes)


def _parse_grid(text):
    return tuple(float(_DB_UNIT.sub("", t)) for t in text.split(",") if t.strip())


def parse_config(text, base_scene=None, base_agent=None):
    """Return ``(SceneConfig, AgentConfig, experiment dict)`` from config text."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    known = {"scene", "power", "pathloss", "agent", "experiment"}
    for s in cp.sections():
        if s not in known:
            raise ConfigError(f"unknown section [{s}]")
    scene = base_scene or SceneConfig()
    if cp.has_section("power"):
        scene = dataclasses.replace(scene, power=_apply(scene.power, "power", cp.items("power")))
    if cp.has_section("pathloss"):
        scene = dataclasses.replace(scene, pathloss=_apply(scene.pathloss, "pathloss",
                                                            cp.items("pathloss")))
    if cp.has_section("scene"):
        scene = _apply(scene, "scene", cp.items("scene"))

    agent = base_agent or AgentConfig()
    if cp.has_section("agent"):
        items = dict(cp.items("agent"))
        eps = items.pop("epsilon", None)
        decay = items.pop("epsilon_decay", None)
        hidden = items.pop("hidden", None)
        agent = _apply(agent, "agent", items.items())
        if hidden:
            agent = dataclasses.replace(agent, hidden=tuple(int(h) for h in hidden.split(",")))
        if eps is not None:
            agent = dataclasses.replace(agent, epsilon=FixedEpsilon(float(eps)))
        if decay is not None:
            a, b, c = (float(v) for v in decay.split(","))
            agent = dataclasses.replace(agent, epsilon=EpsilonSchedule(a, b, c))

    exp = {}
    if cp.has_section("experiment"):
        for key, text in cp.items("experiment"):
            if key == "grid":
                exp[key] = _parse_grid(text)
            elif key in ("seeds", "variants"):
                parts = [t.strip() for t in text.split(",") if t.strip()]
                exp[key] = tuple(int(p) for p in parts) if key == "seeds" else tuple(parts)
            elif key in ("realizations", "episodes", "steps_per_episode", "workers"):
                exp[key] = int(text)
            elif key == "transmit_power":
                exp[key] = parse_quantity(text)
            else:
                exp[key] = text.strip()
    return scene, agent, exp


def load_config(path, **kwargs):
    with open(path) as fh:
        return parse_config(fh.read(), **kwargs)
