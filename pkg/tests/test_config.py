import pytest

from risnoma.config import load_config, parse_config
from risnoma.errors import ConfigError
from risnoma.rl import EpsilonSchedule, FixedEpsilon

TEXT = """
[scene]
n_elements = 8
direct_blockage_db = 30 dB   # kept in decibels

[power]
p_bs = 39 dBm

[pathloss]
alpha_bs_mu = 3.0

[agent]
kind = dqn
hidden = 64, 32
epsilon_decay = 0.9, 0.1, 320

[experiment]
name = demo
sweep = transmit_power
grid = 0 dBm, 10 dBm
seeds = 0, 1
variants = noma_ph, oma
realizations = 3
transmit_power = 20 dBm
"""


def test_parse_sections():
    scene, agent, exp = parse_config(TEXT)
    assert scene.n_elements == 8
    assert scene.direct_blockage_db == 30.0
    assert scene.power.p_bs == pytest.approx(7.943, rel=1e-3)
    assert scene.pathloss.alpha_bs_mu == 3.0
    assert agent.kind == "dqn" and agent.hidden == (64, 32)
    assert agent.epsilon == EpsilonSchedule(0.9, 0.1, 320.0)
    assert exp["grid"] == (0.0, 10.0)
    assert exp["seeds"] == (0, 1)
    assert exp["variants"] == ("noma_ph", "oma")
    assert exp["realizations"] == 3
    assert exp["transmit_power"] == pytest.approx(0.1)


def test_fixed_epsilon():
    _, agent, _ = parse_config("[agent]\nepsilon = 0.2\n")
    assert agent.epsilon == FixedEpsilon(0.2)


def test_defaults_without_sections():
    scene, agent, exp = parse_config("")
    assert scene.n_elements > 0 and exp == {}


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1\n",
    "[scene]\nno_such_field = 1\n",
    "[scene]\nn_elements = many\n",
    "[scene\nn_elements = 2\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_config(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(TEXT)
    assert load_config(p)[0].n_elements == 8


@pytest.mark.parametrize("name", ["power_sweep.ini", "toy_lr007.ini"])
def test_shipped_configs_parse(name):
    import pathlib
    path = pathlib.Path(__file__).resolve().parents[1] / "configs" / name
    scene, agent, exp = load_config(path)
    assert exp["name"] and scene.n_users % 2 == 0
