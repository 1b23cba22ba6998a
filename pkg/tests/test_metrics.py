import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from risnoma.errors import ConfigError
from risnoma.metrics import (MosParams, PowerModel, energy_efficiency, mos,
                             slot_energy_efficiency, step_reward, total_power)
from risnoma.units import (db_to_linear, dbm_to_watt, dbw_to_watt, noise_power, parse_quantity,
                           watt_to_dbm)

CAL = MosParams.calibrate(1e5, 1e7)


def test_mos_calibration():
    assert CAL.lam == pytest.approx(1.75)
    assert mos(1e5, CAL) == pytest.approx(1.0)
    assert mos(1e7, CAL) == pytest.approx(4.5)
    assert mos(1e6, CAL) == pytest.approx(2.75)
    assert mos(1e9, CAL) == 4.5
    assert mos(0.0, CAL) == 1.0
    assert mos(-5.0, CAL) == 1.0


@given(st.floats(1.0, 1e12), st.floats(1.0, 1e12))
def test_mos_monotone_and_bounded(r1, r2):
    q1, q2 = mos(r1, CAL), mos(r2, CAL)
    assert 1.0 <= q1 <= 4.5
    if r1 <= r2:
        assert q1 <= q2


def test_mos_rate_for_inverse():
    assert CAL.rate_for(2.75) == pytest.approx(1e6)


def test_mos_params_validation():
    with pytest.raises(ValueError):
        MosParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        MosParams(1.0, 1.0, 4.5, 1.0)


def test_power_model_table_values():
    pm = PowerModel()
    assert pm.p_mu == pytest.approx(0.01)
    assert pm.p_bs == pytest.approx(7.943, rel=1e-4)
    assert total_power(0.1, 6, 16, pm) == pytest.approx(12.103, abs=5e-4)
    assert total_power(0.0, 0, 0, pm) == pm.p_bs
    assert total_power(0.3, 4, 16, pm) - total_power(0.3, 4, 8, pm) == pytest.approx(8 * pm.p_n)


def test_energy_efficiency_examples():
    assert energy_efficiency(15.0, 12.103) == pytest.approx(1.2394, abs=1e-4)
    assert energy_efficiency(0.0, 3.0) == 0.0
    assert energy_efficiency(30.0, 12.103) == pytest.approx(2 * energy_efficiency(15.0, 12.103))
    with pytest.raises(ValueError):
        energy_efficiency(1.0, 0.0)


def test_step_reward_examples():
    assert step_reward(1.3, 1.2) == pytest.approx(0.1)
    assert step_reward(0.7, 0.7) == 0.0


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=200))
def test_reward_telescopes(ee):
    rewards = [step_reward(b, a) for a, b in zip(ee, ee[1:])]
    assert np.sum(rewards) == pytest.approx(ee[-1] - ee[0], abs=1e-9)


@given(st.floats(0.0, 5.0), st.floats(1e-3, 5.0), st.integers(0, 32), st.integers(1, 16))
def test_saturated_users_lose_efficiency(beam, extra, n, extra_n):
    pm = PowerModel()
    rates = np.full(4, 1e9)  # every user at the MOS ceiling
    base, q, _ = slot_energy_efficiency(rates, beam, n, CAL, pm)
    assert q == pytest.approx(4 * 4.5)
    assert slot_energy_efficiency(rates, beam + extra, n, CAL, pm)[0] < base
    assert slot_energy_efficiency(rates, beam, n + extra_n, CAL, pm)[0] < base


def test_unit_conversions():
    assert dbm_to_watt(20.0) == pytest.approx(0.1)
    assert dbw_to_watt(9.0) == pytest.approx(7.943, rel=1e-4)
    assert watt_to_dbm(1.0) == pytest.approx(30.0)
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert noise_power(1e6) == pytest.approx(1.2589e-14, rel=1e-4)


@pytest.mark.parametrize("text,value", [
    ("20dBm", 0.1), ("9 dBW", dbw_to_watt(9.0)), ("1 MHz", 1e6), ("0.25 W", 0.25),
    ("10 mW", 0.01), ("3.5", 3.5), ("1e-3", 1e-3), ("10 dB", 10.0),
])
def test_parse_quantity(text, value):
    assert parse_quantity(text) == pytest.approx(value)


@pytest.mark.parametrize("text", ["", "abc", "5 parsecs", "1..2 W"])
def test_parse_quantity_rejects(text):
    with pytest.raises(ConfigError):
        parse_quantity(text)
