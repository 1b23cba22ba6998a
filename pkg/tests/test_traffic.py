import dataclasses
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from risnoma.errors import ConfigError, IllPosedError, TraceParseError
from risnoma.traffic import (EsnConfig, EsnModel, ReservoirState, ReservoirWeights, TrafficTrace,
                             demand_to_rate, design_matrix, generate_trace, init_reservoir,
                             load_model, load_trace, nrmse, run_reservoir, save_model,
                             save_trace, spectral_radius, train_readout, update_reservoir)


def power_iteration_radius(w, iters=3000):
    """Spectral radius from the growth rate of repeated products."""
    v = np.random.default_rng(0).normal(size=w.shape[0])
    logs = []
    for _ in range(iters):
        v = w @ v
        nv = np.linalg.norm(v)
        logs.append(np.log(nv))
        v /= nv
    # average growth over the second half smooths complex-pair oscillation
    return float(np.exp(np.mean(logs[iters // 2:])))


@pytest.mark.parametrize("kind", ["tanh", "lstm"])
def test_init_reservoir_radius_and_seed(kind):
    cfg = EsnConfig(n_reservoir=60, kind=kind)
    w1, s1 = init_reservoir(cfg, 4)
    w2, _ = init_reservoir(cfg, 4)
    assert spectral_radius(w1.w) == pytest.approx(0.9, abs=1e-6)
    assert power_iteration_radius(w1.w) == pytest.approx(0.9, rel=0.02)
    assert np.array_equal(w1.w, w2.w) and np.array_equal(w1.w_in, w2.w_in)
    assert np.all(np.abs(w1.w_in) <= cfg.input_scaling)
    assert w1.w_in.shape == (60, 2)
    assert np.all(s1.x == 0)


def test_init_reservoir_density():
    w, _ = init_reservoir(EsnConfig(n_reservoir=300), 0)
    assert np.count_nonzero(w.w) / w.w.size == pytest.approx(0.1, abs=0.01)


def test_zero_input_scaling():
    w, _ = init_reservoir(EsnConfig(n_reservoir=10, input_scaling=0.0), 1)
    assert np.all(w.w_in == 0)


def test_config_validation():
    with pytest.raises(ConfigError):
        EsnConfig(leak=0.0)
    with pytest.raises(ConfigError):
        EsnConfig(spectral_radius=1.0)
    with pytest.raises(ConfigError):
        EsnConfig(n_reservoir=0)
    with pytest.raises(ConfigError):
        EsnConfig(kind="gru")


def test_update_examples():
    cfg = EsnConfig(n_reservoir=1, leak=1.0)
    zero = ReservoirWeights(np.zeros((1, 2)), np.zeros((1, 1)))
    assert update_reservoir(ReservoirState(np.array([0.3])), 0.0, zero, cfg).x[0] == 0.0
    one = ReservoirWeights(np.array([[1.0, 1.0]]), np.zeros((1, 1)))
    assert update_reservoir(ReservoirState(np.zeros(1)), 0.5, one, cfg).x[0] == pytest.approx(
        np.tanh(1.5))
    assert np.tanh(1.5) == pytest.approx(0.9051, abs=1e-4)


@pytest.mark.parametrize("kind", ["tanh", "lstm"])
def test_zero_leak_freezes_state(kind):
    # leak = 0 sits outside EsnConfig's range, so drive the update rule directly
    w, _ = init_reservoir(EsnConfig(n_reservoir=5, kind=kind), 0)
    x = np.linspace(-0.5, 0.5, 5)
    c = np.zeros(5) if kind == "lstm" else None
    out = update_reservoir(ReservoirState(x.copy(), c), 3.0, w, SimpleNamespace(leak=0.0, kind=kind))
    assert np.array_equal(out.x, x)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=50))
def test_tanh_state_bounded(inputs):
    cfg = EsnConfig(n_reservoir=20)
    w, _ = init_reservoir(cfg, 2)
    xs, _ = run_reservoir(w, cfg, np.array(inputs))
    assert np.all(np.abs(xs) <= 1.0)


@pytest.mark.parametrize("kind", ["tanh", "lstm"])
def test_echo_state_convergence(kind):
    cfg = EsnConfig(kind=kind)
    w, _ = init_reservoir(cfg, 5)
    rng = np.random.default_rng(1)
    u = rng.normal(size=500)
    states = []
    for _ in range(2):
        c = rng.uniform(-1, 1, cfg.n_reservoir) if kind == "lstm" else None
        _, s = run_reservoir(w, cfg, u, ReservoirState(rng.uniform(-1, 1, cfg.n_reservoir), c))
        states.append(s.x)
    assert np.linalg.norm(states[0] - states[1]) < 1e-6


def test_readout_recovers_selector():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(200, 10))
    w = train_readout(x, x[:, 3], 0.0)
    target = np.zeros(10)
    target[3] = 1.0
    assert np.max(np.abs(w[0] - target)) < 1e-6
    assert np.max(np.abs(train_readout(x, x[:, 3], 1e-12)[0] - target)) < 1e-6


def test_readout_shrinks_with_huge_ridge():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 5))
    assert np.max(np.abs(train_readout(x, rng.normal(size=50), 1e12))) < 1e-9


def test_readout_ill_posed():
    with pytest.raises(IllPosedError):
        train_readout(np.ones((3, 5)), np.ones(3), 0.0)


def test_readout_fits_sine_in_sample():
    cfg = EsnConfig(n_reservoir=50)
    w, _ = init_reservoir(cfg, 0)
    u = np.sin(2 * np.pi * np.arange(600) / 24)
    xs, _ = run_reservoir(w, cfg, u[:-1])
    feats = design_matrix(u[100:-1], xs[100:])
    wout = train_readout(feats, u[101:], cfg.ridge)
    assert nrmse(feats @ wout[0], u[101:]) < 0.05


def test_training_keeps_reservoir_weights():
    model = EsnModel.create(EsnConfig(n_reservoir=40, kind="lstm"), seed=1)
    before = [a.copy() for a in (model.weights.w_in, model.weights.w, model.weights.gates)]
    model.fit(generate_trace("diurnal", 400, seed=0).series())
    after = (model.weights.w_in, model.weights.w, model.weights.gates)
    assert all(np.array_equal(a, b) for a, b in zip(before, after))


def test_untrained_model_errors():
    model = EsnModel.create(EsnConfig(n_reservoir=10), seed=0)
    with pytest.raises(IllPosedError):
        model.predict(np.ones(200), 3)
    with pytest.raises(IllPosedError):
        model.one_step(np.ones(200))


def test_constant_trace_prediction():
    model = EsnModel.create(EsnConfig(n_reservoir=50), seed=0)
    series = np.full(400, 5e8)
    model.fit(series)
    out = model.predict(series, 24)
    assert np.allclose(out, 5e8, rtol=0.02)


def test_sinusoid_one_step():
    t = np.arange(24 * 30)
    series = 1e9 * (1.0 + 0.5 * np.sin(2 * np.pi * t / 24))
    split = 24 * 24
    for kind in ("tanh", "lstm"):
        model = EsnModel.create(EsnConfig(n_reservoir=100, kind=kind), seed=0).fit(series[:split])
        pred = model.one_step(series[:-1])[split - 1:]
        assert nrmse(pred, series[split:]) < 0.1


def test_predictions_non_negative():
    model = EsnModel.create(EsnConfig(n_reservoir=30), seed=0)
    series = generate_trace("bursty", 500, seed=2).series()
    model.fit(series)
    assert np.all(model.predict(series, 48) >= 0)


def test_model_round_trip(tmp_path):
    for kind in ("tanh", "lstm"):
        model = EsnModel.create(EsnConfig(n_reservoir=20, kind=kind), seed=3)
        series = generate_trace("diurnal", 300, seed=1).series()
        model.fit(series)
        path = tmp_path / f"{kind}.esn"
        save_model(path, model)
        back = load_model(path)
        assert np.array_equal(back.predict(series, 5), model.predict(series, 5))


def test_trace_generation_reproducible():
    assert generate_trace("diurnal", 200, seed=5, n_users=2) == generate_trace(
        "diurnal", 200, seed=5, n_users=2)
    assert generate_trace("diurnal", 200, seed=5) != generate_trace("diurnal", 200, seed=6)


def test_diurnal_autocorrelation_peaks_at_day():
    s = generate_trace("diurnal", 24 * 7 * 8, seed=0).series()
    s = s - s.mean()
    ac = np.array([np.dot(s[:-k], s[k:]) / (len(s) - k) for k in range(1, 48)])
    lag = int(np.argmax(ac[12:36])) + 13
    assert lag == 24


def test_bursty_adds_spikes():
    d = generate_trace("diurnal", 1000, seed=0).series()
    b = generate_trace("bursty", 1000, seed=0, spike_rate=0.05).series()
    assert np.sum(b > d * 1.3) > 10


def test_trace_round_trip(tmp_path):
    tr = generate_trace("bursty", 100, seed=1, n_users=3)
    path = tmp_path / "t.csv"
    save_trace(path, tr)
    assert path.read_text().splitlines()[0] == "user_id,interval,demand_bits"
    assert load_trace(path) == tr


@pytest.mark.parametrize("body,line", [
    ("user_id,interval,demand_bits\n0,0,1.0\n0,1,abc\n", 3),
    ("user_id,interval,demand_bits\n0,0,1.0\n0,1\n", 3),
    ("user_id,interval,demand_bits\n0,0,1.0\n0,1,-4\n", 3),
    ("user_id,interval,demand_bits\n0,5,1.0\n0,2,1.0\n", 3),
    ("id,n,d\n0,0,1\n", 1),
])
def test_trace_parse_errors(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(TraceParseError) as err:
        load_trace(path)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_trace_validation():
    with pytest.raises(ValueError):
        TrafficTrace([0, 0], [[1.0, 2.0]])
    with pytest.raises(ValueError):
        TrafficTrace([0, 1], [[1.0, -2.0]])
    with pytest.raises(ConfigError):
        generate_trace("weekly", 10, seed=0)


def test_demand_to_rate():
    assert demand_to_rate(3.6e9, 3600.0) == pytest.approx(1e6)


def test_config_replace_keeps_validation():
    with pytest.raises(ConfigError):
        dataclasses.replace(EsnConfig(), ridge=-1.0)


def test_one_step_nrmse_helper():
    from risnoma.traffic import one_step_nrmse
    s = generate_trace("diurnal", 24 * 7 * 2, seed=0).series()
    err, model = one_step_nrmse(s, EsnConfig(n_reservoir=50), seed=0)
    assert model.trained and 0 < err < 1
    with pytest.raises(ValueError):
        one_step_nrmse(s[:1], EsnConfig(), seed=0)


@pytest.mark.xfail(reason="the gated reservoir extrapolates a trend outside its training range "
                          "worse than tanh; see the decisions ledger", strict=False)
def test_lstm_not_worse_on_drifting_sinusoid():
    from risnoma.harness import TRAFFIC_ESN
    from risnoma.traffic import one_step_nrmse
    n = 24 * 7 * 4
    errs = {"tanh": [], "lstm": []}
    for s in range(10):
        rng = np.random.default_rng(s)
        t = np.arange(n)
        x = 10 + np.sin(2 * np.pi * t / 24 + rng.uniform(0, 2 * np.pi)) + t / n \
            + 0.05 * rng.normal(size=n)
        for kind in errs:
            cfg = dataclasses.replace(TRAFFIC_ESN, kind=kind)
            errs[kind].append(one_step_nrmse(x, cfg, seed=s)[0])
    assert np.mean(errs["lstm"]) <= np.mean(errs["tanh"])
