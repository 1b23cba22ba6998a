"""Echo state networks for per-user traffic demand prediction.

Reservoir weights are random and fixed; only the linear readout is fitted.
Two neuron kinds are available: leaky tanh units, and LSTM-style units whose
input, forget and output gates have fixed random parameters driven by the
same preactivation as the candidate.
"""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, IllPosedError, TraceParseError

NEURON_KINDS = ("tanh", "lstm")
TRACE_COLUMNS = ("user_id", "interval", "demand_bits")
_MODEL_MAGIC = b"ESN1"


@dataclass(frozen=True)
class EsnConfig:
    n_reservoir: int = 200
    leak: float = 0.5
    spectral_radius: float = 0.9
    input_scaling: float = 0.5
    ridge: float = 1e-6
    kind: str = "tanh"
    density: float = 0.1
    washout: int = 100
    n_inputs: int = 1

    def __post_init__(self):
        if self.n_reservoir < 1:
            raise ConfigError("reservoir needs at least one neuron")
        if not 0.0 < self.leak <= 1.0:
            raise ConfigError("leak rate must lie in (0, 1]")
        if not 0.0 < self.spectral_radius < 1.0:
            raise ConfigError("spectral radius target must lie in (0, 1)")
        if self.kind not in NEURON_KINDS:
            raise ConfigError(f"unknown neuron kind {self.kind!r}")
        if not 0.0 < self.density <= 1.0:
            raise ConfigError("density must lie in (0, 1]")
        if self.ridge < 0 or self.washout < 0 or self.input_scaling < 0:
            raise ConfigError("ridge, washout and input scaling must be non-negative")

    @property
    def n_features(self):
        return 1 + self.n_inputs + self.n_reservoir


@dataclass
class ReservoirState:
    x: np.ndarray
    c: np.ndarray = None  # cell state, lstm kind only

    def copy(self):
        return ReservoirState(self.x.copy(), None if self.c is None else self.c.copy())


@dataclass
class ReservoirWeights:
    w_in: np.ndarray  # N_x x (1 + N_u), first column multiplies the bias entry
    w: np.ndarray  # N_x x N_x
    gates: np.ndarray = None  # 3 x 2 x N_x: (input, forget, output) x (gain, offset)


def spectral_radius(w):
    if w.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(w))))


def init_reservoir(cfg, seed):
    """Random input weights, sparse recurrent matrix at the target spectral
    radius, and a zero initial state."""
    rng = np.random.default_rng(seed)
    n = cfg.n_reservoir
    w_in = rng.uniform(-1.0, 1.0, size=(n, 1 + cfg.n_inputs)) * cfg.input_scaling
    w = rng.uniform(-1.0, 1.0, size=(n, n)) * (rng.random((n, n)) < cfg.density)
    rho = spectral_radius(w)
    if rho == 0.0:
        # too sparse to carry any cycle; fall back to a scaled random diagonal
        w = np.diag(rng.uniform(-1.0, 1.0, size=n))
        w[0, 0] = 1.0
        rho = spectral_radius(w)
    w *= cfg.spectral_radius / rho
    gates = None
    state = ReservoirState(np.zeros(n))
    if cfg.kind == "lstm":
        gain = rng.uniform(0.5, 1.5, size=(3, n))
        # forget gates biased towards retention, input/output gates centred
        offset = np.stack([rng.uniform(-0.5, 0.5, n), rng.uniform(0.5, 1.5, n),
                           rng.uniform(-0.5, 0.5, n)])
        gates = np.stack([gain, offset], axis=1)
        state = ReservoirState(np.zeros(n), np.zeros(n))
    return ReservoirWeights(w_in, w, gates), state


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def update_reservoir(state, u, weights, cfg):
    """One leaky reservoir step driven by input ``u`` with a leading bias entry."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.size != weights.w_in.shape[1] - 1 or state.x.size != weights.w.shape[0]:
        raise DimensionError("input or state size does not match the reservoir weights")
    pre = weights.w_in[:, 0] + weights.w_in[:, 1:] @ u + weights.w @ state.x
    a = cfg.leak
    if cfg.kind == "tanh":
        return ReservoirState((1.0 - a) * state.x + a * np.tanh(pre))
    gain, offset = weights.gates[:, 0], weights.gates[:, 1]
    i_g, f_g, o_g = _sigmoid(gain * pre + offset)
    c = f_g * state.c + i_g * np.tanh(pre)
    h = o_g * np.tanh(c)
    return ReservoirState((1.0 - a) * state.x + a * h, c)


def run_reservoir(weights, cfg, inputs, state=None):
    """Drive the reservoir over a sequence; returns (states T x N_x, final state)."""
    inputs = np.asarray(inputs, dtype=float).reshape(len(inputs), -1)
    if state is None:
        state = ReservoirState(np.zeros(cfg.n_reservoir),
                               np.zeros(cfg.n_reservoir) if cfg.kind == "lstm" else None)
    xs = np.empty((len(inputs), cfg.n_reservoir))
    for t, u in enumerate(inputs):
        state = update_reservoir(state, u, weights, cfg)
        xs[t] = state.x
    return xs, state


def design_matrix(inputs, states):
    """Rows ``[1, u(n), x(n)]`` matching the readout layout."""
    inputs = np.asarray(inputs, dtype=float).reshape(len(states), -1)
    return np.hstack([np.ones((len(states), 1)), inputs, states])


def train_readout(features, targets, ridge):
    """Ridge solution ``W_out`` (outputs x features) of ``Y ~ X W_out^T``."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    y2 = y.reshape(len(x), -1)
    rows, cols = x.shape
    if ridge == 0 and rows < cols:
        raise IllPosedError(f"{rows} training rows cannot determine {cols} readout weights "
                            "without regularization")
    if ridge > 0:
        x = np.vstack([x, np.sqrt(ridge) * np.eye(cols)])
        y2 = np.vstack([y2, np.zeros((cols, y2.shape[1]))])
    sol, *_ = np.linalg.lstsq(x, y2, rcond=None)
    return sol.T


def nrmse(pred, true):
    """Root-mean-square error normalised by the standard deviation of ``true``."""
    pred = np.asarray(pred, dtype=float)
    true = np.asarray(true, dtype=float)
    sd = np.std(true)
    err = np.sqrt(np.mean((pred - true) ** 2))
    return float(err / sd) if sd > 0 else float(err)


@dataclass
class EsnModel:
    """Reservoir plus readout for one scalar demand series.

    Inputs are standardised with the training mean and deviation; predictions
    are returned in the original units and clamped at zero.
    """

    cfg: EsnConfig
    weights: ReservoirWeights
    w_out: np.ndarray = None
    mean: float = 0.0
    scale: float = 1.0

    @classmethod
    def create(cls, cfg, seed):
        weights, _ = init_reservoir(cfg, seed)
        return cls(cfg, weights)

    @property
    def trained(self):
        return self.w_out is not None

    def _norm(self, series):
        return (np.asarray(series, dtype=float) - self.mean) / self.scale

    def fit(self, series):
        """Fit the one-step-ahead readout on a training series."""
        series = np.asarray(series, dtype=float)
        if series.size < self.cfg.washout + 2:
            raise IllPosedError("series shorter than the washout plus one target")
        self.mean = float(np.mean(series))
        sd = float(np.std(series))
        self.scale = sd if sd > 0 else 1.0
        u = self._norm(series)
        xs, _ = run_reservoir(self.weights, self.cfg, u[:-1])
        w = self.cfg.washout
        self.w_out = train_readout(design_matrix(u[w:-1], xs[w:]), u[w + 1:], self.cfg.ridge)
        return self

    def _readout(self, u, x):
        return float(self.w_out[0] @ np.concatenate([[1.0], np.atleast_1d(u), x]))

    def one_step(self, series):
        """Teacher-forced predictions of ``series[n + 1]`` for every ``n``."""
        if not self.trained:
            raise IllPosedError("model has no trained readout")
        u = self._norm(series)
        xs, _ = run_reservoir(self.weights, self.cfg, u)
        y = design_matrix(u, xs) @ self.w_out[0]
        return np.maximum(y * self.scale + self.mean, 0.0)

    def predict(self, series, horizon):
        """Warm the reservoir on ``series`` then roll ``horizon`` predictions forward,
        feeding each prediction back as the next input."""
        if not self.trained:
            raise IllPosedError("model has no trained readout")
        if len(series) < self.cfg.washout:
            raise IllPosedError(f"need at least {self.cfg.washout} warm-up samples")
        u = self._norm(series)
        xs, state = run_reservoir(self.weights, self.cfg, u)
        out = np.empty(horizon)
        last_u, x = u[-1], xs[-1]
        for h in range(horizon):
            nxt = self._readout(last_u, x)
            out[h] = max(nxt * self.scale + self.mean, 0.0)
            last_u = (out[h] - self.mean) / self.scale
            state = update_reservoir(state, last_u, self.weights, self.cfg)
            x = state.x
        return out


def one_step_nrmse(series, cfg, seed, train_frac=0.8):
    """Fit on the leading ``train_frac`` of ``series``; NRMSE of one-step predictions after it."""
    series = np.asarray(series, dtype=float)
    split = int(len(series) * train_frac)
    if not 1 < split < len(series):
        raise ValueError("series too short for the requested split")
    model = EsnModel.create(cfg, seed=seed).fit(series[:split])
    pred = model.one_step(series[:-1])[split - 1:]
    return nrmse(pred, series[split:]), model


def predict(model, trace, horizon):
    return model.predict(trace, horizon)


def save_model(path, model):
    """Binary layout: magic, kind byte, N_x, N_u, then float64 mean, scale,
    W_in, W, W_out and (lstm only) the gate block, all row-major."""
    if not model.trained:
        raise IllPosedError("refusing to save an untrained model")
    cfg = model.cfg
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<BII", NEURON_KINDS.index(cfg.kind), cfg.n_reservoir, cfg.n_inputs))
        fh.write(struct.pack("<ddddd", cfg.leak, cfg.spectral_radius, cfg.input_scaling,
                             model.mean, model.scale))
        blocks = [model.weights.w_in, model.weights.w, model.w_out]
        if cfg.kind == "lstm":
            blocks.append(model.weights.gates)
        for b in blocks:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MODEL_MAGIC:
        raise ValueError(f"{path}: not an echo state network file")
    kind_i, n, nu = struct.unpack_from("<BII", data, 4)
    off = 4 + struct.calcsize("<BII")
    leak, rho, scaling, mean, scale = struct.unpack_from("<ddddd", data, off)
    off += 40
    cfg = EsnConfig(n_reservoir=n, n_inputs=nu, kind=NEURON_KINDS[kind_i], leak=leak,
                    spectral_radius=rho, input_scaling=scaling)

    def take(shape):
        nonlocal off
        count = int(np.prod(shape))
        a = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += 8 * count
        return a

    w_in = take((n, 1 + nu))
    w = take((n, n))
    w_out = take((1, cfg.n_features))
    gates = take((3, 2, n)) if cfg.kind == "lstm" else None
    if off != len(data):
        raise ValueError(f"{path}: file size does not match its header")
    return EsnModel(cfg, ReservoirWeights(w_in, w, gates), w_out, mean, scale)


# -- traces -------------------------------------------------------------


@dataclass
class TrafficTrace:
    """Demand in bits per interval; ``demand`` is users x intervals."""

    intervals: np.ndarray
    demand: np.ndarray
    interval_s: float = 3600.0
    user_ids: list = field(default=None)

    def __post_init__(self):
        self.intervals = np.asarray(self.intervals, dtype=int)
        self.demand = np.atleast_2d(np.asarray(self.demand, dtype=float))
        if self.user_ids is None:
            self.user_ids = list(range(self.demand.shape[0]))
        if self.demand.shape != (len(self.user_ids), self.intervals.size):
            raise DimensionError("demand must be users x intervals")
        if np.any(np.diff(self.intervals) <= 0):
            raise ValueError("interval indices must be strictly increasing")
        if np.any(self.demand < 0) or not np.all(np.isfinite(self.demand)):
            raise ValueError("demands must be finite and non-negative")

    def series(self, user=0):
        return self.demand[self.user_ids.index(user)]

    def __eq__(self, other):
        return (isinstance(other, TrafficTrace) and self.user_ids == other.user_ids
                and np.array_equal(self.intervals, other.intervals)
                and np.array_equal(self.demand, other.demand))


def generate_trace(kind, length, seed, n_users=1, base_bits=1e9, noise_sigma=0.05,
                   spike_rate=0.02, spike_scale=1.0, interval_s=3600.0):
    """Synthetic hourly demand: daily and weekly sinusoids with lognormal noise;
    ``bursty`` adds Poisson-distributed spikes."""
    if kind not in ("diurnal", "bursty"):
        raise ConfigError(f"unknown trace kind {kind!r}")
    if length < 1:
        raise ConfigError("trace length must be >= 1")
    rng = np.random.default_rng(seed)
    n = np.arange(length)
    rows = []
    for _ in range(n_users):
        ph_d, ph_w = rng.uniform(0, 2 * np.pi, size=2)
        level = base_bits * rng.uniform(0.5, 1.5)
        shape = 1.0 + 0.5 * np.sin(2 * np.pi * n / 24 + ph_d) + 0.2 * np.sin(2 * np.pi * n / 168 + ph_w)
        d = level * shape * rng.lognormal(0.0, noise_sigma, size=length)
        if kind == "bursty":
            d = d + level * spike_scale * rng.poisson(spike_rate, size=length)
        rows.append(d)
    return TrafficTrace(n, np.array(rows), interval_s)


def demand_to_rate(demand_bits, interval_s):
    """Rate floor in bits/s that serves a predicted per-interval demand."""
    return np.asarray(demand_bits, dtype=float) / interval_s


def save_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for uid, row in zip(trace.user_ids, trace.demand):
            for n, d in zip(trace.intervals, row):
                w.writerow([uid, int(n), repr(float(d))])


def load_trace(path, interval_s=3600.0):
    """Read a ``user_id, interval, demand_bits`` CSV; all users must share intervals."""
    per_user = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(TRACE_COLUMNS):
            raise TraceParseError(f"expected header {','.join(TRACE_COLUMNS)}", line=1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise TraceParseError(f"expected 3 fields, got {len(row)}", line=line)
            try:
                uid, n, d = int(row[0]), int(row[1]), float(row[2])
            except ValueError as exc:
                raise TraceParseError(str(exc), line=line) from None
            if not np.isfinite(d) or d < 0:
                raise TraceParseError(f"demand must be finite and non-negative, got {row[2]}", line=line)
            per_user.setdefault(uid, []).append((n, d, line))
    if not per_user:
        raise TraceParseError("trace has no data rows", line=2)
    uids = sorted(per_user)
    ref = [n for n, _, _ in per_user[uids[0]]]
    demand = []
    for uid in uids:
        rows = per_user[uid]
        for (n0, _, _), (n1, _, line) in zip(rows, rows[1:]):
            if n1 <= n0:
                raise TraceParseError(f"interval {n1} for user {uid} is not increasing", line=line)
        if [n for n, _, _ in rows] != ref:
            raise TraceParseError(f"user {uid} intervals differ from user {uids[0]}", line=rows[0][2])
        demand.append([d for _, d, _ in rows])
    return TrafficTrace(np.array(ref), np.array(demand), interval_s, uids)
