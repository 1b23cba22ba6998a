"""RIS-NOMA decision process: state encoding, discrete actions and stepping.

One episode holds a single block-fading draw; path loss is recomputed each
time the RIS moves. Every step re-derives composite channels, the decoding
order, the precoder, rates, MOS and energy efficiency, and pays the change in
per-slot energy efficiency as reward.
"""

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .channel import PathLossParams, SmallScaleDraw, build_links, wrap_phase
from .errors import ConfigError, DegenerateGeometryError, SingularMatrixError
from .metrics import MosParams, PowerModel, slot_energy_efficiency, step_reward
from .noma import decoding_order, evaluate_oma, evaluate_ph, evaluate_zf, form_clusters
from .units import db_to_linear, noise_power

PHASE_STEP = np.pi / 10
PHASE_DELTAS = (-PHASE_STEP, 0.0, PHASE_STEP)
MOVES = ((-1, 0, 0), (1, 0, 0), (0, 0, 0), (0, -1, 0), (0, 1, 0))
CONTROL_DELTAS = (-1, 0, 1)


@dataclass(frozen=True)
class Facade:
    """Axis-aligned region the RIS may occupy; ``z`` is the mounting height."""

    x0: float
    x1: float
    y0: float
    y1: float
    z: float = 10.0

    def contains(self, pos, tol=1e-9):
        x, y, z = pos
        return (self.x0 - tol <= x <= self.x1 + tol and self.y0 - tol <= y <= self.y1 + tol
                and abs(z - self.z) <= tol)

    def nearest(self, xy):
        """Closest facade point to a 2D location, snapped to the 1 m move grid."""
        x = float(np.clip(np.round(xy[0]), np.ceil(self.x0), np.floor(self.x1)))
        y = float(np.clip(np.round(xy[1]), np.ceil(self.y0), np.floor(self.y1)))
        return np.array([x, y, self.z])

    def grid_points(self):
        xs = np.arange(np.ceil(self.x0), np.floor(self.x1) + 1)
        ys = np.arange(np.ceil(self.y0), np.floor(self.y1) + 1)
        return np.array([(x, y, self.z) for x in xs for y in ys], dtype=float)


DEFAULT_FACADES = (
    Facade(-40.0, -15.0, 25.0, 30.0, 10.0),
    Facade(15.0, 40.0, 25.0, 30.0, 10.0),
    Facade(-40.0, -15.0, -30.0, -25.0, 10.0),
    Facade(15.0, 40.0, -30.0, -25.0, 10.0),
)


@dataclass(frozen=True)
class SceneConfig:
    side: float = 100.0
    bs_pos: tuple = (0.0, 0.0, 10.0)
    facades: tuple = DEFAULT_FACADES
    n_antennas: int = 4
    n_elements: int = 8
    n_users: int = 4
    bandwidth: float = 1e6
    n0_dbm_hz: float = -169.0
    pathloss: PathLossParams = PathLossParams()
    k_factor: float = 10.0  # linear, 10 dB
    direct_blockage_db: float = 45.0
    power: PowerModel = PowerModel()
    mode: str = "ph_noma"  # or "zf"
    decoding: str = "dynamic"  # or "fixed"
    target_step_db: float = 1.0
    rate_floor: float = 1e5  # bits/s; a tuple gives per-user floors
    mos_r_min: float = 1e5
    mos_r_max: float = 1e7
    q_min: float = 1.0
    q_max: float = 4.5
    user_min_dist: float = 10.0
    zf_floor_power: float = 1e-4  # W per user
    redraw_users: bool = False
    penalize_sic: bool = False  # failed SIC leaves the co-cluster signal as interference

    def __post_init__(self):
        if self.n_users < 2 or self.n_users % 2:
            raise ConfigError("n_users must be even and >= 2")
        if self.n_elements < 0 or self.n_antennas < 1:
            raise ConfigError("need n_antennas >= 1 and n_elements >= 0")
        if self.mode not in ("ph_noma", "zf"):
            raise ConfigError(f"unknown precoding mode {self.mode!r}")
        if self.decoding not in ("dynamic", "fixed"):
            raise ConfigError(f"unknown decoding policy {self.decoding!r}")

    @property
    def n_clusters(self):
        return self.n_users // 2

    @property
    def half_side(self):
        return self.side / 2.0

    @property
    def noise(self):
        return noise_power(self.bandwidth, self.n0_dbm_hz)

    @property
    def mos_params(self):
        return MosParams.calibrate(self.mos_r_min, self.mos_r_max, self.q_min, self.q_max)

    def floors(self):
        """Per-user lower bounds on the controlled quantity (SINR target or watts)."""
        if self.mode == "zf":
            return np.full(self.n_users, self.zf_floor_power)
        r = np.broadcast_to(np.asarray(self.rate_floor, dtype=float), (self.n_users,))
        return 2.0 ** (r / self.bandwidth) - 1.0

    @property
    def control_factor(self):
        return db_to_linear(self.target_step_db)


class Action(NamedTuple):
    kind: str  # "phase", "move" or "control"
    target: int  # element or user index; move index for "move"
    delta: object


def enumerate_actions(n_elements, n_users):
    """Ordered elementary actions: 3N phase deltas, 5 moves, 3K control deltas."""
    acts = [Action("phase", n, d) for n in range(n_elements) for d in PHASE_DELTAS]
    acts += [Action("move", i, m) for i, m in enumerate(MOVES)]
    acts += [Action("control", k, d) for k in range(n_users) for d in CONTROL_DELTAS]
    return acts


def n_actions(n_elements, n_users):
    return 3 * n_elements + 3 * n_users + 5


def state_size(n_elements, n_users):
    return n_elements + 2 * n_users + 3


@dataclass
class EnvState:
    theta: np.ndarray
    ris_pos: np.ndarray
    user_pos: np.ndarray  # K x 2
    controls: np.ndarray  # SINR targets (ph_noma) or watts (zf)
    user_power: np.ndarray  # realized radiated watts per user

    def copy(self):
        return EnvState(self.theta.copy(), self.ris_pos.copy(), self.user_pos.copy(),
                        self.controls.copy(), self.user_power.copy())


def encode_state(state, scene):
    """Flat real vector of length N + 2K + 3.

    Layout: phases mapped by ``theta / pi - 1``, the RIS position, one
    horizontal RIS-to-user distance per user (lengths scaled by the region
    half-side) and the realized user powers over ``P_max``. Users enter
    through their distance to the surface so that the four state parts fit
    N + 2K + 3 entries.
    """
    h = scene.half_side
    dist = np.hypot(*(state.user_pos - state.ris_pos[:2]).T)
    return np.concatenate([
        state.theta / np.pi - 1.0,
        state.ris_pos / h,
        dist / h,
        state.user_power / scene.power.p_max,
    ])


def in_facades(pos, facades):
    return any(f.contains(pos) for f in facades)


def draw_users(scene, rng):
    h = scene.half_side
    bs = np.asarray(scene.bs_pos[:2], dtype=float)
    out = []
    while len(out) < scene.n_users:
        p = rng.uniform(-h, h, size=2)
        if np.linalg.norm(p - bs) >= scene.user_min_dist:
            out.append(p)
    return np.array(out)


def random_facade_point(facades, rng):
    f = facades[rng.integers(len(facades))]
    pts_x = np.arange(np.ceil(f.x0), np.floor(f.x1) + 1)
    pts_y = np.arange(np.ceil(f.y0), np.floor(f.y1) + 1)
    return np.array([rng.choice(pts_x), rng.choice(pts_y), f.z], dtype=float)


def nearest_facade_point(facades, xy):
    cands = [f.nearest(xy) for f in facades]
    d = [np.hypot(c[0] - xy[0], c[1] - xy[1]) for c in cands]
    return cands[int(np.argmin(d))]


@dataclass
class Evaluation:
    budget: object
    ee: float
    sum_mos: float
    total_power: float
    orders: list
    sic_failures: int


@dataclass
class StepResult:
    state: EnvState
    reward: float
    budget: object
    ee: float
    accepted: bool
    degraded: bool = False
    sum_mos: float = float("nan")
    total_power: float = float("nan")


@dataclass
class EnvStats:
    steps: int = 0
    rejected: int = 0
    degraded: int = 0
    sic_infeasible: int = 0

    @property
    def violations(self):
        return self.rejected + self.degraded + self.sic_infeasible


class RisNomaEnv:
    """Single-RIS NOMA downlink as a discrete-action MDP.

    ``fixed_ris`` freezes the position (deployment baselines) and makes every
    move a no-op. ``multiple_access="oma"`` evaluates time sharing instead of
    superposition (ZF controls only).
    """

    def __init__(self, scene, seed=0, users=None, fixed_ris=None, multiple_access="noma"):
        self.scene = scene
        self.rng = np.random.default_rng(seed)
        self.users = np.asarray(users, dtype=float) if users is not None else draw_users(scene, self.rng)
        self.fixed_ris = None if fixed_ris is None else np.asarray(fixed_ris, dtype=float)
        self.multiple_access = multiple_access
        if scene.n_elements > 0 and not scene.facades and self.fixed_ris is None:
            raise ConfigError("scene has RIS elements but no facade to mount them on")
        self.actions = enumerate_actions(scene.n_elements, scene.n_users)
        self.noise = scene.noise
        self.mos_params = scene.mos_params
        self.floors = scene.floors()
        self.stats = EnvStats()
        self.state = None
        self.ee = None
        self.draw = None
        self.plan = None
        self._links = None
        self._links_pos = None
        self._frozen_orders = None

    @property
    def n_actions(self):
        return len(self.actions)

    @property
    def state_size(self):
        return state_size(self.scene.n_elements, self.scene.n_users)

    # -- physical layer -------------------------------------------------

    def links_at(self, pos):
        if self._links_pos is None or not np.array_equal(pos, self._links_pos):
            s = self.scene
            self._links = build_links(s.bs_pos, self.users, pos, self.draw, s.pathloss,
                                      s.k_factor, db_to_linear(-s.direct_blockage_db))
            self._links_pos = np.array(pos, dtype=float)
        return self._links

    def rows(self, theta, pos):
        return self.links_at(pos).rows(theta)

    def _budget(self, rows, orders, controls, repair=False):
        s = self.scene
        if self.multiple_access == "oma":
            return evaluate_oma(rows, orders, controls, self.noise, s.bandwidth)
        if s.mode == "zf":
            budget = evaluate_zf(rows, orders, controls, self.noise, s.bandwidth, s.penalize_sic)
            return self._repair_sic(rows, budget, controls) if repair else budget
        return evaluate_ph(rows, orders, controls, self.noise, s.bandwidth,
                           repair=repair, penalize_sic=s.penalize_sic)

    def evaluate(self, theta, pos, controls, orders=None):
        """Link budget and per-slot EE; raises on singular/degenerate geometry."""
        rows = self.rows(theta, pos)
        if orders is None:
            orders = self._orders(rows)
        budget = self._budget(rows, orders, controls, repair=self.scene.decoding == "dynamic")
        ee, q, p = slot_energy_efficiency(budget.rate, budget.sum_power, self.scene.n_elements,
                                          self.mos_params, self.scene.power)
        fails = sum(not ok for ok in budget.sic_ok)
        return Evaluation(budget, ee, q, p, budget.orders, fails)

    def _orders(self, rows):
        if self.scene.decoding == "fixed" and self._frozen_orders is not None:
            return self._frozen_orders
        gains = np.sum(np.abs(rows) ** 2, axis=1)
        return decoding_order(self.plan, gains)

    def _repair_sic(self, rows, budget, controls):
        """Flip any ZF cluster whose SIC condition fails if the flip is feasible."""
        for l, ok in enumerate(budget.sic_ok):
            if ok:
                continue
            orders = list(budget.orders)
            a, b = orders[l]
            orders[l] = (b, a)
            try:
                trial = self._budget(rows, orders, controls)
            except (SingularMatrixError, DegenerateGeometryError):
                continue
            if trial.sic_ok[l]:
                budget = trial
        return budget

    # -- episode control ------------------------------------------------

    def reset(self, start=None):
        """New fading draw and initial state; ``start`` overrides the random RIS position."""
        s = self.scene
        if s.redraw_users:
            self.users = draw_users(s, self.rng)
        self.draw = SmallScaleDraw.draw(s.n_users, s.n_antennas, s.n_elements, self.rng)
        self._links_pos = None
        if self.fixed_ris is not None:
            pos = self.fixed_ris.copy()
        elif start is not None:
            pos = np.array(start, dtype=float)
            if not in_facades(pos, s.facades):
                raise ConfigError(f"start position {pos.tolist()} is not on a facade")
        elif s.facades:
            pos = random_facade_point(s.facades, self.rng)
        else:
            pos = np.array([0.0, 0.0, 0.0])
        theta = self.rng.uniform(0.0, 2 * np.pi, size=s.n_elements)
        controls = self.floors.copy()
        rows = self.rows(theta, pos)
        self.plan = form_clusters(np.sum(np.abs(rows) ** 2, axis=1))
        self._frozen_orders = None
        orders = decoding_order(self.plan, np.sum(np.abs(rows) ** 2, axis=1))
        ev = self.evaluate(theta, pos, controls, orders)
        if s.decoding == "fixed":
            self._frozen_orders = list(ev.orders)
        self.state = EnvState(theta, pos, self.users.copy(), controls, ev.budget.power.copy())
        self.ee = ev.ee
        self.last_eval = ev
        return self.state

    def apply_action(self, state, action_id):
        """Candidate (theta, pos, controls) after an action, or None if outside the facade."""
        act = self.actions[action_id]
        theta, pos, controls = state.theta, state.ris_pos, state.controls
        if act.kind == "phase":
            theta = theta.copy()
            theta[act.target] = wrap_phase(theta[act.target] + act.delta)
        elif act.kind == "move":
            if self.fixed_ris is None and act.delta != (0, 0, 0):
                cand = pos + np.asarray(act.delta, dtype=float)
                if not in_facades(cand, self.scene.facades):
                    return None
                pos = cand
        else:
            if act.delta != 0:
                controls = controls.copy()
                controls[act.target] *= self.scene.control_factor ** act.delta
                if controls[act.target] < self.floors[act.target] * (1 - 1e-12):
                    return None
        return theta, pos, controls

    def step(self, action_id):
        self.stats.steps += 1
        state = self.state
        cand = self.apply_action(state, action_id)
        if cand is None:
            self.stats.rejected += 1
            return self._unchanged()
        theta, pos, controls = cand
        try:
            ev = self.evaluate(theta, pos, controls)
        except (SingularMatrixError, DegenerateGeometryError):
            self.stats.degraded += 1
            return self._unchanged(degraded=True)
        p_now = float(np.sum(state.user_power))
        p_new = ev.budget.sum_power
        if p_new > self.scene.power.p_max and p_new > p_now:
            self.stats.rejected += 1
            return self._unchanged()
        self.stats.sic_infeasible += ev.sic_failures
        reward = step_reward(ev.ee, self.ee)
        self.state = EnvState(theta, pos, state.user_pos, controls, ev.budget.power.copy())
        self.ee = ev.ee
        self.last_eval = ev
        return StepResult(self.state, reward, ev.budget, ev.ee, True, False, ev.sum_mos,
                          ev.total_power)

    def _unchanged(self, degraded=False):
        ev = self.last_eval
        return StepResult(self.state, 0.0, ev.budget, self.ee, False, degraded, ev.sum_mos,
                          ev.total_power)

    def observe(self):
        return encode_state(self.state, self.scene)

    def state_key(self):
        """Hashable discretization for tabular agents: phase levels, grid
        position and control steps above the floor."""
        st = self.state
        levels = np.round(st.theta / PHASE_STEP).astype(int) % int(round(2 * np.pi / PHASE_STEP))
        steps = np.round(np.log(st.controls / self.floors) / np.log(self.scene.control_factor))
        return (tuple(levels), tuple(np.round(st.ris_pos).astype(int)), tuple(steps.astype(int)))


def scene_variant(scene, **changes):
    return replace(scene, **changes)


__all__ = [
    "Action", "EnvState", "EnvStats", "Facade", "RisNomaEnv", "SceneConfig", "StepResult",
    "enumerate_actions", "encode_state", "n_actions", "state_size", "DEFAULT_FACADES",
    "draw_users", "nearest_facade_point", "random_facade_point", "scene_variant",
]
