"""Experiment orchestration: sweeps, baselines, training runs and CSV output.

Every (variant, grid value, seed) cell is computed independently from seeds
alone, so cells can run in a process pool and the merged table is identical
to a serial run. Within one seed, all variants and grid points share the same
user drop and fading realizations.
"""

import csv
import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import SmallScaleDraw
from .control import safe_static_link
from .env import (RisNomaEnv, SceneConfig, draw_users, nearest_facade_point,
                  random_facade_point)
from .errors import ConfigError
from .nn import forward
from .noma import form_clusters
from .rl import AgentConfig, train
from .traffic import EsnConfig, EsnModel, demand_to_rate, generate_trace, nrmse
from .units import dbm_to_watt

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("variant", "grid_value", "seed", "mean_ee", "mean_mos", "mean_power")
SUMMARY_COLUMNS = ("variant", "grid_value", "n_seeds", "mean_ee", "mean_mos", "mean_power")
SWEEPS = ("transmit_power", "n_elements", "none")

# variants evaluated with the model-based controller: name -> (scheme, placement, fixed order)
STATIC_VARIANTS = {
    "noma_ph": ("ph", "barycenter", False),
    "fixed_decoding": ("ph", "barycenter", True),
    "zf_mode": ("zf_equal", "barycenter", False),
    "zf_tuned": ("zf", "barycenter", False),
    "oma": ("oma", "barycenter", False),
    "no_ris": ("ph", "none", False),
    "barycenter_deploy": ("ph", "barycenter", False),
    "random_deploy": ("ph", "random", False),
}
TRAINING_VARIANTS = ("d3qn", "ddqn", "dqn", "q_table", "random")
TRAFFIC_VARIANTS = ("esn_tanh", "esn_lstm")
LEARNED_VARIANT = "learned_deploy"
SELECTION_DRAWS = 4  # per evaluation realization, for scoring learned deployments
ALL_VARIANTS = tuple(STATIC_VARIANTS) + TRAINING_VARIANTS + TRAFFIC_VARIANTS + (LEARNED_VARIANT,)


@dataclass(frozen=True)
class ExperimentSpec:
    """One table of results.

    ``grid`` holds transmit powers in dBm for the ``transmit_power`` sweep and
    element counts for ``n_elements``; ``transmit_power`` (watts) is the fixed
    budget otherwise.
    """

    name: str
    scene: SceneConfig = SceneConfig()
    agent: AgentConfig = field(default_factory=AgentConfig)
    sweep: str = "none"
    grid: tuple = (0.0,)
    seeds: tuple = tuple(range(10))
    variants: tuple = ("noma_ph",)
    out_dir: str = "results"
    realizations: int = 10
    transmit_power: float = dbm_to_watt(20.0)
    episodes: int = 400
    steps_per_episode: int = 60
    tail_episodes: int = 100
    workers: int = 1
    esn: EsnConfig = EsnConfig()

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("experiment needs at least one seed")
        if self.sweep not in SWEEPS:
            raise ConfigError(f"unknown sweep {self.sweep!r}; expected one of {SWEEPS}")
        if list(self.grid) != sorted(self.grid) or not self.grid:
            raise ConfigError("grid must be non-empty and sorted ascending")
        for v in self.variants:
            if v not in ALL_VARIANTS:
                raise ConfigError(f"unknown variant {v!r}")
        if self.realizations < 1:
            raise ConfigError("need at least one channel realization")


@dataclass
class ResultRow:
    variant: str
    grid_value: float
    seed: int
    mean_ee: float
    mean_mos: float
    mean_power: float

    def cells(self):
        return [self.variant, f"{self.grid_value:g}", self.seed, f"{self.mean_ee:.12g}",
                f"{self.mean_mos:.12g}", f"{self.mean_power:.12g}"]


# -- per-cell evaluation -------------------------------------------------


def _cell_scene(spec, value):
    if spec.sweep == "n_elements":
        return dataclasses.replace(spec.scene, n_elements=int(value))
    return spec.scene


def _cell_power(spec, value):
    return dbm_to_watt(value) if spec.sweep == "transmit_power" else spec.transmit_power


def _max_elements(spec):
    if spec.sweep == "n_elements":
        return int(max(spec.grid))
    return spec.scene.n_elements


def seed_draws(spec, seed):
    """Users and per-realization fading shared by every variant of one seed.

    Fading is drawn for the largest element count of the sweep and truncated,
    so element sweeps compare nested surfaces.
    """
    s = spec.scene
    rng = np.random.default_rng([seed, 1])
    users = draw_users(s, rng)
    draws = [SmallScaleDraw.draw(s.n_users, s.n_antennas, _max_elements(spec), rng)
             for _ in range(spec.realizations)]
    return users, draws


def _placement(kind, scene, users, seed):
    if kind == "barycenter":
        return nearest_facade_point(scene.facades, users.mean(axis=0))
    if kind == "random":
        return random_facade_point(scene.facades, np.random.default_rng([seed, 2]))
    return np.asarray(scene.bs_pos, dtype=float)  # unused without elements


def static_samples(spec, scene, users, draws, pos, budget, scheme, seed, fixed_order=False,
                   n_elements=None, floors=None):
    """Per-realization ``(ee, sum_mos, total_power)``; NaN rows for singular geometry."""
    n = scene.n_elements if n_elements is None else n_elements
    if floors is not None:
        scene = dataclasses.replace(scene, rate_floor=tuple(floors))
    out = np.full((len(draws), 3), np.nan)
    for r, draw in enumerate(draws):
        d = draw.truncated(n)
        plan = form_clusters(np.sum(np.abs(d.direct) ** 2, axis=1))
        rng = np.random.default_rng([seed, 3, r])
        res = safe_static_link(dataclasses.replace(scene, n_elements=n), users, d, pos, plan,
                               budget, rng, scheme=scheme, fixed_order=fixed_order)
        if res is None:
            log.warning("seed %d realization %d: singular geometry, skipped", seed, r)
            continue
        out[r] = res.ee, res.sum_mos, res.total_power
    return out


def evaluate_static(spec, scene, users, draws, pos, budget, scheme, seed, fixed_order=False,
                    n_elements=None, floors=None):
    """Average EE, sum MOS and total power over the seed's realizations."""
    vals = static_samples(spec, scene, users, draws, pos, budget, scheme, seed, fixed_order,
                          n_elements, floors)
    vals = vals[~np.isnan(vals[:, 0])]
    if not len(vals):
        return float("nan"), float("nan"), float("nan")
    return tuple(float(v) for v in np.mean(vals, axis=0))


def _static_cell(spec, variant, value, seed):
    scheme, placement, fixed = STATIC_VARIANTS[variant]
    scene = _cell_scene(spec, value)
    users, draws = seed_draws(spec, seed)
    n = 0 if placement == "none" else scene.n_elements
    scene = dataclasses.replace(scene, n_elements=n)
    pos = _placement(placement, scene, users, seed)
    return evaluate_static(spec, scene, users, draws, pos, _cell_power(spec, value), scheme,
                           seed, fixed_order=fixed)


def _training_cell(spec, variant, value, seed):
    scene = _cell_scene(spec, value)
    env = RisNomaEnv(scene, seed=seed)
    cfg = dataclasses.replace(spec.agent, kind=variant)
    logs = os.path.join(spec.out_dir, "logs")
    os.makedirs(logs, exist_ok=True)
    _, tlog = train(env, cfg, spec.episodes, spec.steps_per_episode, seed=seed,
                    log_path=os.path.join(logs, f"{variant}_g{value:g}_s{seed}.csv"))
    tail = slice(max(0, len(tlog) - spec.tail_episodes), None)
    return tuple(float(np.mean(tlog.column(c)[tail])) for c in ("mean_ee", "mean_mos", "mean_power"))


def greedy_rollout(env, agent, steps, start=None):
    """Final RIS position of one greedy episode.

    A rejected action leaves the state unchanged, so a purely greedy policy
    would repeat it forever; the next-best action is tried instead.
    """
    env.reset(start)
    for _ in range(steps):
        q = forward(agent.online, env.observe())
        for a in np.argsort(-q, kind="stable"):
            if env.step(int(a)).accepted:
                break
    return env.state.ris_pos.copy()


def learned_position(spec, seed, users):
    """Deployment proposed by a D3QN agent trained on the seed's user drop.

    The trained policy is rolled out from random facade points and from the
    barycenter placement. Each end point is scored with the model-based
    controller on fading draws reserved for this selection (disjoint from the
    evaluation draws). The best end point replaces the barycenter only when
    its paired EE gain exceeds two standard errors; relocating on noise is
    worse than staying.
    """
    s = spec.scene
    env = RisNomaEnv(s, seed=seed, users=users)
    cfg = dataclasses.replace(spec.agent, kind="d3qn")
    agent, _ = train(env, cfg, spec.episodes, spec.steps_per_episode, seed=seed)
    home = _placement("barycenter", s, users, seed)
    candidates = [home]
    for start in [home] + [None] * spec.realizations:
        p = greedy_rollout(env, agent, spec.steps_per_episode, start)
        if not any(np.array_equal(p, c) for c in candidates):
            candidates.append(p)
    if len(candidates) == 1:
        return home
    rng = np.random.default_rng([seed, 6])
    draws = [SmallScaleDraw.draw(s.n_users, s.n_antennas, s.n_elements, rng)
             for _ in range(SELECTION_DRAWS * spec.realizations)]
    ee = np.array([static_samples(spec, s, users, draws, p, spec.transmit_power, "ph", seed)[:, 0]
                   for p in candidates])
    ok = ~np.any(np.isnan(ee), axis=0)
    gain = ee[1:, ok] - ee[0, ok]
    if gain.shape[1] < 2:
        return home
    mean = gain.mean(axis=1)
    best = int(np.argmax(mean))
    se = gain[best].std(ddof=1) / np.sqrt(gain.shape[1])
    return candidates[best + 1] if mean[best] > 2 * se else home


def _learned_cell(spec, variant, value, seed):
    users, draws = seed_draws(spec, seed)
    pos = learned_position(spec, seed, users)
    scene = _cell_scene(spec, value)
    return evaluate_static(spec, scene, users, draws, pos, _cell_power(spec, value), "ph", seed)


def traffic_floors(spec, seed, kind, train_len=24 * 7 * 4, horizon=24):
    """Per-user rate floors predicted one interval ahead, plus prediction NRMSE.

    Each user gets a diurnal trace; an ESN is fitted on the first
    ``train_len`` intervals and predicts the following ``horizon`` ones
    one step ahead. Returns ``(floors horizon x K, nrmse)``.
    """
    k = spec.scene.n_users
    trace = generate_trace("diurnal", train_len + horizon, seed=[seed, 4], n_users=k)
    cfg = dataclasses.replace(spec.esn, kind=kind)
    floors, errs = [], []
    for u in range(k):
        series = trace.demand[u]
        model = EsnModel.create(cfg, seed=[seed, 5, u]).fit(series[:train_len])
        pred = model.one_step(series[:-1])[train_len - 1:]
        truth = series[train_len:]
        errs.append(nrmse(pred, truth))
        floors.append(demand_to_rate(pred, trace.interval_s))
    return np.array(floors).T, float(np.mean(errs))


def _traffic_cell(spec, variant, value, seed):
    kind = variant.split("_", 1)[1]
    floors, _ = traffic_floors(spec, seed, kind)
    users, draws = seed_draws(spec, seed)
    scene = _cell_scene(spec, value)
    pos = _placement("barycenter", scene, users, seed)
    # a few representative intervals keep the cell cheap
    picks = floors[:: max(1, len(floors) // 4)]
    vals = [evaluate_static(spec, scene, users, draws, pos, _cell_power(spec, value), "ph", seed,
                            floors=np.maximum(f, 1.0)) for f in picks]
    return tuple(float(v) for v in np.nanmean(vals, axis=0))


def run_cell(spec, variant, value, seed):
    if variant in STATIC_VARIANTS:
        ee, q, p = _static_cell(spec, variant, value, seed)
    elif variant in TRAINING_VARIANTS:
        ee, q, p = _training_cell(spec, variant, value, seed)
    elif variant in TRAFFIC_VARIANTS:
        ee, q, p = _traffic_cell(spec, variant, value, seed)
    else:
        ee, q, p = _learned_cell(spec, variant, value, seed)
    return ResultRow(variant, float(value), int(seed), ee, q, p)


def _run_cell_args(args):
    return run_cell(*args)


# -- orchestration -------------------------------------------------------


def check_writable(out_dir):
    """Create ``out_dir`` and prove a file can be written there."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("ok")
        os.remove(probe)
    except OSError as exc:
        raise OSError(f"output directory {out_dir!r} is not writable: {exc}") from exc


def cells(spec):
    return [(spec, v, g, s) for v in spec.variants for g in spec.grid for s in spec.seeds]


def write_rows(path, rows, columns=RESULT_COLUMNS):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(r.cells() if hasattr(r, "cells") else r)


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise ValueError(f"{path}: expected columns {RESULT_COLUMNS}")
        return [ResultRow(r["variant"], float(r["grid_value"]), int(r["seed"]),
                          float(r["mean_ee"]), float(r["mean_mos"]), float(r["mean_power"]))
                for r in reader]


def summarize(rows):
    """Arithmetic mean over seeds for every (variant, grid value), first-seen order."""
    groups = {}
    for r in rows:
        groups.setdefault((r.variant, r.grid_value), []).append(r)
    out = []
    for (variant, g), rs in groups.items():
        out.append([variant, f"{g:g}", len(rs)]
                   + [f"{np.mean([getattr(r, c) for r in rs]):.12g}"
                      for c in ("mean_ee", "mean_mos", "mean_power")])
    return out


def run_experiment(spec):
    """Compute every cell, write ``results.csv`` and ``summary.csv``; return the rows."""
    check_writable(spec.out_dir)
    jobs = cells(spec)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_run_cell_args, jobs))
    else:
        rows = [run_cell(*j) for j in jobs]
    write_rows(os.path.join(spec.out_dir, "results.csv"), rows)
    write_rows(os.path.join(spec.out_dir, "summary.csv"), summarize(rows), SUMMARY_COLUMNS)
    if any(v in TRAFFIC_VARIANTS for v in spec.variants):
        pred = [[v, s, f"{traffic_floors(spec, s, v.split('_', 1)[1])[1]:.12g}"]
                for v in spec.variants if v in TRAFFIC_VARIANTS for s in spec.seeds]
        write_rows(os.path.join(spec.out_dir, "prediction.csv"), pred, ("variant", "seed", "nrmse"))
    return rows


# -- presets -------------------------------------------------------------

DESK_SCENE = SceneConfig()
TOY_SCENE = SceneConfig(n_antennas=2, n_elements=4, n_users=2)
TOY_AGENT = AgentConfig(reward_scale=100.0)
# a stronger ridge keeps the readout from overfitting a few weeks of hourly data
TRAFFIC_ESN = EsnConfig(ridge=1e-2)


def preset(name, out_dir="results", seeds=tuple(range(10)), **overrides):
    """Named experiment matching one of the reproduced comparisons."""
    out = os.path.join(out_dir, name)
    if name == "fig3":
        spec = ExperimentSpec(name, TOY_SCENE, TOY_AGENT, "none", (0.0,), seeds,
                              ("d3qn", "dqn", "q_table", "random"), out, episodes=400,
                              steps_per_episode=30)
    elif name == "fig4":
        spec = ExperimentSpec(name, DESK_SCENE, TOY_AGENT, "transmit_power",
                              tuple(float(p) for p in range(0, 40, 5)), seeds,
                              ("noma_ph", "fixed_decoding", "zf_mode", "oma"), out)
    elif name == "fig5":
        spec = ExperimentSpec(name, DESK_SCENE, TOY_AGENT, "none", (0.0,), seeds,
                              (LEARNED_VARIANT, "barycenter_deploy", "random_deploy", "no_ris"),
                              out, episodes=200, steps_per_episode=60)
    elif name == "fig6":
        spec = ExperimentSpec(name, DESK_SCENE, TOY_AGENT, "n_elements",
                              (2.0, 4.0, 8.0, 12.0, 16.0, 24.0), seeds, ("noma_ph",), out,
                              transmit_power=dbm_to_watt(16.0))
    elif name == "fig7":
        spec = ExperimentSpec(name, DESK_SCENE, TOY_AGENT, "none", (0.0,), seeds,
                              TRAFFIC_VARIANTS, out, realizations=3, esn=TRAFFIC_ESN)
    else:
        raise ConfigError(f"unknown preset {name!r}; expected one of {PRESETS}")
    return dataclasses.replace(spec, **overrides) if overrides else spec


PRESETS = ("fig3", "fig4", "fig5", "fig6", "fig7")
