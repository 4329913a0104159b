"""Seeded closed-loop trials, metric aggregation and the probability benchmark."""
from __future__ import annotations

import math
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .baselines import SamplerConfig, bernoulli, linear, oracle_sweep, random_sampling
from .belief import JointBelief, NoiseModel, WorldState, ekf_predict, ekf_update, step_truth
from .errors import ConfigError, EmptyInput
from .gaussian import Gaussian2
from .planners import (
    FOUR_ACTIONS,
    ActionSpace,
    PlanContext,
    gbs_plan,
    heading_set,
    leader_guidance,
    osmdp_plan,
)
from .series import DEFAULT_DELTA_F, Method, apse

KINDS = ("osmdp", "gbs", "bench")


@dataclass
class Scenario:
    kind: str
    robots: list  # initial positions, leader first
    anchors: list = field(default_factory=list)
    waypoints: list = field(default_factory=list)
    r_var_m2: float = 0.04
    q_var_m2: float = 0.01
    rho_m: float = 3.0
    horizon: int = 1
    weights: tuple = (9.0, 1.0)
    method: str = "apse"
    trials: int = 1
    base_seed: int = 0
    max_steps: int = 100
    waypoint_tol_m: float = 0.2
    initial_var_m2: float = 0.0
    leader_step_m: float = 0.5
    follower_step_m: float = 1.0
    follower_actions: str = "four"  # "four" or "headings8"
    random_dim: int = 10_000
    delta_f: float = DEFAULT_DELTA_F

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        Method(self.method)
        self.robots = [list(map(float, p)) for p in self.robots]
        self.anchors = [list(map(float, p)) for p in self.anchors]
        self.waypoints = [list(map(float, p)) for p in self.waypoints]
        self.weights = tuple(float(w) for w in self.weights)
        pts = self.robots + self.anchors + self.waypoints
        if not all(len(p) == 2 and all(math.isfinite(v) for v in p) for p in pts):
            raise ConfigError("positions must be finite 2-vectors")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.kind != "bench" and (not self.robots or not self.waypoints):
            raise ConfigError("planning scenarios need robots and waypoints")

    @property
    def noise(self) -> NoiseModel:
        return NoiseModel(self.r_var_m2 * np.eye(2), self.q_var_m2, self.rho_m)

    def actions(self) -> list[np.ndarray]:
        if self.follower_actions == "four":
            return [self.follower_step_m * np.asarray(a) for a in FOUR_ACTIONS]
        if self.follower_actions == "headings8":
            return heading_set(self.follower_step_m)
        raise ConfigError(f"unknown follower action set {self.follower_actions!r}")

    def with_method(self, method: str) -> "Scenario":
        return Scenario(**{**asdict(self), "method": Method(method).value})


def load_scenario(path: str | Path, **overrides) -> Scenario:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"scenario {path} is not a mapping")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(Scenario)}
    unknown = set(raw) - known - set(BenchConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        return Scenario(**{k: v for k, v in raw.items() if k in known})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class StepRecord:
    step: int
    truth: tuple  # leader true position
    estimate: tuple  # leader estimated position
    trace_leader: float
    trace_follower: float
    edges: int
    relay: bool


@dataclass
class TrialLog:
    seed: int
    method: str
    records: list = field(default_factory=list)
    distance: list = field(default_factory=list)  # per robot, true path length
    completed: bool = False

    @property
    def final_trace(self) -> float:
        return self.records[-1].trace_leader if self.records else math.nan


def trial_seed(base_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([base_seed, trial]).generate_state(1, np.uint64)[0])


def _streams(seed: int):
    motion, meas, plan = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.Generator(np.random.Philox(motion)),
        np.random.Generator(np.random.Philox(meas)),
        int(plan.generate_state(1, np.uint64)[0]),
    )


def _leader_plan(est, waypoints, wp_index, tol, u_max, horizon):
    """Guidance controls over the horizon from the current estimate."""
    pos = np.asarray(est, dtype=float).copy()
    k = wp_index
    out = []
    for _ in range(horizon):
        while k < len(waypoints) and np.hypot(*(pos - waypoints[k])) < tol:
            k += 1
        if k >= len(waypoints):
            u = np.zeros(2)
        else:
            u = leader_guidance(pos, waypoints[k], u_max)
        out.append(u)
        pos = pos + u
    return np.array(out)


def run_trial(s: Scenario, seed: int) -> TrialLog:
    """Closed loop: plan, move, sense, filter, log; one call per trial."""
    noise = s.noise
    n = len(s.robots)
    anchors = np.asarray(s.anchors, dtype=float).reshape(-1, 2)
    waypoints = [np.asarray(w, dtype=float) for w in s.waypoints]
    motion_rng, meas_rng, plan_seed = _streams(seed)
    world = WorldState(np.asarray(s.robots, dtype=float).reshape(-1), anchors)
    bel = JointBelief(world.robot_positions.copy(), s.initial_var_m2 * np.eye(2 * n))
    actions = s.actions()
    space = ActionSpace.shared(actions, n - 1, max_step=s.follower_step_m)
    log = TrialLog(seed, s.method, distance=[0.0] * n)
    wp = 0
    for step in range(s.max_steps):
        est = bel.mean[:2]
        while wp < len(waypoints) and np.hypot(*(est - waypoints[wp])) < s.waypoint_tol_m:
            wp += 1
        if wp >= len(waypoints):
            log.completed = True
            break
        ctx = PlanContext(
            noise,
            Method(s.method),
            s.delta_f,
            anchors,
            SamplerConfig(s.random_dim, plan_seed, step * 1_000_000),
        )
        lead = _leader_plan(est, waypoints, wp, s.waypoint_tol_m, s.leader_step_m, s.horizon)
        if s.kind == "osmdp":
            plan = osmdp_plan(bel, lead[0], space, noise, s.method, s.delta_f, ctx=ctx)
        else:
            plan = gbs_plan(bel, lead, actions, noise, s.method, s.delta_f, s.weights, ctx=ctx)
        controls = plan.chosen_controls[0]
        before = world.robot_positions.copy()
        world, obs = step_truth(world, controls, noise, motion_rng, meas_rng, step + 1)
        moved = (world.robot_positions - before).reshape(n, 2)
        log.distance = [d + float(np.hypot(*m)) for d, m in zip(log.distance, moved)]
        bel = ekf_update(ekf_predict(bel, controls, noise), obs, anchors, noise)
        edge_set = {(o.i, o.j) for o in obs}
        relay = n > 1 and len(anchors) > 0 and (0, 1) in edge_set and (1, n) in edge_set
        follower_traces = [bel.trace(i) for i in range(1, n)]
        log.records.append(
            StepRecord(
                step + 1,
                tuple(map(float, world.robot_positions[:2])),
                tuple(map(float, bel.mean[:2])),
                bel.trace(0),
                float(np.mean(follower_traces)) if follower_traces else 0.0,
                len(obs),
                bool(relay),
            )
        )
    else:
        est = bel.mean[:2]
        while wp < len(waypoints) and np.hypot(*(est - waypoints[wp])) < s.waypoint_tol_m:
            wp += 1
        log.completed = wp >= len(waypoints)
    return log


def _run_one(args):
    s, k = args
    return run_trial(s, trial_seed(s.base_seed, k))


def run_trials(s: Scenario, jobs: int = 1) -> list[TrialLog]:
    """All trials of a scenario, ordered by trial index."""
    work = [(s, k) for k in range(s.trials)]
    if jobs <= 1:
        return [_run_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, work))


@dataclass(frozen=True)
class MetricsReport:
    method: str
    trials: int
    mm_rmse: float
    mm_trace: float
    m_total_con: float
    m_total_con_std: float
    m_total_tra: float
    m_total_tra_std: float
    final_trace_mean: float
    final_trace_std: float


def _std(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def aggregate(logs: Sequence[TrialLog]) -> MetricsReport:
    logs = [g for g in logs if g.records]
    if not logs:
        raise EmptyInput("no trial records to aggregate")
    err = [np.mean([math.dist(r.truth, r.estimate) for r in g.records]) for g in logs]
    tr = [np.mean([r.trace_leader for r in g.records]) for g in logs]
    con = [sum(r.relay for r in g.records) for g in logs]
    tra = [g.distance[0] for g in logs]
    final = [g.final_trace for g in logs]
    return MetricsReport(
        logs[0].method,
        len(logs),
        float(np.mean(err)),
        float(np.mean(tr)),
        float(np.mean(con)),
        _std(con),
        float(np.mean(tra)),
        _std(tra),
        float(np.mean(final)),
        _std(final),
    )


@dataclass
class BenchConfig:
    trials: int = 200
    rho_step_m: float = 0.1
    rho_count: int = 60
    mean_a: tuple = (0.5, 1.0)
    mean_b: tuple = (2.0, 2.5)
    dims: tuple = (10, 100, 1_000, 10_000, 100_000, 1_000_000)
    oracle_dim: int = 10_000_000
    delta_f: float = DEFAULT_DELTA_F
    base_seed: int = 0
    methods: tuple = ("apse", "random")

    @property
    def rhos(self) -> np.ndarray:
        return self.rho_step_m * np.arange(1, self.rho_count + 1)

    @classmethod
    def from_scenario_file(cls, path, **overrides) -> "BenchConfig":
        raw = yaml.safe_load(Path(path).read_text()) or {}
        raw.update({k: v for k, v in overrides.items() if v is not None})
        known = set(cls.__dataclass_fields__)
        cfg = cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in raw.items() if k in known})
        if cfg.trials < 1:
            raise ConfigError("trials must be >= 1")
        return cfg


def random_spd(rng: np.random.Generator) -> np.ndarray:
    G = 0.7 * rng.standard_normal((2, 2))
    return G @ G.T + 0.1 * np.eye(2)


def bench_case(cfg: BenchConfig, trial: int) -> Gaussian2:
    """Relative displacement of two independent random beliefs for one trial."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.base_seed, trial, 0])))
    cov = random_spd(rng) + random_spd(rng)
    return Gaussian2(np.asarray(cfg.mean_a) - np.asarray(cfg.mean_b), cov)


def rmse(p, truth) -> float:
    """Root of the summed squared error over the sweep."""
    diff = np.asarray(p, dtype=float) - np.asarray(truth, dtype=float)
    return float(np.sqrt(np.sum(diff * diff)))


def _method_sweep(method: str, d: Gaussian2, rhos, cfg: BenchConfig, trial: int, dim: int | None):
    vals, times = [], []
    seed = trial_seed(cfg.base_seed, trial)
    for k, rho in enumerate(rhos):
        t0 = time.perf_counter()
        if method == "apse":
            v = apse(d, float(rho), cfg.delta_f).value
        elif method == "bernoulli":
            v = bernoulli(d, float(rho)).value
        elif method == "linear":
            v = linear(d, float(rho)).value
        else:
            v = random_sampling(d, float(rho), SamplerConfig(dim, seed, 1 + k + 1000 * len(str(dim)))).value
        times.append(time.perf_counter() - t0)
        vals.append(v)
    return np.array(vals), float(np.mean(times))


def method_labels(cfg: BenchConfig) -> list[tuple[str, int | None]]:
    out = []
    for m in cfg.methods:
        if m == "random":
            out += [(f"random-{d}", int(d)) for d in cfg.dims]
        else:
            out.append((Method(m).value, None))
    return out


@dataclass
class BenchResult:
    rmse: list  # (trial, label, rmse)
    runtime: list  # (trial, label, mean seconds per evaluation)


def cpp_benchmark(cfg: BenchConfig, log_fn=None) -> BenchResult:
    rhos = cfg.rhos
    res = BenchResult([], [])
    for trial in range(cfg.trials):
        d = bench_case(cfg, trial)
        truth = oracle_sweep(d, rhos, seed=trial_seed(cfg.base_seed, trial), stream=0, dim=cfg.oracle_dim)
        for label, dim in method_labels(cfg):
            base = "random" if dim else label
            vals, mean_t = _method_sweep(base, d, rhos, cfg, trial, dim)
            res.rmse.append((trial, label, rmse(vals, truth)))
            res.runtime.append((trial, label, mean_t))
        if log_fn:
            log_fn(trial)
    return res
