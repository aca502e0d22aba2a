"""Random instances, erasure-channel episodes and parameter sweeps."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .metrics import DeviceMetrics, initial_metrics, record_round
from .net_model import (
    ModelError,
    NetworkState,
    TransmissionPlan,
    apply_reception,
    bits,
    connectivity_index,
    hearing_sets,
    is_connected,
    is_instantly_decodable,
    link_erasure,
    progress_possible,
)
from .objectives import plan_objective
from .schedulers import DEFAULT_MAX_CLUSTER_SIZE, RoundPlanner, SchedulerKind

MIN_ERASURE, MAX_ERASURE = 0.01, 0.99
CONNECTIVITY_TOL = 0.02


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    num_devices: int = 60
    num_files: int = 30
    connectivity: float = 0.4
    mean_erasure: float = 0.1
    erasure_jitter: float = 0.05
    pmp_factor: float = 2.0
    schedulers: tuple[str, ...] = ("general", "collision_free", "single_transmitter", "pmp")
    max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE
    iterations: int = 200
    seed: int = 0
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = ()
    baseline_complete_overlay: bool = False

    def __post_init__(self):
        object.__setattr__(self, "schedulers", tuple(SchedulerKind(s).value for s in self.schedulers))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        self.check()

    def check(self):
        U = self.num_devices
        if U < 2 or self.num_files < 1:
            raise ValueError("need U >= 2 and F >= 1")
        if not 1 / U < self.connectivity <= 1:
            raise ValueError("connectivity index must lie in (1/U, 1]")
        if not 0 < self.mean_erasure < 1:
            raise ValueError("mean erasure must lie in (0, 1)")
        if self.mean_erasure * self.pmp_factor >= 1:
            raise ValueError("base-station erasure pmp_factor * E must stay below 1")
        if self.iterations < 1 or self.max_cluster_size < 1:
            raise ValueError("iterations and max_cluster_size must be >= 1")
        if self.sweep_param is not None and self.sweep_param not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.sweep_param!r}")

    @property
    def p_bs(self) -> float:
        return self.pmp_factor * self.mean_erasure

    def at(self, value: float) -> "ExperimentConfig":
        """Config with the swept parameter set to ``value``."""
        name = SWEEPABLE[self.sweep_param]
        if name in ("num_devices", "num_files"):
            value = int(value)
        return replace(self, **{name: value, "sweep_param": None, "sweep_values": ()})


SWEEPABLE = {
    "U": "num_devices",
    "F": "num_files",
    "C": "connectivity",
    "E": "mean_erasure",
    "num_devices": "num_devices",
    "num_files": "num_files",
    "connectivity": "connectivity",
    "mean_erasure": "mean_erasure",
}


# ---------------------------------------------------------------- instances

def _pair_index(U: int):
    iu, ju = np.triu_indices(U, k=1)
    return iu, ju


def min_connectivity(U: int) -> float:
    """Smallest index a connected graph on ``U`` devices can have (a tree plus diagonal)."""
    return (U + 2 * (U - 1)) / U**2


def generate_topology(U: int, C: float, rng: np.random.Generator, tries: int = 50) -> np.ndarray:
    """Connected symmetric unit-diagonal matrix with connectivity index close to ``C``."""
    if U == 1:
        return np.ones((1, 1), dtype=bool)
    edges = int(round((C * U * U - U) / 2))
    edges = min(max(edges, 0), U * (U - 1) // 2)
    if edges < U - 1:
        if min_connectivity(U) - C > CONNECTIVITY_TOL:
            raise HarnessError(f"C={C} is too small for a connected graph on {U} devices")
        edges = U - 1
    iu, ju = _pair_index(U)
    npairs = len(iu)
    conn = np.eye(U, dtype=bool)
    for _ in range(tries):
        pick = rng.choice(npairs, size=edges, replace=False)
        m = np.eye(U, dtype=bool)
        m[iu[pick], ju[pick]] = True
        m[ju[pick], iu[pick]] = True
        if is_connected(m):
            return m
    # random spanning tree, then uniform fill up to the edge budget
    order = rng.permutation(U)
    for k in range(1, U):
        a, b = order[k], order[rng.integers(k)]
        conn[a, b] = conn[b, a] = True
    free = np.flatnonzero(~conn[iu, ju])
    extra = edges - (U - 1)
    if extra > 0:
        pick = rng.choice(free, size=extra, replace=False)
        conn[iu[pick], ju[pick]] = True
        conn[ju[pick], iu[pick]] = True
    return conn


def draw_erasures(U: int, mean: float, jitter: float, rng: np.random.Generator) -> np.ndarray:
    eras = rng.uniform(mean - jitter, mean + jitter, size=(U, U))
    eras = np.clip(eras, MIN_ERASURE, MAX_ERASURE)
    np.fill_diagonal(eras, 0.0)
    return eras


def initialize_sides(connectivity: np.ndarray, erasures: np.ndarray, num_files: int,
                     rng: np.random.Generator) -> NetworkState:
    """Each device holds each file with probability one minus its expected erasure."""
    conn = np.asarray(connectivity, dtype=bool)
    U = conn.shape[0]
    eps = (erasures * conn).sum(axis=0) / conn.sum(axis=0)
    held = rng.random((U, num_files)) >= eps[:, None]
    for f in np.flatnonzero(~held.any(axis=0)):
        held[rng.integers(U), f] = True
    has = [frozenset(np.flatnonzero(row).tolist()) for row in held]
    return NetworkState(conn, erasures, has, num_files)


def generate_instance(cfg: ExperimentConfig, rng: np.random.Generator) -> NetworkState:
    conn = generate_topology(cfg.num_devices, cfg.connectivity, rng)
    eras = draw_erasures(cfg.num_devices, cfg.mean_erasure, cfg.erasure_jitter, rng)
    return initialize_sides(conn, eras, cfg.num_files, rng)


# ------------------------------------------------------------------ rounds

@dataclass(frozen=True)
class RoundRecord:
    round: int
    plan: TransmissionPlan
    fallback: bool = False
    weights: dict[str, float] | None = None


def run_round(state: NetworkState, metrics: Sequence[DeviceMetrics], plan: TransmissionPlan,
              rng: np.random.Generator) -> tuple[NetworkState, tuple[DeviceMetrics, ...]]:
    """Send ``plan`` once: draw erasures, update counters, deliver decodable files."""
    hs = hearing_sets(state, plan)
    combos = {e.transmitter: e.files for e in plan.entries}
    erased: dict[int, bool] = {}
    for u in sorted(hs.heard_from):
        a = hs.heard_from[u]
        erased[u] = bool(rng.random() < link_erasure(state, plan, a, u))
    new_metrics = record_round(metrics, state, plan, erased)
    new_state = state
    for u, lost in erased.items():
        files = combos[hs.heard_from[u]]
        if not lost and is_instantly_decodable(files, u, state):
            new_state = apply_reception(new_state, u, files)
    return new_state.with_has(new_state.has, advance=1), new_metrics


@dataclass
class EpisodeResult:
    completion_time: int
    metrics: tuple[DeviceMetrics, ...]
    rounds: list[RoundRecord] = field(default_factory=list)

    @property
    def fallback_rounds(self) -> int:
        return sum(r.fallback for r in self.rounds)


def check_identity(metrics: Sequence[DeviceMetrics]) -> None:
    for u, m in enumerate(metrics):
        if m.identity_gap() != 0:
            raise HarnessError(f"device {u}: completion {m.completion_round} != "
                               f"{m.initial_demand}+{m.decoding_delay}+{m.erasure_count}")


def _select(planner: RoundPlanner, kind: SchedulerKind, cfg_cluster: int, p_bs: float | None):
    if kind is SchedulerKind.COLLISION_FREE:
        return planner.collision_free()
    if kind is SchedulerKind.GENERAL:
        return planner.general(cfg_cluster)
    if kind is SchedulerKind.SINGLE_TRANSMITTER:
        return planner.single_transmitter()
    return planner.pmp(p_bs)


AUDITED = ("general", "collision_free", "single_transmitter")


def run_episode(state: NetworkState, kind: SchedulerKind | str, rng: np.random.Generator, *,
                max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE, p_bs: float | None = None,
                audit: bool = False, round_cap: int | None = None,
                keep_plans: bool = False) -> EpisodeResult:
    """Run ``kind`` until every device holds every file.

    With ``audit`` every round also scores the general, collision-free and
    single-transmitter plans for the same state and stores their objective.
    """
    kind = SchedulerKind(kind)
    if kind is SchedulerKind.PMP and p_bs is None:
        raise ValueError("pmp needs p_bs")
    cap = round_cap or 100 * (state.num_files + state.num_devices)
    metrics = initial_metrics(state)
    log: list[RoundRecord] = []
    while not state.done():
        if state.round >= cap:
            raise HarnessError(f"round cap {cap} exceeded")
        if kind is not SchedulerKind.PMP and not progress_possible(state):
            raise HarnessError("no device can serve any neighbour")
        planner = RoundPlanner(state, metrics)
        sel = _select(planner, kind, max_cluster_size, p_bs)
        weights = None
        if audit:
            weights = {}
            for name in AUDITED:
                other = sel if name == kind.value else _select(planner, SchedulerKind(name), max_cluster_size, p_bs)
                weights[name] = plan_objective(state, planner.view, other.plan)
        if not sel.plan.entries:
            raise HarnessError("scheduler returned an empty plan")
        log.append(RoundRecord(state.round, sel.plan if keep_plans else None, sel.fallback, weights))
        state, metrics = run_round(state, metrics, sel.plan, rng)
    check_identity(metrics)
    completion = max((m.completion_round for m in metrics), default=0)
    return EpisodeResult(completion, metrics, log)


# ------------------------------------------------------------------ sweeps

def episode_seed(master: int, point: int, iteration: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master, point, iteration])


@dataclass(frozen=True)
class EpisodeRow:
    sweep_param: str
    sweep_value: float
    scheduler: str
    iteration: int
    completion_time: int
    fallback_rounds: int
    audit_violations: int


def run_point(cfg: ExperimentConfig, point: int, iteration: int, sweep_param: str, sweep_value: float,
              audit: bool = False) -> list[EpisodeRow]:
    """All schedulers on one seeded instance (paired comparison)."""
    inst_seq, chan_seq = episode_seed(cfg.seed, point, iteration).spawn(2)
    state = generate_instance(cfg, np.random.default_rng(inst_seq))
    rows = []
    for name in cfg.schedulers:
        kind = SchedulerKind(name)
        ep_state = state
        if kind is SchedulerKind.SINGLE_TRANSMITTER and cfg.baseline_complete_overlay:
            ep_state = state.with_topology(np.ones_like(state.connectivity))
        res = run_episode(ep_state, kind, np.random.default_rng(chan_seq),
                          max_cluster_size=cfg.max_cluster_size, p_bs=cfg.p_bs, audit=audit)
        violations = sum(audit_violations(r.weights) for r in res.rounds if r.weights)
        rows.append(EpisodeRow(sweep_param, sweep_value, name, iteration, res.completion_time,
                               res.fallback_rounds, violations))
    return rows


def audit_violations(weights: dict[str, float], tol: float = 1e-9) -> int:
    """Count broken links of ``general >= collision_free >= single_transmitter``."""
    g, c, s = (weights[k] for k in AUDITED)
    bad = 0
    for hi, lo in ((g, c), (c, s)):
        if lo == -math.inf:
            continue
        if hi < lo - tol:
            bad += 1
    return bad


def _point_task(args):
    cfg, point, iteration, param, value, audit = args
    return run_point(cfg, point, iteration, param, value, audit)


def sweep_points(cfg: ExperimentConfig) -> list[tuple[str, float, ExperimentConfig]]:
    if cfg.sweep_param is None:
        return [("none", 0.0, cfg)]
    return [(cfg.sweep_param, v, cfg.at(v)) for v in cfg.sweep_values]


def run_sweep_episodes(cfg: ExperimentConfig, jobs: int = 1, audit: bool = False,
                       progress=None) -> list[EpisodeRow]:
    tasks = []
    for k, (param, value, sub) in enumerate(sweep_points(cfg)):
        for it in range(cfg.iterations):
            tasks.append((sub, k, it, param, value, audit))
    rows: list[EpisodeRow] = []
    if jobs > 1:
        from multiprocessing import Pool

        with Pool(jobs) as pool:
            for chunk in pool.imap_unordered(_point_task, tasks, chunksize=4):
                rows.extend(chunk)
                if progress:
                    progress(len(rows))
    else:
        for t in tasks:
            rows.extend(_point_task(t))
            if progress:
                progress(len(rows))
    order = {s: i for i, s in enumerate(cfg.schedulers)}
    rows.sort(key=lambda r: (r.sweep_value, order[r.scheduler], r.iteration))
    return rows


CSV_FIELDS = ["sweep_param", "sweep_value", "scheduler", "mean_completion", "stderr", "iterations", "seed"]
RAW_FIELDS = ["sweep_param", "sweep_value", "scheduler", "iteration", "completion_time",
              "fallback_rounds", "audit_violations"]


def summarize(cfg: ExperimentConfig, rows: Iterable[EpisodeRow]) -> list[dict]:
    groups: dict[tuple, list[int]] = {}
    for r in rows:
        groups.setdefault((r.sweep_param, r.sweep_value, r.scheduler), []).append(r.completion_time)
    order = {s: i for i, s in enumerate(cfg.schedulers)}
    out = []
    for (param, value, sched), vals in sorted(groups.items(), key=lambda kv: (kv[0][1], order[kv[0][2]])):
        arr = np.asarray(vals, dtype=float)
        se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        out.append({
            "sweep_param": param,
            "sweep_value": f"{value:g}",
            "scheduler": sched,
            "mean_completion": f"{arr.mean():.6f}",
            "stderr": f"{se:.6f}",
            "iterations": len(arr),
            "seed": cfg.seed,
        })
    return out


def to_csv(records: list[dict], fields: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(r)
    return buf.getvalue()


def raw_records(rows: Iterable[EpisodeRow]) -> list[dict]:
    return [{**r.__dict__, "sweep_value": f"{r.sweep_value:g}"} for r in rows]


def run_sweep(cfg: ExperimentConfig, jobs: int = 1, raw: bool = False) -> str:
    """CSV text: one row per (sweep value, scheduler), or one per episode with ``raw``."""
    rows = run_sweep_episodes(cfg, jobs=jobs)
    if raw:
        return to_csv(raw_records(rows), RAW_FIELDS)
    return to_csv(summarize(cfg, rows), CSV_FIELDS)


def topology_summary(state: NetworkState) -> str:
    return (f"U={state.num_devices} F={state.num_files} C={connectivity_index(state):.3f} "
            f"wanting={len(bits(state.wanting_mask))} demand={sum(len(w) for w in state.wants)}")


__all__ = [
    "ExperimentConfig", "EpisodeResult", "RoundRecord", "HarnessError", "ModelError",
    "generate_topology", "draw_erasures", "initialize_sides", "generate_instance",
    "run_round", "run_episode", "run_sweep", "run_sweep_episodes", "summarize",
]
