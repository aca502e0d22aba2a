"""Exhaustive reference computations for tiny instances (tests and ``verify``)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .coop_graph import CoopBuilder
from .metrics import DeviceMetrics, RoundView, initial_metrics
from .net_model import NetworkState, Transmission, TransmissionPlan, bits, hearing_masks
from .objectives import delay_free_log_probability, keeps_critical_in_reach, plan_objective
from .schedulers import RoundPlanner


def subsets(items, nonempty=True):
    items = list(items)
    for k in range(1 if nonempty else 0, len(items) + 1):
        yield from combinations(items, k)


def collision_free_set(state: NetworkState, transmitters) -> bool:
    """No wanting device inside two of the zones."""
    wc = [state.coverage_mask[a] & state.wanting_mask for a in transmitters]
    return all(not wc[i] & wc[j] for i in range(len(wc)) for j in range(i + 1, len(wc)))


@dataclass(frozen=True)
class OracleResult:
    value: float
    plan: TransmissionPlan | None


def _best_per_transmitter(state, view, transmitters, score):
    """Maximize a per-transmitter-separable score over all nonempty combinations."""
    entries = []
    total = 0.0
    for a in transmitters:
        best_v, best_e = -math.inf, None
        for files in subsets(bits(state.has_mask[a])):
            e = Transmission(a, frozenset(files))
            v = score(a, e)
            if v > best_v:
                best_v, best_e = v, e
        if best_e is None:
            return -math.inf, None
        entries.append(best_e)
        total += best_v
    return total, TransmissionPlan(tuple(entries))


def exhaustive_optimum(state: NetworkState, metrics, objective: str = "log_probability",
                       collision_free: bool = False) -> OracleResult:
    """Maximum of ``objective`` over every (transmitter set, combinations) pair.

    ``objective`` is ``"log_probability"`` (log of the probability that no
    critical device incurs delay) or ``"critical_value"`` (served critical
    log-reliability). Both vanish to ``-inf`` off the feasible family, and
    both split over transmitters once the set is fixed, so combinations are
    optimized transmitter by transmitter.
    """
    view = metrics if isinstance(metrics, RoundView) else RoundView(state, metrics)
    crit = view.critical_mask
    score_fn = {"log_probability": delay_free_log_probability, "critical_value": plan_objective}[objective]
    best = OracleResult(-math.inf, None)
    holders = [a for a in range(state.num_devices) if state.has_mask[a]]
    for A in subsets(holders):
        if collision_free and not collision_free_set(state, A):
            continue
        if not keeps_critical_in_reach(state, crit, A):
            continue
        once, _, _ = hearing_masks(state, A)

        def score(a, e, once=once):
            # the objective restricted to the critical devices hearing only ``a``
            sub = TransmissionPlan((e,))
            own = state.coverage_mask[a] & once & crit
            return _restricted(state, view, sub, own, score_fn)

        value, plan = _best_per_transmitter(state, view, A, score)
        if value > best.value:
            best = OracleResult(value, plan)
    return best


def serving_plan_exists(state: NetworkState, metrics) -> bool:
    """Whether some plan keeps every critical device in reach and lets somebody decode."""
    view = metrics if isinstance(metrics, RoundView) else RoundView(state, metrics)
    crit = view.critical_mask
    holders = [a for a in range(state.num_devices) if state.has_mask[a]]
    for A in subsets(holders):
        if not keeps_critical_in_reach(state, crit, A):
            continue
        once, _, _ = hearing_masks(state, A)
        for a in A:
            reach = state.coverage_mask[a] & once & state.wanting_mask
            # a single wanted file held by ``a`` is always decodable
            if any(state.want_mask[u] & state.has_mask[a] for u in bits(reach)):
                return True
    return False


def _restricted(state, view, plan, devices_mask, score_fn):
    """``score_fn`` counting only ``devices_mask`` as critical."""
    sub_view = _MaskedView(view, devices_mask)
    return score_fn(state, sub_view, plan)


class _MaskedView(RoundView):
    def __init__(self, view: RoundView, critical_mask: int):
        super().__init__(view.state, view.metrics)
        self.__dict__["critical_mask"] = critical_mask


# ------------------------------------------------------------- bijection

def feasible_transmitter_sets(builder: CoopBuilder, full_reach: bool = False) -> set[frozenset[int]]:
    """Transmitter sets drawn from the feasible singletons with no critical member or collision.

    With ``full_reach`` every critical device must also hear a transmission.
    """
    state = builder.state
    crit = builder.critical
    out = set()
    for A in subsets(builder.feasible_singletons):
        once, multi, tx = hearing_masks(state, A)
        if crit & tx or crit & multi:
            continue
        if full_reach and crit & ~once:
            continue
        out.add(frozenset(A))
    return out


def extended_cliques(builder: CoopBuilder, max_size: int):
    """Every nonempty clique of the extended cooperation graph, as cluster tuples."""
    clusters = builder.enumerate_clusters(max_size)
    graph = builder.graph_over(clusters)
    n = len(clusters)
    out = []

    def grow(chosen, cand):
        if chosen:
            out.append(tuple(clusters[i] for i in chosen))
        while cand:
            low = cand & -cand
            v = low.bit_length() - 1
            cand ^= low
            grow(chosen + [v], cand & graph.adj[v])

    grow([], (1 << n) - 1)
    return out


@dataclass(frozen=True)
class BijectionReport:
    cliques: int
    feasible_sets: int
    reach_sets: int
    injective: bool
    onto: bool
    reach_matches: bool

    @property
    def ok(self) -> bool:
        return self.injective and self.onto and self.reach_matches


def check_bijection(state: NetworkState, metrics) -> BijectionReport:
    """Cliques of the uncapped extended graph versus feasible transmitter sets."""
    view = metrics if isinstance(metrics, RoundView) else RoundView(state, metrics)
    builder = CoopBuilder(view)
    cliques = extended_cliques(builder, state.num_devices)
    images = [frozenset(a for cl in q for a in cl.members) for q in cliques]
    feasible = feasible_transmitter_sets(builder)
    reach = feasible_transmitter_sets(builder, full_reach=True)
    crit_count = bin(builder.critical).count("1")
    reach_images = {img for q, img in zip(cliques, images) if sum(c.covered_critical for c in q) == crit_count}
    return BijectionReport(
        cliques=len(cliques),
        feasible_sets=len(feasible),
        reach_sets=len(reach),
        injective=len(set(images)) == len(images),
        onto=set(images) == feasible,
        reach_matches=reach_images == reach,
    )


# ------------------------------------------------------- random tiny cases

def random_tiny_state(rng: np.random.Generator, max_devices: int = 5, max_files: int = 3,
                      min_devices: int = 2) -> NetworkState:
    """Small connected instance with random holdings and erasures in [0.05, 0.6]."""
    while True:
        U = int(rng.integers(min_devices, max_devices + 1))
        F = int(rng.integers(1, max_files + 1))
        conn = np.eye(U, dtype=bool)
        p = rng.uniform(0.3, 0.9)
        for i in range(U):
            for j in range(i + 1, U):
                if rng.random() < p:
                    conn[i, j] = conn[j, i] = True
        eras = rng.uniform(0.05, 0.6, size=(U, U))
        np.fill_diagonal(eras, 0.0)
        held = rng.random((U, F)) < 0.5
        if not held.any(axis=0).all() or held.all():
            continue
        try:
            return NetworkState(conn, eras, [frozenset(np.flatnonzero(r).tolist()) for r in held], F)
        except ValueError:
            continue


def random_tiny_metrics(state: NetworkState, rng: np.random.Generator) -> tuple[DeviceMetrics, ...]:
    """Start-of-episode metrics with some accrued delay, so critical sets vary."""
    base = initial_metrics(state)
    out = []
    for m in base:
        if m.completed:
            out.append(m)
        else:
            out.append(DeviceMetrics(m.initial_demand, int(rng.integers(0, 3)), 0, None))
    return tuple(out)


@dataclass(frozen=True)
class ObjectiveCheck:
    general: float
    general_best: float
    collision_free: float
    collision_free_best: float

    def ok(self, tol: float = 1e-9) -> bool:
        return _close(self.general, self.general_best, tol) and _close(
            self.collision_free, self.collision_free_best, tol)


def _close(a, b, tol):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol


def objective_check(state: NetworkState, metrics, objective: str) -> ObjectiveCheck:
    """Scheduler plans versus the exhaustive optimum of ``objective``."""
    planner = RoundPlanner(state, metrics)
    score = {"log_probability": delay_free_log_probability, "critical_value": plan_objective}[objective]
    g = score(state, planner.view, planner.general(state.num_devices).plan)
    c = score(state, planner.view, planner.collision_free().plan)
    return ObjectiveCheck(
        g, exhaustive_optimum(state, planner.view, objective).value,
        c, exhaustive_optimum(state, planner.view, objective, collision_free=True).value,
    )


__all__ = [
    "exhaustive_optimum", "check_bijection", "objective_check", "random_tiny_state",
    "random_tiny_metrics", "feasible_transmitter_sets", "extended_cliques",
]
