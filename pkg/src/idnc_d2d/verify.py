"""Self-check suites behind ``idnc-d2d verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clique import WeightedGraph, brute_force_clique, max_weight_clique
from .harness import ExperimentConfig, HarnessError, generate_instance, min_connectivity, run_episode, run_round
from .metrics import anticipated_completion, initial_metrics
from .net_model import NetworkState, Transmission, TransmissionPlan
from .oracle import check_bijection, objective_check, random_tiny_metrics, random_tiny_state, serving_plan_exists
from .schedulers import RoundPlanner


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def random_graph(rng: np.random.Generator, max_n: int = 12) -> WeightedGraph:
    n = int(rng.integers(0, max_n + 1))
    p = rng.uniform(0.1, 0.9)
    adj = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                adj[i] |= 1 << j
                adj[j] |= 1 << i
    # a few repeated integer weights so the tie-break is exercised
    weights = [float(rng.integers(0, 4)) if rng.random() < 0.4 else float(rng.uniform(0, 5)) for _ in range(n)]
    return WeightedGraph(weights, adj)


def clique_suite(instances: int = 1000, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng([seed, 1])
    bad = 0
    for _ in range(instances):
        g = random_graph(rng)
        if max_weight_clique(g) != brute_force_clique(g):
            bad += 1
    return SuiteResult("clique", bad == 0, f"{instances - bad}/{instances} graphs match the exhaustive oracle")


def identity_suite(instances: int = 300, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng([seed, 2])
    kinds = ["general", "collision_free", "single_transmitter", "pmp"]
    for i in range(instances):
        U = int(rng.integers(4, 16))
        cfg = ExperimentConfig(
            num_devices=U, num_files=int(rng.integers(1, 10)),
            connectivity=float(rng.uniform(min_connectivity(U), 1.0)),
            mean_erasure=float(rng.uniform(0.05, 0.4)),
        )
        try:
            state = generate_instance(cfg, rng)
            run_episode(state, kinds[i % 4], rng, p_bs=cfg.p_bs)  # asserts the identity itself
        except HarnessError as exc:
            return SuiteResult("identity", False, f"episode {i}: {exc}")
    return SuiteResult("identity", True, f"{instances} episodes satisfy completion = demand + delay + erasures")


def objective_suite(instances: int = 200, seed: int = 0, objective: str = "critical_value",
                    strict: bool = False) -> SuiteResult:
    """Scheduler plans against exhaustive optima on tiny instances.

    Rounds that fall back (no plan keeps the critical set in reach while
    serving anybody) are checked for exactly that condition instead, unless
    ``strict`` is set, in which case every instance is compared directly.
    """
    rng = np.random.default_rng([seed, 3])
    bad = fallbacks = 0
    for _ in range(instances):
        state = random_tiny_state(rng)
        metrics = random_tiny_metrics(state, rng)
        planner = RoundPlanner(state, metrics)
        fell_back = planner.general(state.num_devices).fallback
        fallbacks += fell_back
        if fell_back and not strict:
            bad += serving_plan_exists(state, planner.view)
        elif not objective_check(state, metrics, objective).ok():
            bad += 1
    mode = ", strict" if strict else ""
    return SuiteResult(f"objective[{objective}{mode}]", bad == 0,
                       f"{instances - bad}/{instances} tiny instances consistent ({fallbacks} fallback rounds)")


def bijection_suite(instances: int = 100, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng([seed, 4])
    bad = 0
    for _ in range(instances):
        state = random_tiny_state(rng, max_devices=6)
        if not check_bijection(state, random_tiny_metrics(state, rng)).ok:
            bad += 1
    return SuiteResult("bijection", bad == 0, f"{instances - bad}/{instances} instances verified both ways")


def erasure_suite(events: int = 20000, seed: int = 0) -> SuiteResult:
    """Empirical erasure rate of one link against its probability (3 standard errors)."""
    eps = 0.3
    conn = np.ones((2, 2), dtype=bool)
    eras = np.array([[0.0, eps], [eps, 0.0]])
    state = NetworkState(conn, eras, [frozenset({0}), frozenset()], 1)
    plan = TransmissionPlan((Transmission(0, frozenset({0}), frozenset({1})),))
    rng = np.random.default_rng([seed, 5])
    lost = 0
    m0 = initial_metrics(state)
    for _ in range(events):
        _, m = run_round(state, m0, plan, rng)
        lost += m[1].erasure_count
    rate = lost / events
    se = math.sqrt(eps * (1 - eps) / events)
    ok = abs(rate - eps) <= 3 * se
    return SuiteResult("erasures", ok, f"rate {rate:.4f} vs {eps} (3 se = {3 * se:.4f})")


def calibration_error(episodes: int = 200, seed: int = 0) -> float:
    """Mean relative gap between realized and anticipated completion times.

    Single-transmitter episodes with U = 30, F = 100, E = 0.1, C = 0.4; the
    anticipated value uses each device's realized delay at completion.
    """
    cfg = ExperimentConfig(num_devices=30, num_files=100, connectivity=0.4, mean_erasure=0.1)
    errors = []
    for it in range(episodes):
        inst, chan = np.random.SeedSequence([seed, 5, it]).spawn(2)
        state = generate_instance(cfg, np.random.default_rng(inst))
        res = run_episode(state, "single_transmitter", np.random.default_rng(chan), p_bs=cfg.p_bs)
        eps = state.expected_erasures
        for u, m in enumerate(res.metrics):
            if m.initial_demand:
                t = m.completion_round
                errors.append(abs(t - anticipated_completion(m, float(eps[u]))) / t)
    return float(np.mean(errors))


def calibration_suite(episodes: int = 200, seed: int = 0, limit: float = 0.10) -> SuiteResult:
    err = calibration_error(episodes, seed)
    return SuiteResult("calibration", err < limit,
                       f"mean relative error {err:.4f} over {episodes} episodes (limit {limit})")


def run_suites(which: str = "all", instances: int | None = None, seed: int = 0) -> list[SuiteResult]:
    table = {
        "clique": lambda: clique_suite(instances or 1000, seed),
        "identity": lambda: identity_suite(instances or 300, seed),
        "objective": lambda: objective_suite(instances or 200, seed),
        "bijection": lambda: bijection_suite(instances or 100, seed),
        "erasures": lambda: erasure_suite(seed=seed),
        "calibration": lambda: calibration_suite(instances or 200, seed),
    }
    names = list(table) if which == "all" else [which]
    return [table[n]() for n in names]


SUITES = ("clique", "identity", "objective", "bijection", "erasures", "calibration")
