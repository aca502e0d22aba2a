"""Per-round plan selection.

``collision_free`` and ``general`` pick a maximum-weight clique of the
(extended) cooperation graph; ``single_transmitter`` keeps only the best
vertex of the cooperation graph; ``pmp`` lets a base station holding every
file send one combination to all devices.

Cliques are ranked by (critical devices kept in reach, value served to
critical devices, value served to the rest). When no clique keeps every
critical device in reach of exactly one non-critical transmitter while
serving somebody, the round falls back to maximising plain service over all
wanting devices, ignoring criticality.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Sequence

from .coop_graph import Cluster, CoopBuilder, TransmitterPacking, total_weight
from .idnc_graph import best_combination, build_base_station_graph
from .metrics import DeviceMetrics, RoundView
from .net_model import BASE_STATION, NetworkState, Transmission, TransmissionPlan

DEFAULT_MAX_CLUSTER_SIZE = 3


class SchedulerKind(str, Enum):
    COLLISION_FREE = "collision_free"
    GENERAL = "general"
    PMP = "pmp"
    SINGLE_TRANSMITTER = "single_transmitter"


@dataclass(frozen=True)
class Selection:
    plan: TransmissionPlan
    clusters: tuple[Cluster, ...]
    fallback: bool


def _plan_from(state: NetworkState, clusters: Sequence[Cluster]) -> TransmissionPlan:
    entries = []
    for cl in clusters:
        for a, combo in zip(cl.members, cl.combos):
            if combo.empty:
                # keeps a critical device in range without serving anybody
                low = state.has_mask[a] & -state.has_mask[a]
                entries.append(Transmission(a, frozenset({low.bit_length() - 1})))
            else:
                entries.append(Transmission(a, combo.files, combo.targets))
    entries.sort(key=lambda e: e.transmitter)
    return TransmissionPlan(tuple(entries))


class RoundPlanner:
    """Shared per-round machinery behind every scheduler.

    Results are cached, so asking one planner for several schedulers (as the
    per-round audit does) solves each local graph once.
    """

    def __init__(self, state: NetworkState, metrics: Sequence[DeviceMetrics]):
        self.state = state
        self.view = RoundView(state, metrics)
        self.builder = CoopBuilder(self.view)
        self._cache: dict = {}

    @cached_property
    def fallback_builder(self) -> CoopBuilder:
        return CoopBuilder(self.view, ignore_critical=True)

    def _acceptable(self, clusters: Sequence[Cluster]) -> bool:
        covered = sum(c.covered_critical for c in clusters)
        serves = any(not combo.empty for c in clusters for combo in c.combos)
        return serves and covered == bin(self.view.critical_mask).count("1")

    @staticmethod
    def _best_single(builder: CoopBuilder) -> tuple[Cluster, ...]:
        for a in builder.by_weight(builder.feasible_singletons):
            best = builder.singleton(a)
            return (best,) if best.weight else ()
        return ()

    def _packed(self, builder: CoopBuilder, size: int | None) -> tuple[Cluster, ...]:
        """Best clique for cluster cap ``size`` (``None``: single transmitter).

        Each tier also considers the tier below, so the packed weights obey
        general >= collision-free >= single transmitter.
        """
        key = (builder is self.builder, size)
        if key in self._cache:
            return self._cache[key]
        if size is None:
            out = self._best_single(builder)
        else:
            out = TransmitterPacking(builder, size).solve()
            lower = self._packed(builder, None if size == 1 else 1)
            if total_weight(lower) > total_weight(out):
                out = lower
        self._cache[key] = out
        return out

    def _select(self, size: int | None) -> Selection:
        chosen = self._packed(self.builder, size)
        if self._acceptable(chosen):
            return Selection(_plan_from(self.state, chosen), chosen, False)
        chosen = self._packed(self.fallback_builder, size)
        return Selection(_plan_from(self.state, chosen), chosen, True)

    def collision_free(self) -> Selection:
        return self._select(1)

    def general(self, max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE) -> Selection:
        return self._select(max_cluster_size)

    def single_transmitter(self) -> Selection:
        return self._select(None)

    def pmp(self, p_bs: float) -> Selection:
        if not 0 < p_bs < 1:
            raise ValueError("base-station erasure must lie in (0, 1)")
        combo = best_combination(build_base_station_graph(self.view, p_bs))
        entries = (Transmission(BASE_STATION, combo.files, combo.targets),) if not combo.empty else ()
        return Selection(TransmissionPlan(entries, base_station_erasure=p_bs), (), False)


def plan_collision_free(state: NetworkState, metrics: Sequence[DeviceMetrics]) -> TransmissionPlan:
    return RoundPlanner(state, metrics).collision_free().plan


def plan_general(state: NetworkState, metrics: Sequence[DeviceMetrics],
                 max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE) -> TransmissionPlan:
    return RoundPlanner(state, metrics).general(max_cluster_size).plan


def plan_single_transmitter(state: NetworkState, metrics: Sequence[DeviceMetrics]) -> TransmissionPlan:
    return RoundPlanner(state, metrics).single_transmitter().plan


def plan_pmp(state: NetworkState, metrics: Sequence[DeviceMetrics], p_bs: float) -> TransmissionPlan:
    return RoundPlanner(state, metrics).pmp(p_bs).plan


Scheduler = Callable[[NetworkState, Sequence[DeviceMetrics]], TransmissionPlan]


def make_scheduler(kind: SchedulerKind | str, max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE,
                   p_bs: float | None = None) -> Scheduler:
    kind = SchedulerKind(kind)
    if kind is SchedulerKind.COLLISION_FREE:
        return plan_collision_free
    if kind is SchedulerKind.GENERAL:
        return lambda s, m: plan_general(s, m, max_cluster_size)
    if kind is SchedulerKind.SINGLE_TRANSMITTER:
        return plan_single_transmitter
    if p_bs is None:
        raise ValueError("pmp needs a base-station erasure probability")
    return lambda s, m: plan_pmp(s, m, p_bs)
