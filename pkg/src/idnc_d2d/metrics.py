"""Per-device delay bookkeeping, anticipated completion times and the critical set."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Mapping, Sequence

from .net_model import (
    BASE_STATION,
    ModelError,
    NetworkState,
    TransmissionPlan,
    bits,
    hearing_masks,
    is_instantly_decodable,
    mask_of,
)

# Absolute slack used when comparing anticipated completion times, so that
# algebraically equal quantities computed along different paths compare equal.
TIME_TOL = 1e-9


@dataclass(frozen=True)
class DeviceMetrics:
    initial_demand: int
    decoding_delay: int = 0
    erasure_count: int = 0
    completion_round: int | None = None

    @property
    def completed(self) -> bool:
        return self.completion_round is not None

    def identity_gap(self) -> int:
        """``completion_round - (demand + delay + erasures)``; zero for a consistent record."""
        if self.completion_round is None:
            raise ModelError("device has not completed")
        return self.completion_round - (self.initial_demand + self.decoding_delay + self.erasure_count)


def initial_metrics(state: NetworkState) -> tuple[DeviceMetrics, ...]:
    return tuple(
        DeviceMetrics(len(w), completion_round=state.round if not w else None) for w in state.wants
    )


def record_round(
    metrics: Sequence[DeviceMetrics],
    state: NetworkState,
    plan: TransmissionPlan,
    erased: Mapping[int, bool],
) -> tuple[DeviceMetrics, ...]:
    """Update counters for one round.

    ``state`` is the state at the start of the round and ``erased`` maps every
    wanting device that hears exactly one transmission to whether that
    transmission was erased at it.
    """
    once, _, _ = hearing_masks(state, plan.transmitters)
    combos = {e.transmitter: mask_of(e.files) for e in plan.entries}
    source = {}
    for a in combos:
        cov = once if a == BASE_STATION else state.coverage_mask[a] & once
        for u in bits(cov & state.wanting_mask):
            source[u] = a
    finish = state.round + 1
    out = list(metrics)
    for u in bits(state.wanting_mask):
        m = metrics[u]
        a = source.get(u)
        if a is None:
            # transmitting, interfered or out of range
            out[u] = replace(m, decoding_delay=m.decoding_delay + 1)
            continue
        if u not in erased:
            raise ModelError(f"missing reception outcome for device {u}")
        if erased[u]:
            out[u] = replace(m, erasure_count=m.erasure_count + 1)
        elif not is_instantly_decodable(combos[a], u, state):
            out[u] = replace(m, decoding_delay=m.decoding_delay + 1)
        elif state.want_mask[u] & (state.want_mask[u] - 1) == 0:
            out[u] = replace(m, completion_round=finish)
    return tuple(out)


def anticipated_completion(m: DeviceMetrics, eps: float) -> float:
    if not 0 <= eps < 1:
        raise ModelError("expected erasure must lie in [0, 1)")
    return (m.initial_demand + m.decoding_delay - eps) / (1 - eps)


def layer_index(m: DeviceMetrics, eps: float, global_max: float) -> int:
    """Smallest ``n >= 1`` with ``T + n/(1-eps) > global_max``."""
    t = anticipated_completion(m, eps)
    step = 1 / (1 - eps)
    gap = global_max - t
    if gap < 0:
        return 1
    n = max(1, int(gap / step))
    while t + n * step <= global_max + TIME_TOL:
        n += 1
    while n > 1 and t + (n - 1) * step > global_max + TIME_TOL:
        n -= 1
    return n


class RoundView:
    """Quantities derived from ``(state, metrics)`` before a plan is chosen.

    All values refer to the previous round, which is what the plan for the
    current round may depend on.
    """

    def __init__(self, state: NetworkState, metrics: Sequence[DeviceMetrics]):
        if len(metrics) != state.num_devices:
            raise ModelError("one metrics record per device is required")
        self.state = state
        self.metrics = tuple(metrics)

    @cached_property
    def eps(self) -> list[float]:
        return [float(e) for e in self.state.expected_erasures]

    @cached_property
    def anticipated(self) -> dict[int, float]:
        return {
            u: anticipated_completion(self.metrics[u], self.eps[u])
            for u in bits(self.state.wanting_mask)
        }

    @cached_property
    def global_max(self) -> float:
        return max(self.anticipated.values(), default=0.0)

    @cached_property
    def critical_mask(self) -> int:
        top = self.global_max
        m = 0
        for u, t in self.anticipated.items():
            if t + 1 / (1 - self.eps[u]) >= top - TIME_TOL:
                m |= 1 << u
        return m

    @property
    def critical(self) -> frozenset[int]:
        return frozenset(bits(self.critical_mask))

    @cached_property
    def layers(self) -> dict[int, int]:
        """Layer of each wanting device; critical devices sit in layer 1."""
        crit = self.critical_mask
        return {
            u: 1 if crit >> u & 1 else layer_index(self.metrics[u], self.eps[u], self.global_max)
            for u in self.anticipated
        }


def critical_set(metrics: Sequence[DeviceMetrics], state: NetworkState) -> frozenset[int]:
    return RoundView(state, metrics).critical
