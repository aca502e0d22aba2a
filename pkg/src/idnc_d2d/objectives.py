"""Scoring a transmission plan against the critical set of its round.

Two scores are provided:

* :func:`plan_objective` - sum of ``log(1/eps)`` over critical devices that
  decode a combination, or ``-inf`` when the plan lets a critical device
  transmit, collide or fall out of range;
* :func:`delay_free_log_probability` - log of the probability that no
  critical device incurs decoding delay this round.
"""

from __future__ import annotations

import math
from typing import Sequence

from .idnc_graph import link_weight
from .metrics import DeviceMetrics, RoundView
from .net_model import (
    BASE_STATION,
    NetworkState,
    TransmissionPlan,
    bits,
    hearing_masks,
    is_instantly_decodable,
    link_erasure,
    mask_of,
)


def _view(state, metrics_or_view):
    if isinstance(metrics_or_view, RoundView):
        return metrics_or_view
    return RoundView(state, metrics_or_view)


def keeps_critical_in_reach(state: NetworkState, critical: int, transmitters) -> bool:
    """Membership of a transmitter set in the feasible-cooperation family."""
    once, multi, tx = hearing_masks(state, transmitters)
    if critical & tx or critical & multi:
        return False
    return critical & ~once == 0


def decoders(state: NetworkState, plan: TransmissionPlan) -> dict[int, frozenset[int]]:
    """Per transmitter, the wanting devices that hear only it and can decode its combination."""
    once, _, _ = hearing_masks(state, plan.transmitters)
    reach = once & state.wanting_mask
    out = {}
    for e in plan.entries:
        cov = reach if e.transmitter == BASE_STATION else state.coverage_mask[e.transmitter] & reach
        combo = mask_of(e.files)
        out[e.transmitter] = frozenset(u for u in bits(cov) if is_instantly_decodable(combo, u, state))
    return out


def plan_objective(state: NetworkState, metrics: Sequence[DeviceMetrics] | RoundView, plan: TransmissionPlan) -> float:
    view = _view(state, metrics)
    crit = view.critical_mask
    if not keeps_critical_in_reach(state, crit, plan.transmitters):
        return -math.inf
    total = 0.0
    for a, served in decoders(state, plan).items():
        for u in served:
            if crit >> u & 1:
                total += link_weight(link_erasure(state, plan, a, u))
    return total


def delay_free_log_probability(state: NetworkState, metrics: Sequence[DeviceMetrics] | RoundView,
                               plan: TransmissionPlan) -> float:
    """``log prod_{u critical} P[no decoding delay at u]``.

    A critical device that hears one transmission it cannot decode escapes
    delay only if that transmission is erased.
    """
    view = _view(state, metrics)
    crit = view.critical_mask
    if not keeps_critical_in_reach(state, crit, plan.transmitters):
        return -math.inf
    served = decoders(state, plan)
    once, _, _ = hearing_masks(state, plan.transmitters)
    total = 0.0
    for e in plan.entries:
        a = e.transmitter
        cov = once if a == BASE_STATION else state.coverage_mask[a] & once
        for u in bits(cov & crit):
            if u not in served[a]:
                eps = link_erasure(state, plan, a, u)
                total += math.log(eps) if eps > 0 else -math.inf
    return total
