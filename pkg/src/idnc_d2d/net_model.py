"""Network state, transmission plans and the topology/erasure queries built on them.

Device and file identifiers are plain integers ``0..U-1`` and ``0..F-1``.
Internally sets of devices/files are mirrored as Python ``int`` bitmasks,
which keeps the inner loops of the schedulers cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

#: Transmitter id used by the point-to-multipoint base station.
BASE_STATION = -1


class ModelError(ValueError):
    """Raised when a network state or a plan breaks a model invariant."""


def mask_of(items: Iterable[int]) -> int:
    m = 0
    for i in items:
        m |= 1 << int(i)
    return m


def bits(mask: int) -> list[int]:
    """Indices of the set bits of ``mask`` in increasing order."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def is_connected(connectivity: np.ndarray) -> bool:
    n = connectivity.shape[0]
    if n == 0:
        return False
    nbr = [mask_of(np.flatnonzero(connectivity[u])) for u in range(n)]
    seen = frontier = 1
    while frontier:
        reach = 0
        for u in bits(frontier):
            reach |= nbr[u]
        frontier = reach & ~seen
        seen |= reach
    return seen == (1 << n) - 1


@dataclass(frozen=True)
class NetworkState:
    """Connectivity, erasure probabilities and file holdings at one round.

    ``wants`` is always the complement of ``has``; it is derived, never stored.
    """

    connectivity: np.ndarray
    erasures: np.ndarray
    has: tuple[frozenset[int], ...]
    num_files: int
    round: int = 0
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        conn = np.asarray(self.connectivity, dtype=bool)
        eras = np.asarray(self.erasures, dtype=float)
        object.__setattr__(self, "connectivity", conn)
        object.__setattr__(self, "erasures", eras)
        object.__setattr__(self, "has", tuple(frozenset(h) for h in self.has))
        if self.validate:
            self._check()

    def _check(self):
        U, F = self.num_devices, self.num_files
        if U < 1 or F < 1:
            raise ModelError("need at least one device and one file")
        if self.connectivity.shape != (U, U) or self.erasures.shape != (U, U):
            raise ModelError("connectivity/erasure matrices must be U x U")
        if not np.array_equal(self.connectivity, self.connectivity.T):
            raise ModelError("connectivity must be symmetric")
        if not self.connectivity.diagonal().all():
            raise ModelError("connectivity must have a unit diagonal")
        if np.any(np.diag(self.erasures) != 0):
            raise ModelError("erasure matrix must have a zero diagonal")
        if np.any(self.erasures < 0) or np.any(self.erasures >= 1):
            raise ModelError("erasure probabilities must lie in [0, 1)")
        for h in self.has:
            if any(not 0 <= f < F for f in h):
                raise ModelError("file id out of range")
        if self.held_mask != self.all_files_mask:
            raise ModelError("every file must be held by at least one device")
        if U > 1:
            if not is_connected(self.connectivity):
                raise ModelError("connectivity graph must be connected")

    @property
    def num_devices(self) -> int:
        return len(self.has)

    @cached_property
    def all_files_mask(self) -> int:
        return (1 << self.num_files) - 1

    @cached_property
    def has_mask(self) -> tuple[int, ...]:
        return tuple(mask_of(h) for h in self.has)

    @cached_property
    def want_mask(self) -> tuple[int, ...]:
        full = self.all_files_mask
        return tuple(full & ~h for h in self.has_mask)

    @cached_property
    def held_mask(self) -> int:
        m = 0
        for h in self.has_mask:
            m |= h
        return m

    @cached_property
    def wants(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(bits(w)) for w in self.want_mask)

    @cached_property
    def coverage_mask(self) -> tuple[int, ...]:
        return tuple(mask_of(np.flatnonzero(row)) for row in self.connectivity)

    @cached_property
    def wanting_mask(self) -> int:
        """Bitmask of devices with a nonempty Wants set."""
        return mask_of(u for u, w in enumerate(self.want_mask) if w)

    @cached_property
    def expected_erasures(self) -> np.ndarray:
        """Per-device mean erasure over the coverage zone (zero self term included)."""
        deg = self.connectivity.sum(axis=0)
        return (self.erasures * self.connectivity).sum(axis=0) / deg

    def done(self) -> bool:
        return self.wanting_mask == 0

    def with_has(self, has, advance: int = 0) -> "NetworkState":
        return replace(self, has=tuple(has), round=self.round + advance, validate=False)

    def with_topology(self, connectivity: np.ndarray) -> "NetworkState":
        return replace(self, connectivity=connectivity, validate=True)


@dataclass(frozen=True)
class Transmission:
    transmitter: int
    files: frozenset[int]
    targets: frozenset[int] = frozenset()


@dataclass(frozen=True)
class TransmissionPlan:
    """Simultaneous transmissions of one round.

    ``base_station_erasure`` is set only for point-to-multipoint plans, whose
    single entry uses the :data:`BASE_STATION` transmitter id.
    """

    entries: tuple[Transmission, ...] = ()
    base_station_erasure: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        ids = [e.transmitter for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ModelError("transmitter ids must be distinct")
        for e in self.entries:
            if not e.files:
                raise ModelError("a transmission needs a nonempty file combination")
        if BASE_STATION in ids and self.base_station_erasure is None:
            raise ModelError("base-station entry without an erasure probability")

    @property
    def transmitters(self) -> frozenset[int]:
        return frozenset(ids for ids in (e.transmitter for e in self.entries))

    @property
    def targets(self) -> frozenset[int]:
        out: set[int] = set()
        for e in self.entries:
            out |= e.targets
        return frozenset(out)

    def validate_against(self, state: NetworkState) -> None:
        for e in self.entries:
            if e.transmitter == BASE_STATION:
                cover = (1 << state.num_devices) - 1
            else:
                if not e.files <= state.has[e.transmitter]:
                    raise ModelError(f"device {e.transmitter} sends files it does not hold")
                cover = state.coverage_mask[e.transmitter]
            for u in e.targets:
                if u == e.transmitter or not cover >> u & 1:
                    raise ModelError(f"target {u} outside the coverage of {e.transmitter}")
                if not is_instantly_decodable(e.files, u, state):
                    raise ModelError(f"combination not instantly decodable at target {u}")


def link_erasure(state: NetworkState, plan: TransmissionPlan, a: int, u: int) -> float:
    if a == BASE_STATION:
        return plan.base_station_erasure
    return float(state.erasures[a, u])


def coverage_zone(state: NetworkState, u: int) -> frozenset[int]:
    if not 0 <= u < state.num_devices:
        raise ModelError(f"device id {u} out of range")
    return frozenset(bits(state.coverage_mask[u]))


@dataclass(frozen=True)
class HearingSets:
    interfered: frozenset[int]
    out_of_range: frozenset[int]
    heard_from: Mapping[int, int]


def hearing_masks(state: NetworkState, transmitters: Iterable[int]) -> tuple[int, int, int]:
    """Return ``(once, twice_or_more, transmitter_mask)`` device bitmasks."""
    once = multi = tx = 0
    full = (1 << state.num_devices) - 1
    for a in transmitters:
        if a == BASE_STATION:
            cov = full
        else:
            cov = state.coverage_mask[a]
            tx |= 1 << a
        multi |= once & cov
        once |= cov
    once &= ~multi
    return once & ~tx, multi & ~tx, tx


def hearing_sets(state: NetworkState, plan: TransmissionPlan) -> HearingSets:
    """Classify wanting devices by how many transmissions reach them.

    Transmitters hear nothing. Wanting devices inside two or more zones are
    interfered, inside none are out of range, inside exactly one map to that
    transmitter.
    """
    once, multi, tx = hearing_masks(state, plan.transmitters)
    wanting = state.wanting_mask
    interfered = frozenset(bits(multi & wanting))
    out = frozenset(bits(wanting & ~once & ~multi & ~tx))
    heard: dict[int, int] = {}
    single = once & wanting
    for e in plan.entries:
        if e.transmitter == BASE_STATION:
            cov = single
        else:
            cov = state.coverage_mask[e.transmitter] & single
        for u in bits(cov):
            heard[u] = e.transmitter
    return HearingSets(interfered, out, heard)


def is_instantly_decodable(files: Iterable[int], u: int, state: NetworkState) -> bool:
    combo = files if isinstance(files, int) else mask_of(files)
    wanted = combo & state.want_mask[u]
    if not wanted or wanted & (wanted - 1):
        return False
    return combo & ~wanted & ~state.has_mask[u] == 0


def apply_reception(state: NetworkState, u: int, files: Iterable[int]) -> NetworkState:
    """Device ``u`` decodes ``files``; its single missing file joins its Has set."""
    combo = frozenset(files)
    if not is_instantly_decodable(combo, u, state):
        raise ModelError(f"combination {sorted(combo)} is not instantly decodable at {u}")
    (f,) = combo & state.wants[u]
    has = list(state.has)
    has[u] = has[u] | {f}
    return state.with_has(has)


def connectivity_index(state_or_matrix) -> float:
    conn = state_or_matrix.connectivity if isinstance(state_or_matrix, NetworkState) else state_or_matrix
    conn = np.asarray(conn, dtype=bool)
    return float(conn.sum()) / conn.shape[0] ** 2


def expected_erasure(state: NetworkState, u: int) -> float:
    if not 0 <= u < state.num_devices:
        raise ModelError(f"device id {u} out of range")
    if state.connectivity[u].sum() < 2:
        raise ModelError(f"device {u} is isolated")
    return float(state.expected_erasures[u])


def progress_possible(state: NetworkState) -> bool:
    """True when some device holds a file wanted by one of its neighbours."""
    for x in range(state.num_devices):
        hx = state.has_mask[x]
        for y in bits(state.coverage_mask[x] & state.wanting_mask):
            if y != x and hx & state.want_mask[y]:
                return True
    return False
