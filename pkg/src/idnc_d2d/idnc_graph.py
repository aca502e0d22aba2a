"""Multi-layer local IDNC graphs and the file combination each transmitter sends.

A vertex ``(u, f)`` stands for "send file ``f`` to device ``u``". Two vertices
are adjacent when one XOR of both files is instantly decodable at both
devices, so a clique is a combination together with the devices it serves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .clique import WeightedGraph, max_weight_clique, quantize
from .metrics import RoundView
from .net_model import BASE_STATION, ModelError, bits

# Links more reliable than this are weighted as if erased with this probability,
# which keeps -log(eps) finite.
MIN_LINK_ERASURE = 1e-6


def link_weight(eps: float) -> float:
    return -math.log(max(eps, MIN_LINK_ERASURE))


class Vertex(NamedTuple):
    device: int
    file: int
    layer: int
    weight: float


@dataclass
class LocalIdncGraph:
    transmitter: int
    vertices: list[Vertex]
    adj: list[int]
    by_device: dict[int, int] = field(default_factory=dict, repr=False)
    _layer1_cache: tuple | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.vertices)

    def adjacent(self, i: int, j: int) -> bool:
        return bool(self.adj[i] >> j & 1)

    def layer_mask(self, layer: int) -> int:
        m = 0
        for i, v in enumerate(self.vertices):
            if v.layer == layer:
                m |= 1 << i
        return m

    def device_mask(self, devices_mask: int) -> int:
        """Vertex bitmask of the vertices whose device is in ``devices_mask``."""
        m = 0
        for u, vm in self.by_device.items():
            if devices_mask >> u & 1:
                m |= vm
        return m


class Combination(NamedTuple):
    files: frozenset[int]
    targets: frozenset[int]
    critical_value: float
    secondary_value: float
    clique: tuple[int, ...] = ()
    # the two values on the integer weight grid, summed per target
    critical_q: int = 0
    secondary_q: int = 0

    @property
    def empty(self) -> bool:
        return not self.files


EMPTY = Combination(frozenset(), frozenset(), 0.0, 0.0)


def _assemble(transmitter, vertices, has_of):
    """Vertex list plus adjacency bitmasks, built per device/file rather than per pair."""
    by_file: dict[int, int] = {}
    by_device: dict[int, int] = {}
    for i, v in enumerate(vertices):
        by_file[v.file] = by_file.get(v.file, 0) | 1 << i
        by_device[v.device] = by_device.get(v.device, 0) | 1 << i
    files = list(by_file)
    # vertices whose device already holds f
    holders = {f: 0 for f in files}
    # vertices whose file is held by device u
    covered_by = {}
    for u, vm in by_device.items():
        hu = has_of(u)
        cov = 0
        for f in files:
            if hu >> f & 1:
                holders[f] |= vm
                cov |= by_file[f]
        covered_by[u] = cov
    adj = []
    for i, v in enumerate(vertices):
        a = by_file[v.file] | (covered_by[v.device] & holders[v.file])
        adj.append(a & ~(1 << i))
    return LocalIdncGraph(transmitter, vertices, adj, by_device)


def build_local_graph(view: RoundView, transmitter: int, excluded: int = 0) -> LocalIdncGraph:
    """Local graph of ``transmitter``; ``excluded`` is a device bitmask left out of it.

    ``excluded`` holds the cluster's transmitters and interfered devices (zero
    in the collision-free case).
    """
    state = view.state
    if not 0 <= transmitter < state.num_devices:
        raise ModelError(f"device id {transmitter} out of range")
    h_a = state.has_mask[transmitter]
    eligible = state.coverage_mask[transmitter] & state.wanting_mask & ~excluded & ~(1 << transmitter)
    layers = view.layers
    eras = state.erasures[transmitter]
    vertices = []
    for u in bits(eligible):
        useful = state.want_mask[u] & h_a
        if not useful:
            continue
        w = link_weight(eras[u])
        lay = layers[u]
        for f in bits(useful):
            vertices.append(Vertex(u, f, lay, w))
    return _assemble(transmitter, vertices, lambda u: state.has_mask[u])


def build_base_station_graph(view: RoundView, erasure: float) -> LocalIdncGraph:
    """Local graph of a base station that holds every file and reaches every device."""
    state = view.state
    w = link_weight(erasure)
    vertices = [
        Vertex(u, f, view.layers[u], w)
        for u in bits(state.wanting_mask)
        for f in bits(state.want_mask[u])
    ]
    return _assemble(BASE_STATION, vertices, lambda u: state.has_mask[u])


def combination_of(graph: LocalIdncGraph, clique) -> Combination:
    clique = tuple(sorted(clique))
    for k, i in enumerate(clique):
        for j in clique[k + 1:]:
            if not graph.adjacent(i, j):
                raise ModelError("vertex set is not a clique")
    vs = [graph.vertices[i] for i in clique]
    crit = [v.weight for v in vs if v.layer == 1]
    sec = [v.weight for v in vs if v.layer != 1]
    return Combination(
        frozenset(v.file for v in vs), frozenset(v.device for v in vs), sum(crit), sum(sec), clique,
        sum(map(quantize, crit)), sum(map(quantize, sec)),
    )


def _clique_in(graph: LocalIdncGraph, cand: int) -> list[int]:
    idx = bits(cand)
    pos = {v: k for k, v in enumerate(idx)}
    adj = [sum(1 << pos[j] for j in bits(graph.adj[i] & cand)) for i in idx]
    sub = WeightedGraph.trusted([graph.vertices[i].weight for i in idx], adj)
    return [idx[k] for k in max_weight_clique(sub)]


def best_combination(graph: LocalIdncGraph, active: int | None = None, flat: bool = False) -> Combination:
    """Best combination on ``graph`` (optionally restricted to the vertex mask ``active``).

    The layer-1 (critical) part is an exact maximum-weight clique; it is then
    extended greedily one layer at a time among vertices adjacent to every
    chosen one, heaviest first, ties to the smaller device then file id.
    ``flat`` ignores layers and solves one exact clique over all vertices.
    """
    n = len(graph)
    if active is None:
        active = (1 << n) - 1
    if not active:
        return EMPTY
    if flat:
        return combination_of(graph, _clique_in(graph, active))
    by_layer: dict[int, int] = {}
    for i in bits(active):
        lay = graph.vertices[i].layer
        by_layer[lay] = by_layer.get(lay, 0) | 1 << i
    layer1 = by_layer.pop(1, 0)
    cache = graph._layer1_cache
    if cache is not None and cache[0] == layer1:
        chosen = list(cache[1])
    else:
        chosen = _clique_in(graph, layer1) if layer1 else []
        graph._layer1_cache = (layer1, tuple(chosen))
    common = active
    for i in chosen:
        common &= graph.adj[i]
    for lay in sorted(by_layer):
        cand = by_layer[lay] & common
        while cand:
            best = -1
            best_w = -1.0
            for i in bits(cand):
                w = graph.vertices[i].weight
                if w > best_w:
                    best, best_w = i, w
            chosen.append(best)
            common &= graph.adj[best]
            cand &= graph.adj[best]
    if not chosen:
        return EMPTY
    return combination_of(graph, chosen)


def dump_graph(graph: LocalIdncGraph) -> str:
    """Adjacency-list text: ``u:f:layer:weight -> neighbour neighbour ...``."""
    def label(v: Vertex) -> str:
        return f"{v.device}:{v.file}:{v.layer}:{v.weight:.6f}"

    lines = [f"# transmitter {graph.transmitter}"]
    for i, v in enumerate(graph.vertices):
        nbrs = " ".join(label(graph.vertices[j]) for j in bits(graph.adj[i]))
        lines.append(f"{label(v)} -> {nbrs}".rstrip())
    return "\n".join(lines) + "\n"


def parse_graph_dump(text: str) -> LocalIdncGraph:
    transmitter = None
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            transmitter = int(line.split()[-1])
            continue
        head, _, tail = line.partition("->")
        rows.append((head.strip(), tail.split()))
    index = {label: i for i, (label, _) in enumerate(rows)}
    vertices = []
    adj = []
    by_device: dict[int, int] = {}
    for i, (label, nbrs) in enumerate(rows):
        u, f, lay, w = label.split(":")
        vertices.append(Vertex(int(u), int(f), int(lay), float(w)))
        adj.append(sum(1 << index[n] for n in nbrs))
        by_device[int(u)] = by_device.get(int(u), 0) | 1 << i
    return LocalIdncGraph(transmitter, vertices, adj, by_device)
