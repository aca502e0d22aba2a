"""Cooperation graphs over single transmitters and over transmitter clusters.

A vertex is a set of transmitters whose wanting coverage zones overlap
(a cluster; singletons are clusters of size one). Two vertices are adjacent
when their combined coverage zones share no wanting device, so a clique is a
set of simultaneous transmissions in which every collision stays inside a
declared cluster.

Vertex weights are packed lexicographically: first the number of critical
devices covered (a plan keeps every critical device in range only if all of
them are covered), then the value served to critical devices, then the value
served to everybody else.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property

from .clique import WeightedGraph, lex_pack, max_weight_clique, quantize
from .idnc_graph import EMPTY, Combination, LocalIdncGraph, best_combination, build_local_graph, link_weight
from .metrics import RoundView
from .net_model import bits


@dataclass(frozen=True)
class Cluster:
    members: tuple[int, ...]
    coverage: int  # union of the members' coverage zones, as a device bitmask
    interfered: int  # wanting non-members inside two or more members' zones
    combos: tuple[Combination, ...]  # one per member, aligned with ``members``
    covered_critical: int

    @property
    def critical_value(self) -> float:
        return sum(c.critical_value for c in self.combos)

    @property
    def secondary_value(self) -> float:
        return sum(c.secondary_value for c in self.combos)

    @property
    def weight(self) -> int:
        return lex_pack(self.covered_critical, sum(c.critical_q for c in self.combos),
                        sum(c.secondary_q for c in self.combos))


@dataclass
class CooperationGraph:
    vertices: list[Cluster]
    adj: list[int]

    def __len__(self):
        return len(self.vertices)

    def weighted(self) -> WeightedGraph:
        return WeightedGraph([c.weight for c in self.vertices], self.adj)

    def max_clique(self) -> list[int]:
        return max_weight_clique(self.weighted())


class CoopBuilder:
    """Per-round cache of local graphs and singleton combinations.

    Schedulers share one builder per round so that the collision-free,
    general and single-transmitter plans reuse the same local solutions.
    """

    def __init__(self, view: RoundView, ignore_critical: bool = False):
        self.view = view
        self.state = view.state
        # With ``ignore_critical`` the critical set is treated as empty and
        # local graphs are solved flat; this is the fallback objective.
        self.ignore_critical = ignore_critical
        self.critical = 0 if ignore_critical else view.critical_mask
        self._graphs: dict[int, LocalIdncGraph] = {}
        self._singles: dict[int, Combination] = {}
        self._upper: dict[int, int] = {}

    def graph(self, a: int) -> LocalIdncGraph:
        g = self._graphs.get(a)
        if g is None:
            g = self._graphs[a] = build_local_graph(self.view, a)
        return g

    def combo(self, a: int, excluded: int = 0) -> Combination:
        if not excluded:
            c = self._singles.get(a)
            if c is None:
                c = self._singles[a] = self._solve(a, 0)
            return c
        return self._solve(a, excluded)

    def _solve(self, a: int, excluded: int) -> Combination:
        g = self.graph(a)
        if not len(g):
            return EMPTY
        active = (1 << len(g)) - 1
        if excluded:
            active &= ~g.device_mask(excluded)
        c = best_combination(g, active, flat=self.ignore_critical)
        if self.ignore_critical:
            # everything counts as plain service in the fallback objective
            c = c._replace(critical_value=0.0, secondary_value=c.critical_value + c.secondary_value,
                           critical_q=0, secondary_q=c.critical_q + c.secondary_q)
        return c

    def wanting_cover(self, a: int) -> int:
        return self.state.coverage_mask[a] & self.state.wanting_mask

    def critical_cover(self, a: int) -> int:
        return self.state.coverage_mask[a] & self.critical & ~(1 << a)

    @cached_property
    def feasible_singletons(self) -> list[int]:
        """Devices allowed to transmit on their own.

        A device qualifies if it is not critical, holds a file, and either has
        something to send to a neighbour or keeps a critical device in range.
        """
        out = []
        for a in range(self.state.num_devices):
            if self.critical >> a & 1 or not self.state.has_mask[a]:
                continue
            # any vertex in the local graph means a nonempty combination
            if self.critical_cover(a) or len(self.graph(a)):
                out.append(a)
        return out

    def upper_weight(self, a: int) -> int:
        """Cheap bound on ``singleton(a).weight``: every reachable device served."""
        ub = self._upper.get(a)
        if ub is None:
            crit_q = sec_q = 0
            g = self.graph(a)
            for u in g.by_device:
                q = quantize(link_weight(self.state.erasures[a][u]))
                if self.critical >> u & 1:
                    crit_q += q
                else:
                    sec_q += q
            ub = self._upper[a] = lex_pack(bin(self.critical_cover(a)).count("1"), crit_q, sec_q)
        return ub

    def by_weight(self, cands, skip=None):
        """Yield ``cands`` by decreasing singleton weight (ties: smaller id).

        Exact weights are computed lazily, only once a candidate's bound
        reaches the top. ``skip`` must be monotone: once true it stays true.
        """
        heap = [(-self.upper_weight(a), a, False) for a in cands]
        heapq.heapify(heap)
        while heap:
            key, a, exact = heapq.heappop(heap)
            if skip is not None and skip(a):
                continue
            if exact:
                yield a
            else:
                heapq.heappush(heap, (-self.singleton(a).weight, a, True))

    def singleton(self, a: int) -> Cluster:
        return Cluster((a,), self.state.coverage_mask[a], 0, (self.combo(a),),
                       bin(self.critical_cover(a)).count("1"))

    def make_cluster(self, members: tuple[int, ...]) -> Cluster | None:
        """Cluster of ``members`` or ``None`` if it puts a critical device in collision."""
        if len(members) == 1:
            return self.singleton(members[0])
        once = multi = tx = 0
        for a in members:
            cov = self.state.coverage_mask[a]
            multi |= once & cov
            once |= cov
            tx |= 1 << a
        interfered = multi & self.state.wanting_mask & ~tx
        if interfered & self.critical or tx & self.critical:
            return None
        excluded = tx | interfered
        combos = tuple(self.combo(a, excluded) for a in members)
        crit = sum(bin(self.critical_cover(a)).count("1") for a in members)
        return Cluster(members, once, interfered, combos, crit)

    def overlaps(self, a: int, b: int) -> bool:
        return bool(self.wanting_cover(a) & self.wanting_cover(b))

    def enumerate_clusters(self, max_size: int) -> list[Cluster]:
        """All feasible inseparable transmitter sets of size ``<= max_size``.

        Inseparable means the members form a connected graph under wanting
        coverage overlap. Feasibility (no critical member or critical device
        in collision) is inherited by subsets, so infeasible sets are not
        extended.
        """
        if max_size < 1:
            raise ValueError("max_size must be >= 1")
        cands = self.feasible_singletons
        nbr = [0] * len(cands)
        for i, a in enumerate(cands):
            for j in range(i + 1, len(cands)):
                if self.overlaps(a, cands[j]):
                    nbr[i] |= 1 << j
                    nbr[j] |= 1 << i
        found: list[Cluster] = []

        def feasible_multi(members_idx):
            once = multi = tx = 0
            for i in members_idx:
                a = cands[i]
                cov = self.state.coverage_mask[a]
                multi |= once & cov
                once |= cov
                tx |= 1 << a
            return not (multi & self.state.wanting_mask & ~tx & self.critical)

        # connected induced subgraphs, each generated once (root = smallest index)
        def extend(sub: list[int], sub_mask: int, ext: int, excl_nbrs: int, root: int):
            cl = self.make_cluster(tuple(cands[i] for i in sub))
            if cl is None:
                return
            found.append(cl)
            if len(sub) == max_size:
                return
            while ext:
                low = ext & -ext
                w = low.bit_length() - 1
                ext ^= low
                new_sub = sub + [w]
                if not feasible_multi(new_sub):
                    continue
                # exclusive neighbourhood of w: larger than root, not in or next to sub
                fresh = nbr[w] & ~sub_mask & ~excl_nbrs & ~((1 << (root + 1)) - 1)
                extend(new_sub, sub_mask | low, ext | fresh, excl_nbrs | nbr[w] | low, root)

        for r in range(len(cands)):
            ext = nbr[r] & ~((1 << (r + 1)) - 1)
            extend([r], 1 << r, ext, nbr[r] | 1 << r, r)
        found.sort(key=lambda c: (len(c.members), sorted(c.members)))
        return found

    def wanting_coverage_of(self, cl: Cluster) -> int:
        return cl.coverage & self.state.wanting_mask

    def graph_over(self, clusters: list[Cluster]) -> CooperationGraph:
        covers = [self.wanting_coverage_of(c) for c in clusters]
        n = len(clusters)
        adj = [0] * n
        for i in range(n):
            ci = covers[i]
            for j in range(i + 1, n):
                if not ci & covers[j]:
                    adj[i] |= 1 << j
                    adj[j] |= 1 << i
        return CooperationGraph(list(clusters), adj)


class PackingBudgetExceeded(RuntimeError):
    pass


DEFAULT_PACKING_BUDGET = 2_000_000


class TransmitterPacking:
    """Best clique of the (extended) cooperation graph, searched over transmitters.

    Critical devices are never members or interfered devices of a feasible
    cluster, so each member keeps its singleton layer-1 clique and a cluster's
    (covered critical, critical value) pair is the sum of its members' pairs.
    Cliques of the extended graph correspond one to one with transmitter sets
    whose wanting-overlap components have at most ``max_size`` members and in
    which no critical device lies in two zones. The first two weight
    components are therefore maximized exactly over transmitters, by
    branching on the critical device each transmitter would cover. The
    secondary component is then raised greedily by adding transmitters that
    reach no critical device, heaviest first.
    """

    def __init__(self, builder: CoopBuilder, max_size: int, budget: int = DEFAULT_PACKING_BUDGET):
        if max_size < 1:
            raise ValueError("max_size must be >= 1")
        self.b = builder
        self.state = builder.state
        self.max_size = max_size
        self.budget = budget
        self.nodes = 0

    # -- helpers
    def _component(self, chosen: list[int], a: int) -> list[int]:
        """Members of the overlap component ``a`` would join."""
        comp = [a]
        cover = self.b.wanting_cover(a)
        rest = [x for x in chosen if x != a]
        grown = True
        while grown:
            grown = False
            for x in rest:
                wc = self.b.wanting_cover(x)
                if wc & cover:
                    comp.append(x)
                    cover |= wc
                    rest.remove(x)
                    grown = True
                    break
        return comp

    def _fits(self, chosen: list[int], a: int) -> bool:
        if self.max_size == 1:
            cover = self.b.wanting_cover(a)
            return not any(self.b.wanting_cover(x) & cover for x in chosen)
        return len(self._component(chosen, a)) <= self.max_size

    def clusters_of(self, chosen) -> list[Cluster]:
        rest = sorted(chosen)
        out = []
        while rest:
            comp = sorted(self._component(rest[1:], rest[0]))
            for x in comp:
                rest.remove(x)
            cl = self.b.make_cluster(tuple(comp))
            if cl is None:
                raise AssertionError("packing produced an infeasible cluster")
            out.append(cl)
        out.sort(key=lambda c: c.members)
        return out

    # -- exact part
    def _critical_pack(self) -> list[int]:
        b = self.b
        crit = b.critical
        if not crit:
            return []
        cands = [a for a in b.feasible_singletons if b.critical_cover(a)]
        ccov = {a: b.critical_cover(a) for a in cands}
        contrib: dict[int, dict[int, int]] = {}
        for a in cands:
            combo = b.combo(a)
            row = {}
            for d in bits(ccov[a]):
                q = 0
                if d in combo.targets:
                    q = quantize(link_weight(self.state.erasures[a][d]))
                row[d] = lex_pack(1, q)
            contrib[a] = row
        total = {a: sum(contrib[a].values()) for a in cands}
        covering = {d: [a for a in cands if ccov[a] >> d & 1] for d in bits(crit)}
        for d in covering:
            covering[d].sort(key=lambda a: (-contrib[a][d], a))
        best = [-1, []]
        chosen: list[int] = []

        def bound(free: int, alive: set) -> int:
            s = 0
            for d in bits(free):
                for a in covering[d]:
                    if a in alive:
                        s += contrib[a][d]
                        break
            return s

        def dfs(free: int, alive: set, value: int):
            self.nodes += 1
            if self.nodes > self.budget:
                raise PackingBudgetExceeded(f"transmitter packing exceeded {self.budget} nodes")
            if value > best[0]:
                best[0], best[1] = value, list(chosen)
            if value + bound(free, alive) <= best[0]:
                return
            # branch on the free critical device with the fewest live coverers;
            # devices nobody alive can reach are dropped
            pick, opts = -1, None
            for d in bits(free):
                live = [a for a in covering[d] if a in alive]
                if not live:
                    free &= ~(1 << d)
                elif opts is None or len(live) < len(opts):
                    pick, opts = d, live
            if opts is None:
                return
            for a in sorted(opts, key=lambda a: (-total[a], a)):
                if not self._fits(chosen, a):
                    continue
                chosen.append(a)
                dfs(free & ~ccov[a], {x for x in alive if not ccov[x] & ccov[a]} - {a}, value + total[a])
                chosen.pop()
            dfs(free & ~(1 << pick), {x for x in alive if not ccov[x] >> pick & 1}, value)

        dfs(crit, set(cands), 0)
        return sorted(best[1])

    # -- greedy part
    def _fill(self, chosen: list[int]) -> list[Cluster]:
        b = self.b
        clusters = {cl.members: cl for cl in self.clusters_of(chosen)}
        extra = [a for a in b.feasible_singletons if a not in chosen and not b.critical_cover(a)]
        for a in b.by_weight(extra, skip=lambda a: not self._fits(chosen, a)):
            if b.combo(a).empty:
                continue
            comp = self._component(chosen, a)
            old = [m for m in clusters if set(m) & set(comp)]
            new = b.make_cluster(tuple(sorted(comp)))
            if new is None:
                continue
            if new.weight > sum(clusters[m].weight for m in old):
                for m in old:
                    del clusters[m]
                clusters[new.members] = new
                chosen.append(a)
        return sorted(clusters.values(), key=lambda c: c.members)

    def solve(self) -> tuple[Cluster, ...]:
        return tuple(self._fill(self._critical_pack()))


def total_weight(clusters) -> int:
    return sum(c.weight for c in clusters)


def feasible_singletons(view: RoundView) -> frozenset[int]:
    return frozenset(CoopBuilder(view).feasible_singletons)


def build_cooperation_graph(view: RoundView, builder: CoopBuilder | None = None) -> CooperationGraph:
    b = builder or CoopBuilder(view)
    return b.graph_over([b.singleton(a) for a in b.feasible_singletons])


def enumerate_clusters(view: RoundView, max_size: int, builder: CoopBuilder | None = None) -> list[Cluster]:
    return (builder or CoopBuilder(view)).enumerate_clusters(max_size)


def build_extended_graph(view: RoundView, clusters: list[Cluster], builder: CoopBuilder | None = None) -> CooperationGraph:
    return (builder or CoopBuilder(view)).graph_over(clusters)
