"""Exact maximum-weight clique search.

Weights are compared on an integer grid (``WEIGHT_RESOLUTION``) so that the
branch-and-bound search and the brute-force oracle agree exactly on ties.
Among optimal cliques the lexicographically smallest sorted vertex tuple is
returned; the empty clique is the answer when every weight is zero.

Callers that need a lexicographic objective pass integer weights that already
encode it (see :func:`lex_weight`).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

WEIGHT_RESOLUTION = 1e-9
DEFAULT_NODE_BUDGET = 5_000_000

# Component stride for lexicographic weights; each component sum must stay below it.
LEX_BASE = 1 << 64


class CliqueBudgetExceeded(RuntimeError):
    pass


def quantize(w: float) -> int:
    return int(round(w / WEIGHT_RESOLUTION))


def lex_pack(*components: int) -> int:
    """Pack nonnegative grid integers into one integer ordered lexicographically."""
    total = 0
    for q in components:
        if not 0 <= q < LEX_BASE:
            raise ValueError("lexicographic component out of range")
        total = total * LEX_BASE + q
    return total


def lex_weight(*components: float) -> int:
    """Like :func:`lex_pack` for real components, quantized first."""
    return lex_pack(*(quantize(c) for c in components))


def lex_unpack(value: int, width: int) -> tuple[int, ...]:
    out = []
    for _ in range(width):
        value, q = divmod(value, LEX_BASE)
        out.append(q)
    return tuple(reversed(out))


@dataclass
class WeightedGraph:
    weights: list
    adj: list[int]

    def __post_init__(self):
        n = len(self.weights)
        if len(self.adj) != n:
            raise ValueError("adjacency size mismatch")
        for v in range(n):
            if self.adj[v] >> v & 1:
                raise ValueError("adjacency must have a false diagonal")
            if self.adj[v] >> n:
                raise ValueError("adjacency refers to missing vertices")
            w = self.weights[v]
            if w < 0:
                raise ValueError("weights must be nonnegative")
        for v in range(n):
            for u in _bits(self.adj[v]):
                if not self.adj[u] >> v & 1:
                    raise ValueError("adjacency must be symmetric")

    @classmethod
    def trusted(cls, weights: list, adj: list[int]) -> "WeightedGraph":
        """Skip validation; for graphs built internally with known structure."""
        g = cls.__new__(cls)
        g.weights, g.adj = weights, adj
        return g

    @property
    def n(self) -> int:
        return len(self.weights)

    @classmethod
    def from_matrix(cls, weights: Sequence[float], matrix) -> "WeightedGraph":
        m = np.asarray(matrix, dtype=bool)
        adj = [sum(1 << int(j) for j in np.flatnonzero(m[i]) if j != i) for i in range(len(weights))]
        return cls(list(weights), adj)

    def int_weights(self) -> list[int]:
        return [w if isinstance(w, int) else quantize(w) for w in self.weights]

    def is_clique(self, vertices) -> bool:
        vs = list(vertices)
        return all(self.adj[a] >> b & 1 for a, b in combinations(vs, 2))

    def weight_of(self, vertices) -> float:
        return sum(self.weights[v] for v in vertices)


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _color_bound(cand: int, adj: list[int], w: list[int]) -> tuple[list[int], list[int]]:
    """Greedy colouring of ``cand``; returns vertices and cumulative class-max bounds.

    The i-th bound covers every vertex of colour classes up to that vertex's class.
    """
    order: list[int] = []
    bounds: list[int] = []
    total = 0
    rest = cand
    while rest:
        q = rest
        cls_max = 0
        members = []
        while q:
            low = q & -q
            v = low.bit_length() - 1
            members.append(v)
            if w[v] > cls_max:
                cls_max = w[v]
            q &= ~adj[v] & ~low
            rest &= ~low
        total += cls_max
        for v in members:
            order.append(v)
            bounds.append(total)
    return order, bounds


class _Search:
    def __init__(self, adj: list[int], w: list[int], budget: int):
        self.adj = adj
        self.w = w
        self.budget = budget
        self.nodes = 0
        self.best = 0
        self.best_set: list[int] = []

    def tick(self):
        self.nodes += 1
        if self.nodes > self.budget:
            raise CliqueBudgetExceeded(f"clique search exceeded {self.budget} nodes")

    def greedy(self, cand: int):
        """Heaviest-first clique, used as the starting incumbent."""
        chosen, weight = [], 0
        while cand:
            v = max(_bits(cand), key=self.w.__getitem__)
            chosen.append(v)
            weight += self.w[v]
            cand &= self.adj[v]
        if weight > self.best:
            self.best, self.best_set = weight, chosen

    def run(self, cand: int) -> list[int]:
        self.greedy(cand)
        self._expand(0, cand, [])
        return self.best_set

    def _expand(self, weight: int, cand: int, chosen: list[int]):
        self.tick()
        order, bounds = _color_bound(cand, self.adj, self.w)
        for i in range(len(order) - 1, -1, -1):
            if weight + bounds[i] <= self.best:
                return
            v = order[i]
            nw = weight + self.w[v]
            chosen.append(v)
            if nw > self.best:
                self.best, self.best_set = nw, list(chosen)
            sub = cand & self.adj[v]
            if sub:
                self._expand(nw, sub, chosen)
            chosen.pop()
            cand &= ~(1 << v)


def max_weight_clique(g: WeightedGraph, node_budget: int = DEFAULT_NODE_BUDGET) -> list[int]:
    """Return the lexicographically smallest maximum-weight clique of ``g``.

    Ties are broken inside the search: every weight is scaled by ``2**(n+1)``
    and vertex ``v`` gets a bonus ``2**(n-v)``. The bonuses of any set sum to
    less than one weight unit, and among equal-weight cliques the one holding
    the smallest vertex not shared with the other gets the larger bonus. The
    only disagreement with the lexicographic order is a clique versus its own
    prefix, which can only tie when the extra vertices weigh nothing, so
    trailing zero-weight vertices are stripped at the end.
    """
    n = g.n
    if n == 0:
        return []
    w = g.int_weights()
    if not any(w):
        return []
    # search a relabelled copy: heavy, high-degree vertices first
    perm = sorted(range(n), key=lambda v: (-w[v], -bin(g.adj[v]).count("1"), v))
    inv = [0] * n
    for i, v in enumerate(perm):
        inv[v] = i
    radj = []
    for v in perm:
        m = 0
        for u in _bits(g.adj[v]):
            m |= 1 << inv[u]
        radj.append(m)
    scale = n + 1
    rw = [(w[v] << scale) + (1 << (n - v)) for v in perm]
    found = sorted(perm[i] for i in _Search(radj, rw, node_budget).run((1 << n) - 1))
    while found and w[found[-1]] == 0:
        found.pop()
    return found


def brute_force_clique(g: WeightedGraph) -> list[int]:
    """Exhaustive oracle with the same tie-break; ``n <= 20`` only."""
    n = g.n
    if n > 20:
        raise ValueError("brute force limited to 20 vertices")
    w = g.int_weights()
    best: tuple[int, tuple[int, ...]] = (0, ())
    for mask in range(1, 1 << n):
        vs = tuple(_bits(mask))
        if not all(g.adj[a] >> b & 1 for a, b in combinations(vs, 2)):
            continue
        total = sum(w[v] for v in vs)
        if total > best[0] or (total == best[0] and vs < best[1]):
            best = (total, vs)
    return list(best[1])
