"""Greedy hill-climbing DAG search under the BIC score.

Starts from the empty graph and repeatedly applies the single best
improving move among edge additions, deletions and reversals, maintaining
acyclicity.  An optional skeleton restricts additions and reversals to its
undirected edges.  Family scores are cached: a move only rescores the
node(s) whose parent sets change.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bayesnet import Dag, Dataset, family_score
from .skeleton import Skeleton

IMPROVEMENT_EPS = 1e-9
_MOVE_ORDER = {"add": 0, "delete": 1, "reverse": 2}


class _SearchState:
    def __init__(self, data: Dataset):
        self.data = data
        self.n = data.n
        self.parents: list[set[int]] = [set() for _ in range(self.n)]
        self._cache: dict[tuple[int, tuple[int, ...]], float] = {}

    def family(self, v: int, parents: set[int]) -> float:
        key = (v, tuple(sorted(parents)))
        hit = self._cache.get(key)
        if hit is None:
            hit = family_score(self.data, v, sorted(parents))
            self._cache[key] = hit
        return hit

    def creates_cycle(self, u: int, v: int) -> bool:
        """Would adding u -> v close a directed cycle (path v ~> u)?"""
        stack = [v]
        seen = {v}
        children = [
            [c for c in range(self.n) if p in self.parents[c]]
            for p in range(self.n)
        ]
        while stack:
            x = stack.pop()
            if x == u:
                return True
            for c in children[x]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return False

    def edges(self) -> set[tuple[int, int]]:
        return {(p, v) for v in range(self.n) for p in self.parents[v]}


def hill_climb(
    data: Dataset,
    skeleton: Skeleton | None = None,
    max_iters: int = 10**6,
    seed: int = 0,
    restarts: int = 0,
) -> Dag:
    """Best-first local search; deterministic tie-break by
    (move type, edge) in lexicographic order.

    restarts > 0 reruns the search from random starting graphs (seeded) and
    keeps the best-scoring result; the default is plain single-start search.
    """
    allowed = None
    if skeleton is not None:
        allowed = {tuple(sorted(e)) for e in skeleton.edge_tuples()}
    best_dag, best_score = _climb_once(data, allowed, max_iters, initial=None)
    if restarts > 0:
        rng = np.random.default_rng(seed)
        for _ in range(restarts):
            init = _random_start(data.n, allowed, rng)
            dag, score = _climb_once(data, allowed, max_iters, initial=init)
            if score > best_score + IMPROVEMENT_EPS:
                best_dag, best_score = dag, score
    return best_dag


def _random_start(n, allowed, rng) -> set[tuple[int, int]]:
    order = rng.permutation(n)
    rank = {int(v): i for i, v in enumerate(order)}
    pairs = (
        [(u, v) for u in range(n) for v in range(n) if u < v]
        if allowed is None
        else sorted(allowed)
    )
    edges = set()
    for u, v in pairs:
        if rng.random() < 0.25:
            edges.add((u, v) if rank[u] < rank[v] else (v, u))
    return edges


def _climb_once(data, allowed, max_iters, initial=None):
    st = _SearchState(data)
    if initial:
        for u, v in initial:
            st.parents[v].add(u)
    node_scores = [st.family(v, st.parents[v]) for v in range(st.n)]
    total = float(sum(node_scores))

    for _ in range(max_iters):
        best = None  # (gain, move_rank, (u, v), apply)
        for u in range(st.n):
            for v in range(st.n):
                if u == v or u in st.parents[v] or v in st.parents[u]:
                    continue
                if allowed is not None and (min(u, v), max(u, v)) not in allowed:
                    continue
                # addition u -> v
                if st.creates_cycle(u, v):
                    continue
                gain = st.family(v, st.parents[v] | {u}) - node_scores[v]
                cand = (gain, _MOVE_ORDER["add"], (u, v))
                if best is None or _better(cand, best):
                    best = cand
        for u, v in sorted(st.edges()):
            # deletion u -> v
            gain = st.family(v, st.parents[v] - {u}) - node_scores[v]
            cand = (gain, _MOVE_ORDER["delete"], (u, v))
            if best is None or _better(cand, best):
                best = cand
            # reversal u -> v  =>  v -> u
            st.parents[v].discard(u)
            cycle = st.creates_cycle(v, u)
            st.parents[v].add(u)
            if not cycle:
                gain = (
                    st.family(v, st.parents[v] - {u})
                    - node_scores[v]
                    + st.family(u, st.parents[u] | {v})
                    - node_scores[u]
                )
                cand = (gain, _MOVE_ORDER["reverse"], (u, v))
                if best is None or _better(cand, best):
                    best = cand
        if best is None or best[0] <= IMPROVEMENT_EPS:
            break
        gain, move, (u, v) = best
        if move == _MOVE_ORDER["add"]:
            st.parents[v].add(u)
            node_scores[v] = st.family(v, st.parents[v])
        elif move == _MOVE_ORDER["delete"]:
            st.parents[v].discard(u)
            node_scores[v] = st.family(v, st.parents[v])
        else:
            st.parents[v].discard(u)
            st.parents[u].add(v)
            node_scores[v] = st.family(v, st.parents[v])
            node_scores[u] = st.family(u, st.parents[u])
        total += gain

    return Dag(n=st.n, edges=frozenset(st.edges())), total


def _better(cand, best) -> bool:
    """Strictly larger gain wins; ties go to the smaller (move, edge)."""
    if cand[0] > best[0] + IMPROVEMENT_EPS:
        return True
    if abs(cand[0] - best[0]) <= IMPROVEMENT_EPS:
        return (cand[1], cand[2]) < (best[1], best[2])
    return False
