"""Per-node neighbor regressions assembled into an undirected skeleton.

Each node is regressed on the encodings of all the others with one of the
estimators; nodes whose weight blocks exceed a threshold in Frobenius norm
are declared neighbors, and the skeleton takes the union of the per-node
neighbor sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .bayesnet import Dataset
from .encoding import EncodingScheme
from .errors import DrskelError
from .moments import WeightMatrix

DEFAULT_THRESHOLD = 1e-2


class NodeEstimator(Protocol):
    """Anything that can fit one node-wise regression."""

    def fit_node(
        self, data: Dataset, r: int, scheme: EncodingScheme
    ) -> WeightMatrix: ...


@dataclass(frozen=True)
class Skeleton:
    """Undirected edge set plus the per-ordered-pair block scores."""

    n: int
    edges: frozenset[frozenset[int]]
    scores: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "edges", frozenset(frozenset(e) for e in self.edges)
        )
        for e in self.edges:
            if len(e) != 2:
                raise DrskelError(f"skeleton edge {set(e)} is not a pair")
        if any(v < 0 for v in self.scores.values()):
            raise DrskelError("skeleton scores must be nonnegative")

    def edge_tuples(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted(e)) for e in self.edges)

    def to_dict(self, names: list[str] | None = None) -> dict:
        names = names or [f"X{i}" for i in range(self.n)]
        return {
            "n": self.n,
            "edges": [[names[u], names[v]] for u, v in self.edge_tuples()],
            "scores": {
                f"{names[r]}->{names[i]}": s
                for (r, i), s in sorted(self.scores.items())
            },
        }


def neighbor_scores(w: WeightMatrix) -> dict[int, float]:
    """Block Frobenius norms of a fitted weight matrix."""
    return w.block_norms()


def learn_neighbors(
    data: Dataset,
    r: int,
    estimator: NodeEstimator,
    threshold: float,
    scheme: EncodingScheme,
    scores_out: dict | None = None,
) -> set[int]:
    """Nodes whose blocks exceed the threshold in node r's regression."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    w = estimator.fit_node(data, r, scheme)
    norms = w.block_norms()
    if scores_out is not None:
        scores_out.update({(r, i): v for i, v in norms.items()})
    return {i for i, v in norms.items() if v > threshold}


def learn_skeleton(
    data: Dataset,
    estimator: NodeEstimator,
    threshold: float = DEFAULT_THRESHOLD,
    scheme: EncodingScheme = EncodingScheme.DUMMY,
    aggregate: str = "union",
) -> Skeleton:
    """Run all n node regressions and join the neighbor sets.

    aggregate='union' keeps an edge when either endpoint proposes it (the
    default); 'intersection' requires both.
    """
    if aggregate not in ("union", "intersection"):
        raise ValueError("aggregate must be 'union' or 'intersection'")
    scores: dict[tuple[int, int], float] = {}
    proposed: list[set[int]] = []
    for r in range(data.n):
        try:
            proposed.append(
                learn_neighbors(data, r, estimator, threshold, scheme, scores)
            )
        except DrskelError as exc:
            raise DrskelError(f"node {r}: {exc}") from exc
    edges = set()
    for r in range(data.n):
        for i in proposed[r]:
            if aggregate == "union" or r in proposed[i]:
                edges.add(frozenset((r, i)))
    return Skeleton(n=data.n, edges=frozenset(edges), scores=scores)


def rethreshold(skeleton: Skeleton, threshold: float) -> Skeleton:
    """Rebuild the edge set from stored scores at a new threshold."""
    edges = set()
    for (r, i), v in skeleton.scores.items():
        if v > threshold:
            edges.add(frozenset((r, i)))
    return Skeleton(n=skeleton.n, edges=frozenset(edges), scores=dict(skeleton.scores))
