"""Discrete Bayesian networks: representation, sampling, BIC scoring, file I/O.

A network is a DAG over categorical variables with one conditional
probability table (CPT) per node.  CPT rows are indexed by parent
configuration, enumerated lexicographically with the first-listed parent
most significant, so serialization order is fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, DrskelError, InvariantError, NetworkFormatError

CPT_ROW_TOL = 1e-9
MAX_PARENT_CONFIGS = 10**7


def _toposort(n: int, parents: Sequence[Sequence[int]]) -> list[int]:
    """Kahn's algorithm; raises InvariantError on a cycle."""
    indeg = [len(p) for p in parents]
    children: list[list[int]] = [[] for _ in range(n)]
    for v, ps in enumerate(parents):
        for p in ps:
            children[p].append(v)
    queue = sorted(v for v in range(n) if indeg[v] == 0)
    order: list[int] = []
    while queue:
        v = queue.pop(0)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    if len(order) != n:
        raise InvariantError("parent graph contains a cycle")
    return order


@dataclass(frozen=True)
class DiscreteBayesNet:
    """DAG over categorical variables with CPTs.

    names: node names, index order is the canonical node order.
    cards: per-node cardinality (>= 2).
    parents: per-node list of parent indices (order fixes CPT row layout).
    cpts: per node, array of shape (prod parent cards, card); each row a
        distribution over the node's categories.
    """

    names: tuple[str, ...]
    cards: tuple[int, ...]
    parents: tuple[tuple[int, ...], ...]
    cpts: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        n = len(self.names)
        if not (len(self.cards) == len(self.parents) == len(self.cpts) == n):
            raise InvariantError("names, cards, parents, cpts must have equal length")
        if len(set(self.names)) != n:
            raise InvariantError("node names must be unique")
        for name, c in zip(self.names, self.cards):
            if c < 2:
                raise InvariantError(f"node {name!r}: cardinality must be >= 2, got {c}")
        _toposort(n, self.parents)
        for v in range(n):
            n_cfg = int(np.prod([self.cards[p] for p in self.parents[v]], dtype=np.int64))
            cpt = self.cpts[v]
            if cpt.shape != (n_cfg, self.cards[v]):
                raise InvariantError(
                    f"node {self.names[v]!r}: CPT shape {cpt.shape} does not match "
                    f"({n_cfg}, {self.cards[v]})"
                )
            if np.any(cpt < 0):
                raise InvariantError(f"node {self.names[v]!r}: CPT has negative entries")
            if np.any(np.abs(cpt.sum(axis=1) - 1.0) > CPT_ROW_TOL):
                raise InvariantError(f"node {self.names[v]!r}: CPT rows must sum to 1")

    @property
    def n(self) -> int:
        return len(self.names)

    def topological_order(self) -> list[int]:
        return _toposort(self.n, self.parents)

    def skeleton_edges(self) -> set[frozenset[int]]:
        """Undirected edge set of the DAG."""
        return {
            frozenset((p, v)) for v in range(self.n) for p in self.parents[v]
        }

    def neighbor_sets(self) -> list[set[int]]:
        """Per-node set of parents and children."""
        out: list[set[int]] = [set() for _ in range(self.n)]
        for e in self.skeleton_edges():
            u, v = tuple(e)
            out[u].add(v)
            out[v].add(u)
        return out

    def parent_config_index(self, v: int, row: np.ndarray) -> int:
        """Row index into node v's CPT for the parent values found in `row`."""
        idx = 0
        for p in self.parents[v]:
            idx = idx * self.cards[p] + int(row[p])
        return idx

    def joint_probabilities(self) -> tuple[np.ndarray, np.ndarray]:
        """All joint states (lexicographic order) and their probabilities.

        Only intended for small networks; the caller guards the state count.
        """
        states = enumerate_states(self.cards)
        probs = np.ones(len(states))
        for v in range(self.n):
            if self.parents[v]:
                radix = np.array([self.cards[p] for p in self.parents[v]], dtype=np.int64)
                weights = np.concatenate([np.cumprod(radix[::-1])[-2::-1], [1]])
                cfg = states[:, list(self.parents[v])] @ weights
            else:
                cfg = np.zeros(len(states), dtype=np.int64)
            probs *= self.cpts[v][cfg, states[:, v]]
        return states, probs


def enumerate_states(cards: Sequence[int]) -> np.ndarray:
    """All joint category assignments in lexicographic order (first node most
    significant), shape (prod cards, n)."""
    grids = np.meshgrid(*[np.arange(c) for c in cards], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


@dataclass(frozen=True)
class Dataset:
    """m x n table of category indices with per-variable cardinalities."""

    cards: tuple[int, ...]
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        object.__setattr__(self, "rows", rows)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise InvariantError("dataset must contain at least one row")
        if rows.shape[1] != len(self.cards) or len(self.cards) < 2:
            raise InvariantError("dataset must cover at least two variables")
        if any(c < 2 for c in self.cards):
            raise InvariantError("cardinalities must be >= 2")
        cards = np.asarray(self.cards, dtype=np.int64)
        if np.any(rows < 0) or np.any(rows >= cards[None, :]):
            raise InvariantError("category index out of range")

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over n nodes."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(self.edges))
        parents: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            if u == v:
                raise InvariantError(f"self-loop on node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InvariantError(f"edge ({u}, {v}) out of range")
            parents[v].append(u)
        _toposort(self.n, parents)

    def parent_lists(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in sorted(self.edges):
            out[v].append(u)
        return out

    def undirected_edges(self) -> set[frozenset[int]]:
        return {frozenset(e) for e in self.edges}


def sample(net: DiscreteBayesNet, m: int, seed: int) -> Dataset:
    """Draw m i.i.d. joint samples by ancestral sampling in topological order."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    rows = np.zeros((m, net.n), dtype=np.int64)
    for v in net.topological_order():
        ps = net.parents[v]
        if ps:
            cfg = np.zeros(m, dtype=np.int64)
            for p in ps:
                cfg = cfg * net.cards[p] + rows[:, p]
        else:
            cfg = np.zeros(m, dtype=np.int64)
        cum = np.cumsum(net.cpts[v], axis=1)
        u = rng.random(m)
        rows[:, v] = np.minimum(
            (u[:, None] >= cum[cfg]).sum(axis=1), net.cards[v] - 1
        )
    return Dataset(cards=net.cards, rows=rows)


def _family_counts(data: Dataset, v: int, parents: Sequence[int]) -> np.ndarray:
    """Counts N[config, value] for node v under the given parent set."""
    n_cfg = 1
    for p in parents:
        n_cfg *= data.cards[p]
    if n_cfg > MAX_PARENT_CONFIGS:
        raise DrskelError(
            f"node {v}: parent set yields {n_cfg} configurations "
            f"(limit {MAX_PARENT_CONFIGS})"
        )
    cfg = np.zeros(data.m, dtype=np.int64)
    for p in parents:
        cfg = cfg * data.cards[p] + data.rows[:, p]
    flat = cfg * data.cards[v] + data.rows[:, v]
    counts = np.bincount(flat, minlength=n_cfg * data.cards[v])
    return counts.reshape(n_cfg, data.cards[v])


def family_score(data: Dataset, v: int, parents: Sequence[int]) -> float:
    """BIC contribution of one node: multinomial log-likelihood minus penalty."""
    counts = _family_counts(data, v, parents)
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = np.where(counts > 0, counts * np.log(counts / totals), 0.0)
    n_params = (data.cards[v] - 1) * (counts.shape[0])
    return float(ll.sum()) - 0.5 * np.log(data.m) * n_params


def bic_score(dag: Dag, data: Dataset) -> float:
    """BIC of a DAG: sum of family log-likelihoods at the MLE minus
    (ln m / 2) per free parameter.  Higher is better; 0 ln 0 := 0."""
    if dag.n != data.n:
        raise DimensionError(
            f"dag has {dag.n} nodes but dataset has {data.n} columns"
        )
    parent_lists = dag.parent_lists()
    return sum(family_score(data, v, parent_lists[v]) for v in range(dag.n))


def random_network(
    n: int,
    max_parents: int,
    cards: Sequence[int] | int,
    seed: int,
) -> DiscreteBayesNet:
    """Random DAG with Dirichlet(1) CPT rows; deterministic per seed.

    Topological order is a random permutation; each node draws up to
    max_parents parents uniformly from its predecessors.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if max_parents >= n and n > 1:
        raise ValueError("max_parents must be < n")
    if isinstance(cards, int):
        cards = [cards] * n
    if len(cards) != n:
        raise ValueError("cards must have length n")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    parents: list[tuple[int, ...]] = [() for _ in range(n)]
    for pos in range(n):
        v = int(order[pos])
        preds = order[:pos]
        k = int(rng.integers(0, min(max_parents, len(preds)) + 1))
        if k > 0:
            chosen = rng.choice(preds, size=k, replace=False)
            parents[v] = tuple(int(p) for p in sorted(chosen))
    cpts = []
    for v in range(n):
        n_cfg = int(np.prod([cards[p] for p in parents[v]], dtype=np.int64))
        cpts.append(rng.dirichlet(np.ones(cards[v]), size=n_cfg))
    return DiscreteBayesNet(
        names=tuple(f"X{i}" for i in range(n)),
        cards=tuple(int(c) for c in cards),
        parents=tuple(parents),
        cpts=tuple(cpts),
    )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def save_network(net: DiscreteBayesNet, path: str | Path) -> None:
    """Write the JSON network format (see README)."""
    obj = {
        "nodes": [
            {"name": name, "cardinality": card}
            for name, card in zip(net.names, net.cards)
        ],
        "parents": {
            net.names[v]: [net.names[p] for p in net.parents[v]]
            for v in range(net.n)
        },
        "cpts": {net.names[v]: net.cpts[v].tolist() for v in range(net.n)},
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def network_from_dict(obj: dict) -> DiscreteBayesNet:
    try:
        names = tuple(nd["name"] for nd in obj["nodes"])
        cards = tuple(int(nd["cardinality"]) for nd in obj["nodes"])
    except (KeyError, TypeError) as exc:
        raise NetworkFormatError(f"bad 'nodes' section: {exc}") from exc
    index = {name: i for i, name in enumerate(names)}
    parents = []
    for name in names:
        plist = obj.get("parents", {}).get(name, [])
        try:
            parents.append(tuple(index[p] for p in plist))
        except KeyError as exc:
            raise NetworkFormatError(
                f"node {name!r}: unknown parent name {exc.args[0]!r}"
            ) from exc
    cpts = []
    for name in names:
        if name not in obj.get("cpts", {}):
            raise NetworkFormatError(f"missing CPT for node {name!r}")
        cpts.append(np.asarray(obj["cpts"][name], dtype=np.float64))
    return DiscreteBayesNet(names=names, cards=cards, parents=tuple(parents), cpts=tuple(cpts))


def load_network(path: str | Path) -> DiscreteBayesNet:
    """Parse the JSON network format; errors carry line/field context."""
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return network_from_dict(obj)


def load_fixture(name: str) -> DiscreteBayesNet:
    """Load one of the bundled benchmark networks by name."""
    ref = resources.files("drskel") / "networks" / f"{name}.json"
    if not ref.is_file():
        available = sorted(
            p.name.removesuffix(".json")
            for p in (resources.files("drskel") / "networks").iterdir()
        )
        raise NetworkFormatError(
            f"unknown fixture {name!r}; bundled: {', '.join(available)}"
        )
    return network_from_dict(json.loads(ref.read_text()))


def save_dataset(
    data: Dataset,
    path: str | Path,
    names: Sequence[str] | None = None,
    meta: dict | None = None,
) -> None:
    """Write the dataset CSV: '#' metadata lines, a name header, then one
    comma-separated row of category indices per sample."""
    if names is None:
        names = [f"X{i}" for i in range(data.n)]
    lines = []
    full_meta = {"cardinalities": ",".join(str(c) for c in data.cards)}
    if meta:
        full_meta.update(meta)
    for key, value in full_meta.items():
        lines.append(f"# {key}: {value}")
    lines.append(",".join(names))
    for row in data.rows:
        lines.append(",".join(str(int(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path: str | Path, cards: Sequence[int] | None = None) -> Dataset:
    """Read the dataset CSV.  Cardinalities come from the argument, the
    '# cardinalities:' metadata line, or (last resort) column maxima."""
    names: list[str] | None = None
    rows: list[list[int]] = []
    meta_cards: list[int] | None = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("cardinalities:"):
                meta_cards = [int(t) for t in body.split(":", 1)[1].split(",")]
            continue
        if names is None:
            names = [t.strip() for t in line.split(",")]
            continue
        try:
            rows.append([int(t) for t in line.split(",")])
        except ValueError as exc:
            raise NetworkFormatError(f"{path}: line {lineno}: {exc}") from exc
    if names is None or not rows:
        raise NetworkFormatError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.int64)
    if cards is None:
        cards = meta_cards if meta_cards is not None else [
            max(2, int(arr[:, j].max()) + 1) for j in range(arr.shape[1])
        ]
    try:
        return Dataset(cards=tuple(int(c) for c in cards), rows=arr)
    except InvariantError as exc:
        raise NetworkFormatError(f"{path}: {exc}") from exc


def dataset_names(path: str | Path) -> list[str]:
    """Column names from a dataset CSV header."""
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            return [t.strip() for t in line.split(",")]
    raise NetworkFormatError(f"{path}: no header line")
