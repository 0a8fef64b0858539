"""Recovery metrics: skeleton F1 over all node pairs and held-out BIC."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .bayesnet import Dag, Dataset
from .errors import DimensionError
from .skeleton import Skeleton


def _as_edge_set(edges) -> set[frozenset[int]]:
    if isinstance(edges, Skeleton):
        return set(edges.edges)
    return {frozenset(e) for e in edges}


def f1_skeleton(est, truth, n: int) -> float:
    """F1 (Dice) over all unordered node pairs, edge presence as the label.

    Both sides empty counts as a perfect 1.0; an empty estimate against a
    nonempty truth (or vice versa) is 0.0.
    """
    est_set = _as_edge_set(est)
    truth_set = _as_edge_set(truth)
    for e in est_set | truth_set:
        u, v = tuple(e)
        if not (0 <= u < n and 0 <= v < n):
            raise DimensionError(f"edge {(u, v)} out of range for n={n}")
    tp = len(est_set & truth_set)
    fp = len(est_set - truth_set)
    fn = len(truth_set - est_set)
    if tp == 0:
        return 1.0 if fp == 0 and fn == 0 else 0.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def bic_heldout(
    dag: Dag,
    train: Dataset,
    test: Dataset,
    alpha_smooth: float = 1.0,
    bic_on: str = "test",
) -> float:
    """Penalized log-likelihood of held-out data under CPTs fit on train.

    Parameters use additive (add-alpha) smoothing, so unseen parent
    configurations fall back to the uniform distribution at alpha > 0.
    The penalty is (ln m / 2) per free parameter on the scored split.
    """
    if train.n != test.n or tuple(train.cards) != tuple(test.cards):
        raise DimensionError("train and test datasets are incompatible")
    if dag.n != train.n:
        raise DimensionError(
            f"dag has {dag.n} nodes but data has {train.n} columns"
        )
    if bic_on not in ("test", "full"):
        raise ValueError("bic_on must be 'test' or 'full'")
    scored = (
        test
        if bic_on == "test"
        else Dataset(cards=train.cards, rows=np.vstack([train.rows, test.rows]))
    )
    parent_lists = dag.parent_lists()
    ll = 0.0
    n_params = 0
    for v in range(dag.n):
        ps = parent_lists[v]
        card_v = train.cards[v]
        n_cfg = 1
        for p in ps:
            n_cfg *= train.cards[p]
        counts = np.zeros((n_cfg, card_v))
        cfg_train = np.zeros(train.m, dtype=np.int64)
        for p in ps:
            cfg_train = cfg_train * train.cards[p] + train.rows[:, p]
        np.add.at(counts, (cfg_train, train.rows[:, v]), 1.0)
        theta = counts + alpha_smooth
        theta /= theta.sum(axis=1, keepdims=True)
        cfg_sc = np.zeros(scored.m, dtype=np.int64)
        for p in ps:
            cfg_sc = cfg_sc * train.cards[p] + scored.rows[:, p]
        ll += float(np.log(theta[cfg_sc, scored.rows[:, v]]).sum())
        n_params += (card_v - 1) * n_cfg
    return ll - 0.5 * np.log(scored.m) * n_params
