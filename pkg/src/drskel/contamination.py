"""Adversarial contamination of clean datasets.

Two noise models: whole-sample replacement with a fixed probability
(Huber), and independent per-cell corruption.  The adversarial
distribution is a uniform mixture of random Bayesian networks sharing the
clean data's cardinalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .bayesnet import Dataset, DiscreteBayesNet, random_network, sample
from .errors import InvariantError


class NoiseModel(str, Enum):
    NONE = "none"
    HUBER = "huber"
    INDEPENDENT = "independent"


DEFAULT_ADVERSARY_COMPONENTS = 20


def default_adversary(
    cards: tuple[int, ...],
    seed: int,
    k: int = DEFAULT_ADVERSARY_COMPONENTS,
    max_parents: int = 2,
) -> list[DiscreteBayesNet]:
    """Uniform mixture components: k random networks over the same variables."""
    n = len(cards)
    return [
        random_network(n, min(max_parents, n - 1), list(cards), seed=seed + 7919 * i)
        for i in range(k)
    ]


@dataclass(frozen=True)
class ContaminationConfig:
    model: NoiseModel = NoiseModel.NONE
    zeta: float = 0.0
    seed: int = 0
    adversary: list[DiscreteBayesNet] | None = None
    uniform_failure: bool = False  # independent model: uniform cells instead

    def __post_init__(self):
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError("zeta must lie in [0, 1]")

    def components(self, cards: tuple[int, ...]) -> list[DiscreteBayesNet]:
        if self.adversary is not None:
            for net in self.adversary:
                if tuple(net.cards) != tuple(cards):
                    raise InvariantError(
                        "adversary cardinalities differ from the clean data"
                    )
            return self.adversary
        return default_adversary(cards, self.seed)


def contaminate(data: Dataset, config: ContaminationConfig, return_mask: bool = False):
    """Dispatch on the configured noise model."""
    if config.model == NoiseModel.NONE:
        mask = np.zeros(data.rows.shape, dtype=bool)
        return (data, mask) if return_mask else data
    if config.model == NoiseModel.HUBER:
        return huber_contaminate(data, config, return_mask)
    return independent_failure(data, config, return_mask)


def _adversary_rows(
    components: list[DiscreteBayesNet], count: int, rng: np.random.Generator
) -> np.ndarray:
    """One sample per requested row, each from a uniformly chosen component."""
    n = components[0].n
    out = np.zeros((count, n), dtype=np.int64)
    if count == 0:
        return out
    picks = rng.integers(len(components), size=count)
    for c in np.unique(picks):
        rows_c = (picks == c).nonzero()[0]
        draw = sample(components[c], len(rows_c), seed=int(rng.integers(2**63)))
        out[rows_c] = draw.rows
    return out


def huber_contaminate(
    data: Dataset, config: ContaminationConfig, return_mask: bool = False
):
    """Replace each row wholesale with probability zeta by an adversarial
    sample; untouched rows are bitwise identical to the input."""
    rng = np.random.default_rng(config.seed)
    replaced = rng.random(data.m) < config.zeta
    rows = data.rows.copy()
    count = int(replaced.sum())
    if count:
        comps = config.components(data.cards)
        rows[replaced] = _adversary_rows(comps, count, rng)
    out = Dataset(cards=data.cards, rows=rows)
    if return_mask:
        return out, replaced
    return out


def independent_failure(
    data: Dataset, config: ContaminationConfig, return_mask: bool = False
):
    """Corrupt each cell independently with probability zeta.

    Replacement values come from the matching coordinate of one adversarial
    sample per row; with uniform_failure they are uniform over categories.
    """
    rng = np.random.default_rng(config.seed)
    mask = rng.random(data.rows.shape) < config.zeta
    rows = data.rows.copy()
    if mask.any():
        if config.uniform_failure:
            repl = np.zeros(data.rows.shape, dtype=np.int64)
            for j, c in enumerate(data.cards):
                repl[:, j] = rng.integers(c, size=data.m)
        else:
            comps = config.components(data.cards)
            repl = _adversary_rows(comps, data.m, rng)
        rows[mask] = repl[mask]
    out = Dataset(cards=data.cards, rows=rows)
    if return_mask:
        return out, mask
    return out
