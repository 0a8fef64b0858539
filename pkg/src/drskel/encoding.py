"""Categorical encodings into {-1, 0, 1}-valued vectors.

A variable with c categories maps to a vector of length c - 1.  The last
category is the reference: the zero vector under dummy coding, the
all-minus-one vector under unweighted effects coding.  Encodings of whole
samples are concatenations in node index order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DimensionError


class EncodingScheme(str, Enum):
    DUMMY = "dummy"
    EFFECTS = "effects"


def scheme_from_name(name: str) -> EncodingScheme:
    try:
        return EncodingScheme(name)
    except ValueError:
        raise ValueError(f"unknown encoding scheme {name!r}; use 'dummy' or 'effects'")


def encoding_table(scheme: EncodingScheme, card: int) -> np.ndarray:
    """All c encoding vectors as a (c, c-1) array, one row per category."""
    if card < 2:
        raise ValueError(f"cardinality must be >= 2, got {card}")
    table = np.zeros((card, card - 1))
    table[: card - 1] = np.eye(card - 1)
    if scheme == EncodingScheme.EFFECTS:
        table[card - 1] = -1.0
    return table


def encode_value(scheme: EncodingScheme, card: int, value: int) -> np.ndarray:
    """Encoding vector of one category value (length card - 1)."""
    if not 0 <= value < card:
        raise ValueError(f"value {value} out of range for cardinality {card}")
    return encoding_table(scheme, card)[value].copy()


@dataclass(frozen=True)
class EncodedView:
    """Index layout of the concatenated encoding of one sample.

    offsets[i] is the start of node i's slice in the full vector of length
    rho_total; excluding a target node r compresses the remaining slices
    into a vector of length rho_total - rho[r] in node index order.
    """

    cards: tuple[int, ...]
    scheme: EncodingScheme

    @property
    def rho(self) -> tuple[int, ...]:
        return tuple(c - 1 for c in self.cards)

    @property
    def offsets(self) -> tuple[int, ...]:
        out = [0]
        for c in self.cards[:-1]:
            out.append(out[-1] + c - 1)
        return tuple(out)

    @property
    def rho_total(self) -> int:
        return sum(self.cards) - len(self.cards)

    def rho_excluding(self, r: int) -> int:
        return self.rho_total - (self.cards[r] - 1)

    def tables(self) -> list[np.ndarray]:
        return [encoding_table(self.scheme, c) for c in self.cards]

    def block_slices(self, r: int | None = None) -> dict[int, slice]:
        """Node -> slice into the concatenated vector; excluding r if given,
        slices address the compressed (target-free) layout."""
        out: dict[int, slice] = {}
        pos = 0
        for i, c in enumerate(self.cards):
            if r is not None and i == r:
                continue
            out[i] = slice(pos, pos + c - 1)
            pos += c - 1
        return out


def encode_sample(
    scheme: EncodingScheme,
    cards: Sequence[int],
    row: Sequence[int],
    exclude: int | None = None,
) -> np.ndarray:
    """Concatenated encoding of one sample, skipping `exclude` if given."""
    if len(row) != len(cards):
        raise DimensionError(f"row length {len(row)} != {len(cards)} variables")
    parts = [
        encode_value(scheme, c, int(v))
        for i, (c, v) in enumerate(zip(cards, row))
        if i != exclude
    ]
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


def encode_dataset(
    scheme: EncodingScheme,
    cards: Sequence[int],
    rows: np.ndarray,
    exclude: int | None = None,
) -> np.ndarray:
    """Encodings of every row, shape (m, rho_total) or (m, rho_excluding)."""
    parts = []
    for i, c in enumerate(cards):
        if i == exclude:
            continue
        parts.append(encoding_table(scheme, c)[rows[:, i]])
    return np.concatenate(parts, axis=1) if parts else np.zeros((rows.shape[0], 0))


def l1_distance_tables(scheme: EncodingScheme, cards: Sequence[int]) -> list[np.ndarray]:
    """Per node, the (c, c) matrix of l1 distances between category encodings."""
    out = []
    for c in cards:
        t = encoding_table(scheme, c)
        out.append(np.abs(t[:, None, :] - t[None, :, :]).sum(axis=2))
    return out
