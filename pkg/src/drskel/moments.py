"""Squared loss, empirical risk, encoding cross-moments, and the
assumption diagnostics used to sanity-check a learning problem.

For a target node r the regression parameter is a block matrix
W in R^(rho_excl x rho_r): one (c_i - 1) x (c_r - 1) block per non-target
node i, stacked in node index order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bayesnet import Dataset, DiscreteBayesNet
from .encoding import EncodedView, EncodingScheme, encode_dataset, encode_sample, encoding_table
from .errors import DimensionError, SingularHessianError, StateSpaceTooLargeError

EIG_FLOOR = 1e-10
MAX_ENUM_STATES = 10**6


@dataclass(frozen=True)
class WeightMatrix:
    """Block-structured regression parameter for one target node."""

    target: int
    cards: tuple[int, ...]
    stacked: np.ndarray = field(repr=False)

    def __post_init__(self):
        view = EncodedView(self.cards, EncodingScheme.DUMMY)
        expected = (view.rho_excluding(self.target), self.cards[self.target] - 1)
        arr = np.asarray(self.stacked, dtype=np.float64)
        if arr.shape != expected:
            raise DimensionError(
                f"stacked weight shape {arr.shape} != expected {expected}"
            )
        if not np.all(np.isfinite(arr)):
            raise DimensionError("weight matrix has non-finite entries")
        object.__setattr__(self, "stacked", arr)

    @classmethod
    def zeros(cls, cards: Sequence[int], target: int) -> "WeightMatrix":
        cards = tuple(cards)
        rho_excl = sum(cards) - len(cards) - (cards[target] - 1)
        return cls(target, cards, np.zeros((rho_excl, cards[target] - 1)))

    @classmethod
    def from_blocks(
        cls, cards: Sequence[int], target: int, blocks: dict[int, np.ndarray]
    ) -> "WeightMatrix":
        w = cls.zeros(cards, target)
        arr = w.stacked.copy()
        slices = EncodedView(tuple(cards), EncodingScheme.DUMMY).block_slices(target)
        for i, b in blocks.items():
            arr[slices[i]] = np.asarray(b, dtype=np.float64)
        return cls(target, tuple(cards), arr)

    def block_slices(self) -> dict[int, slice]:
        return EncodedView(self.cards, EncodingScheme.DUMMY).block_slices(self.target)

    def block(self, i: int) -> np.ndarray:
        return self.stacked[self.block_slices()[i]]

    def block_norms(self) -> dict[int, float]:
        """Frobenius norm of each node block."""
        return {
            i: float(np.linalg.norm(self.stacked[s]))
            for i, s in self.block_slices().items()
        }

    def full_stacked(self) -> np.ndarray:
        """rho_total x rho_r form with zero rows in the target's own slice."""
        view = EncodedView(self.cards, EncodingScheme.DUMMY)
        out = np.zeros((view.rho_total, self.cards[self.target] - 1))
        full = view.block_slices()
        excl = self.block_slices()
        for i, s in excl.items():
            out[full[i]] = self.stacked[s]
        return out


@dataclass(frozen=True)
class CrossMoment:
    """Symmetric PSD matrix of second moments of non-target encodings."""

    target: int
    cards: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.asarray(self.matrix, dtype=np.float64)
        if np.abs(h - h.T).max() > 1e-12:
            raise DimensionError("cross-moment matrix is not symmetric")
        if np.linalg.eigvalsh(h).min() < -1e-10:
            raise DimensionError("cross-moment matrix is not PSD")
        object.__setattr__(self, "matrix", h)

    def block_slices(self) -> dict[int, slice]:
        return EncodedView(self.cards, EncodingScheme.DUMMY).block_slices(self.target)


def squared_loss(w: WeightMatrix, row: Sequence[int], scheme: EncodingScheme) -> float:
    """0.5 * squared norm of the one-sample encoding residual."""
    t = encode_sample(scheme, w.cards, row)[
        EncodedView(w.cards, scheme).block_slices()[w.target]
    ]
    v = encode_sample(scheme, w.cards, row, exclude=w.target)
    resid = t - w.stacked.T @ v
    return 0.5 * float(resid @ resid)


def _encode_split(
    data: Dataset, r: int, scheme: EncodingScheme
) -> tuple[np.ndarray, np.ndarray]:
    """(V, T): non-target and target encodings of every row."""
    v = encode_dataset(scheme, data.cards, data.rows, exclude=r)
    t = encoding_table(scheme, data.cards[r])[data.rows[:, r]]
    return v, t


def empirical_risk(w: WeightMatrix, data: Dataset, scheme: EncodingScheme) -> float:
    """Mean squared loss over the dataset."""
    v, t = _encode_split(data, w.target, scheme)
    resid = t - v @ w.stacked
    return 0.5 * float(np.mean(np.sum(resid * resid, axis=1)))


def per_sample_losses(
    w: WeightMatrix, data: Dataset, scheme: EncodingScheme
) -> np.ndarray:
    v, t = _encode_split(data, w.target, scheme)
    resid = t - v @ w.stacked
    return 0.5 * np.sum(resid * resid, axis=1)


def cross_moment(data: Dataset, r: int, scheme: EncodingScheme) -> CrossMoment:
    """Empirical second-moment matrix of the non-target encodings."""
    v = encode_dataset(scheme, data.cards, data.rows, exclude=r)
    h = (v.T @ v) / data.m
    return CrossMoment(target=r, cards=data.cards, matrix=0.5 * (h + h.T))


def moment_pair(
    source: Dataset | DiscreteBayesNet, r: int, scheme: EncodingScheme
) -> tuple[np.ndarray, np.ndarray, float]:
    """(H, G, c0) with H = E[v v^T], G = E[v t^T], c0 = E[0.5 |t|^2].

    Expectations are empirical for a Dataset and exact (full state
    enumeration weighted by the joint law) for a DiscreteBayesNet.
    """
    if isinstance(source, Dataset):
        v, t = _encode_split(source, r, scheme)
        m = source.m
        return (v.T @ v) / m, (v.T @ t) / m, 0.5 * float(np.mean(np.sum(t * t, axis=1)))
    net = source
    n_states = int(np.prod(net.cards, dtype=np.int64))
    if n_states > MAX_ENUM_STATES:
        raise StateSpaceTooLargeError(
            f"{n_states} joint states exceed the enumeration limit {MAX_ENUM_STATES}"
        )
    states, probs = net.joint_probabilities()
    v = encode_dataset(scheme, net.cards, states, exclude=r)
    t = encoding_table(scheme, net.cards[r])[states[:, r]]
    vw = v * probs[:, None]
    return vw.T @ v, vw.T @ t, 0.5 * float(probs @ np.sum(t * t, axis=1))


def risk_gradient(w: WeightMatrix, data: Dataset, scheme: EncodingScheme) -> np.ndarray:
    """Gradient of the empirical risk at W: H W - G."""
    h, g, _ = moment_pair(data, w.target, scheme)
    return h @ w.stacked - g


def _coord_indices(cards: Sequence[int], r: int, nodes: set[int]) -> np.ndarray:
    """Encoded-coordinate indices of `nodes` in the target-free layout."""
    slices = EncodedView(tuple(cards), EncodingScheme.DUMMY).block_slices(r)
    idx: list[int] = []
    for i in sorted(nodes):
        s = slices[i]
        idx.extend(range(s.start, s.stop))
    return np.asarray(idx, dtype=np.int64)


def _solve_spd(h_ss: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve h_ss x = rhs via symmetric eigendecomposition.

    Raises SingularHessianError when the minimum eigenvalue is at or below
    the floor instead of silently pseudo-inverting.
    """
    if h_ss.shape[0] == 0:
        return np.zeros_like(rhs), float("inf")
    evals, evecs = np.linalg.eigh(h_ss)
    lam_min = float(evals.min())
    if lam_min <= EIG_FLOOR:
        raise SingularHessianError(
            f"restricted cross-moment matrix is singular (lambda_min={lam_min:.3e})",
            lambda_min=lam_min,
        )
    return evecs @ ((evecs.T @ rhs) / evals[:, None]), lam_min


def solve_surrogate(
    source: Dataset | DiscreteBayesNet,
    r: int,
    neighbors: set[int] | Sequence[int],
    scheme: EncodingScheme,
) -> WeightMatrix:
    """Least-squares weights constrained to zero outside the declared
    neighbor set; the first-order optimality condition in closed form."""
    cards = tuple(source.cards)
    nbrs = {int(i) for i in neighbors}
    if r in nbrs:
        raise ValueError("target node cannot be its own neighbor")
    h, g, _ = moment_pair(source, r, scheme)
    idx = _coord_indices(cards, r, nbrs)
    stacked = np.zeros((h.shape[0], cards[r] - 1))
    if len(idx) > 0:
        w_s, _ = _solve_spd(h[np.ix_(idx, idx)], g[idx])
        stacked[idx] = w_s
    return WeightMatrix(target=r, cards=cards, stacked=stacked)


@dataclass(frozen=True)
class DiagnosticsReport:
    """Point estimates of the quantities the recovery assumptions bound.

    lambda_min: smallest eigenvalue of the neighbor-restricted moment matrix
        (+inf when the neighbor set is empty).
    incoherence: block l1/max norm of H_cs H_ss^{-1} (+inf when H_ss is
        singular); alpha_hat = 1 - incoherence.
    beta_min: smallest neighbor-block Frobenius norm of the reference W.
    sigma_hat: largest absolute residual entry; mu_hat: max coordinate of
        the mean absolute residual.  sigma_hat >= mu_hat always.
    """

    target: int
    lambda_min: float
    incoherence: float
    alpha_hat: float
    beta_min: float
    sigma_hat: float
    mu_hat: float

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "lambda_min": self.lambda_min,
            "incoherence": self.incoherence,
            "alpha_hat": self.alpha_hat,
            "beta_min": self.beta_min,
            "sigma_hat": self.sigma_hat,
            "mu_hat": self.mu_hat,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DiagnosticsReport":
        return cls(
            target=int(obj["target"]),
            lambda_min=float(obj["lambda_min"]),
            incoherence=float(obj["incoherence"]),
            alpha_hat=float(obj["alpha_hat"]),
            beta_min=float(obj["beta_min"]),
            sigma_hat=float(obj["sigma_hat"]),
            mu_hat=float(obj["mu_hat"]),
        )


def block_l1_max_norm(a: np.ndarray, row_slices: Sequence[slice]) -> float:
    """Max over row blocks of the entrywise l1 norm of the block."""
    if a.shape[0] == 0 or a.shape[1] == 0:
        return 0.0
    return max(float(np.abs(a[s]).sum()) for s in row_slices)


def diagnostics(
    source: Dataset | DiscreteBayesNet,
    r: int,
    w_ref: WeightMatrix,
    neighbors: set[int] | Sequence[int],
    scheme: EncodingScheme,
) -> DiagnosticsReport:
    cards = tuple(source.cards)
    nbrs = {int(i) for i in neighbors}
    h, _, _ = moment_pair(source, r, scheme)
    idx_s = _coord_indices(cards, r, nbrs)
    co_nodes = sorted(set(range(len(cards))) - nbrs - {r})

    if len(idx_s) == 0:
        lam_min = float("inf")
        incoherence = 0.0
    else:
        evals = np.linalg.eigvalsh(h[np.ix_(idx_s, idx_s)])
        lam_min = float(evals.min())
        if not co_nodes:
            incoherence = 0.0
        elif lam_min <= EIG_FLOOR:
            incoherence = float("inf")
        else:
            idx_c = _coord_indices(cards, r, set(co_nodes))
            cross, _ = _solve_spd(h[np.ix_(idx_s, idx_s)], h[np.ix_(idx_s, idx_c)])
            prod = cross.T  # rows: complement coordinates
            pos = 0
            row_slices = []
            for i in co_nodes:
                row_slices.append(slice(pos, pos + cards[i] - 1))
                pos += cards[i] - 1
            incoherence = block_l1_max_norm(prod, row_slices)

    norms = w_ref.block_norms()
    beta_min = min((norms[i] for i in nbrs), default=float("inf"))

    if isinstance(source, Dataset):
        v, t = _encode_split(source, r, scheme)
        resid = t - v @ w_ref.stacked
        sigma_hat = float(np.abs(resid).max())
        mu_hat = float(np.abs(resid).mean(axis=0).max())
    else:
        states, probs = source.joint_probabilities()
        v = encode_dataset(scheme, cards, states, exclude=r)
        t = encoding_table(scheme, cards[r])[states[:, r]]
        resid = t - v @ w_ref.stacked
        live = probs > 0
        sigma_hat = float(np.abs(resid[live]).max())
        mu_hat = float((probs[:, None] * np.abs(resid)).sum(axis=0).max())

    return DiagnosticsReport(
        target=r,
        lambda_min=lam_min,
        incoherence=incoherence,
        alpha_hat=1.0 - incoherence,
        beta_min=beta_min,
        sigma_hat=sigma_hat,
        mu_hat=mu_hat,
    )
