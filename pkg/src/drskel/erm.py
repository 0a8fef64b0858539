"""Block-sparse regularized least squares on encodings: the baseline
estimator.  The penalty is the block l2,1 norm (sum of per-node-block
Frobenius norms), solved by proximal gradient with backtracking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bayesnet import Dataset
from .encoding import EncodedView, EncodingScheme
from .errors import DivergenceError
from .moments import WeightMatrix, moment_pair

_BACKTRACK_SHRINK = 0.5
_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class ErmConfig:
    """Estimator settings: penalty weight and solver controls."""

    lam: float = 0.05
    max_iters: int = 5000
    tol: float = 1e-6
    step_rule: str = "backtracking"  # or "fixed"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.step_rule not in ("backtracking", "fixed"):
            raise ValueError("step_rule must be 'backtracking' or 'fixed'")

    def fit_node(
        self, data: Dataset, r: int, scheme: EncodingScheme
    ) -> WeightMatrix:
        return fit(data, r, self, scheme)


@dataclass
class FitInfo:
    converged: bool
    iterations: int
    objective: float
    extra: dict = field(default_factory=dict)


def block_l21_norm(stacked: np.ndarray, slices: Sequence[slice]) -> float:
    return sum(float(np.linalg.norm(stacked[s])) for s in slices)


def objective(
    w: WeightMatrix, data: Dataset, lam: float, scheme: EncodingScheme
) -> float:
    """Empirical risk plus lam times the block l2,1 norm."""
    h, g, c0 = moment_pair(data, w.target, scheme)
    slices = list(w.block_slices().values())
    return _smooth_value(w.stacked, h, g, c0) + lam * block_l21_norm(
        w.stacked, slices
    )


def prox_block_l21(w: WeightMatrix, threshold: float) -> WeightMatrix:
    """Block soft-thresholding: shrink each node block toward zero by
    `threshold` in Frobenius norm, zeroing blocks at or below it."""
    out = w.stacked.copy()
    for s in w.block_slices().values():
        _shrink_block(out, s, threshold)
    return WeightMatrix(target=w.target, cards=w.cards, stacked=out)


def _shrink_block(arr: np.ndarray, s: slice, threshold: float) -> None:
    norm = float(np.linalg.norm(arr[s]))
    if norm <= threshold:
        arr[s] = 0.0
    elif threshold > 0.0:
        arr[s] *= 1.0 - threshold / norm


def _prox_stacked(arr: np.ndarray, slices: Sequence[slice], threshold: float) -> np.ndarray:
    out = arr.copy()
    for s in slices:
        _shrink_block(out, s, threshold)
    return out


def _smooth_value(w: np.ndarray, h: np.ndarray, g: np.ndarray, c0: float) -> float:
    return 0.5 * float(np.tensordot(w, h @ w)) - float(np.tensordot(w, g)) + c0


def fit(
    data: Dataset,
    r: int,
    config: ErmConfig,
    scheme: EncodingScheme,
    init: WeightMatrix | None = None,
    full_output: bool = False,
) -> WeightMatrix | tuple[WeightMatrix, FitInfo]:
    """Proximal-gradient solve of the penalized least-squares problem.

    Stops when the prox-gradient residual drops below config.tol; with
    backtracking the objective never increases between iterations.
    """
    h, g, c0 = moment_pair(data, r, scheme)
    cards = tuple(data.cards)
    view = EncodedView(cards, scheme)
    slices = list(view.block_slices(r).values())
    w = (
        init.stacked.copy()
        if init is not None
        else np.zeros((view.rho_excluding(r), cards[r] - 1))
    )

    lam = config.lam
    lip = float(np.linalg.eigvalsh(h).max())
    step = 1.0 / max(lip, 1e-12)

    def smooth(x):
        return _smooth_value(x, h, g, c0)

    def total(x):
        return smooth(x) + lam * block_l21_norm(x, slices)

    converged = False
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        grad = h @ w - g
        s = step
        for _ in range(_MAX_BACKTRACKS):
            cand = _prox_stacked(w - s * grad, slices, s * lam)
            if config.step_rule == "fixed":
                break
            diff = cand - w
            quad = smooth(w) + float(np.tensordot(grad, diff)) + float(
                np.tensordot(diff, diff)
            ) / (2.0 * s)
            if smooth(cand) <= quad + 1e-12:
                break
            s *= _BACKTRACK_SHRINK
        if not np.isfinite(total(cand)):
            raise DivergenceError(
                f"objective became non-finite at step size {s:.3e}"
            )
        residual = float(np.linalg.norm(w - cand))
        w = cand
        if residual <= config.tol:
            converged = True
            break

    result = WeightMatrix(target=r, cards=cards, stacked=w)
    if full_output:
        return result, FitInfo(
            converged=converged, iterations=iterations, objective=float(total(w))
        )
    return result


def kill_threshold(data: Dataset, r: int, scheme: EncodingScheme) -> float:
    """Smallest lam at which the zero matrix is a fixed point: the largest
    block Frobenius norm of the risk gradient at the origin."""
    _, g, _ = moment_pair(data, r, scheme)
    view = EncodedView(tuple(data.cards), scheme)
    return max(
        float(np.linalg.norm(g[s])) for s in view.block_slices(r).values()
    )
