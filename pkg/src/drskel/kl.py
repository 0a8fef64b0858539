"""KL-divergence DRO estimator.

The worst case over a KL ball around the empirical distribution only
reweights observed samples.  Its dual is the smooth convex objective

    gamma * log mean exp(loss_i / gamma) + gamma * epsilon,   gamma > 0,

minimized jointly over the weights and gamma.  All exponentials are
evaluated through a max-shifted log-sum-exp so the objective and gradient
are finite for every finite input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .bayesnet import Dataset
from .encoding import EncodedView, EncodingScheme
from .erm import FitInfo
from .errors import DivergenceError
from .moments import WeightMatrix, _encode_split, per_sample_losses

GAMMA_FLOOR = 1e-8


@dataclass(frozen=True)
class KlDualState:
    """Point of the dual problem: weights, gamma > 0, ambiguity radius."""

    w: WeightMatrix
    gamma: float
    epsilon: float

    def __post_init__(self):
        if self.gamma < GAMMA_FLOOR:
            raise ValueError(f"gamma must be >= {GAMMA_FLOOR}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass(frozen=True)
class KlConfig:
    """Estimator settings: ambiguity radius (epsilon0 / m) and solver caps."""

    epsilon0: float = 0.5
    epsilon: float | None = None  # overrides epsilon0 / m when set
    max_iters: int = 1000
    gtol_scale: float = 1e-6

    def fit_node(self, data: Dataset, r: int, scheme: EncodingScheme) -> WeightMatrix:
        return fit(data, r, self, scheme)

    def radius(self, m: int) -> float:
        return self.epsilon if self.epsilon is not None else self.epsilon0 / m


def _lse_terms(losses: np.ndarray, gamma: float) -> tuple[float, np.ndarray]:
    """(log mean exp(losses/gamma), softmax weights)."""
    a = losses / gamma
    shift = a.max()
    e = np.exp(a - shift)
    total = e.sum()
    lse = shift + np.log(total / len(a))
    return float(lse), e / total


def dual_objective(state: KlDualState, data: Dataset, scheme: EncodingScheme) -> float:
    """gamma * log mean exp(loss/gamma) + gamma * epsilon, stabilized."""
    losses = per_sample_losses(state.w, data, scheme)
    lse, _ = _lse_terms(losses, state.gamma)
    return state.gamma * lse + state.gamma * state.epsilon


def gradient(
    state: KlDualState, data: Dataset, scheme: EncodingScheme
) -> tuple[np.ndarray, float]:
    """(dW, dgamma) of the dual objective at the given state."""
    v, t = _encode_split(data, state.w.target, scheme)
    resid = v @ state.w.stacked - t
    losses = 0.5 * np.sum(resid * resid, axis=1)
    lse, p = _lse_terms(losses, state.gamma)
    dw = v.T @ (p[:, None] * resid)
    dgamma = lse - float(p @ losses) / state.gamma + state.epsilon
    return dw, float(dgamma)


def _softplus(theta: float | np.ndarray):
    return np.logaddexp(0.0, theta)


def _inv_softplus(y: float) -> float:
    # log(e^y - 1), stable for both tails
    if y > 30:
        return float(y)
    return float(np.log(np.expm1(y)))


def fit(
    data: Dataset,
    r: int,
    config: KlConfig,
    scheme: EncodingScheme,
    init: WeightMatrix | None = None,
    full_output: bool = False,
) -> WeightMatrix | tuple[WeightMatrix, FitInfo]:
    """Minimize the dual jointly over (W, gamma) with L-BFGS.

    gamma is parameterized as GAMMA_FLOOR + softplus(theta) so the positivity
    constraint needs no projection.
    """
    cards = tuple(data.cards)
    view = EncodedView(cards, scheme)
    rho_excl, rho_r = view.rho_excluding(r), cards[r] - 1
    eps = config.radius(data.m)
    v, t = _encode_split(data, r, scheme)
    m = data.m

    def unpack(x):
        return x[:-1].reshape(rho_excl, rho_r), x[-1]

    def fun(x):
        w, theta = unpack(x)
        gamma = GAMMA_FLOOR + float(_softplus(theta))
        resid = v @ w - t
        losses = 0.5 * np.sum(resid * resid, axis=1)
        lse, p = _lse_terms(losses, gamma)
        value = gamma * lse + gamma * eps
        dw = v.T @ (p[:, None] * resid)
        dgamma = lse - float(p @ losses) / gamma + eps
        dtheta = dgamma / (1.0 + np.exp(-theta))
        return value, np.concatenate([dw.ravel(), [dtheta]])

    x0 = np.zeros(rho_excl * rho_r + 1)
    if init is not None:
        x0[:-1] = init.stacked.ravel()
    x0[-1] = _inv_softplus(1.0 - GAMMA_FLOOR)  # start at gamma = 1

    res = scipy.optimize.minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.max_iters, "maxcor": 10, "ftol": 1e-14, "gtol": 1e-10},
    )
    if not np.isfinite(res.fun):
        raise DivergenceError("KL dual objective became non-finite")
    w_arr, theta = unpack(res.x)
    value, grad = fun(res.x)
    converged = float(np.linalg.norm(grad)) <= config.gtol_scale * (1.0 + abs(value))
    result = WeightMatrix(target=r, cards=cards, stacked=w_arr)
    if full_output:
        info = FitInfo(
            converged=converged,
            iterations=int(res.nit),
            objective=float(value),
            extra={"gamma": GAMMA_FLOOR + float(_softplus(theta))},
        )
        return result, info
    return result
