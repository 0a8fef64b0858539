"""Wasserstein DRO estimator.

The dual problem couples the regression weights with a transport-price
variable gamma >= 0:

    gamma * epsilon + mean_i  sup_x [ loss_W(x) - gamma * |E(x) - E(x_i)|_1 ].

Each per-sample supremum ranges over every joint state, which is NP-hard in
general.  Two inner solvers are provided: exhaustive enumeration (the
oracle, guarded by a state-count limit) and a randomized greedy sweep that
fixes one coordinate per start and then optimizes the remaining coordinates
one at a time in a random order.  The outer problem is minimized with Adam
on mini-batches, keeping the weights whose full-data dual objective was the
best seen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .bayesnet import Dataset, enumerate_states
from .encoding import (
    EncodedView,
    EncodingScheme,
    encode_dataset,
    encoding_table,
    l1_distance_tables,
)
from .erm import FitInfo
from .errors import DivergenceError, StateSpaceTooLargeError
from .moments import WeightMatrix, _encode_split

MAX_EXACT_STATES = 10**6
_EVAL_ITER = (1 << 16) - 1  # reserved iteration index for objective tapes


@dataclass(frozen=True)
class AdamConfig:
    """First-order optimizer settings (defaults follow the experiments)."""

    lr: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.990
    eps: float = 1e-8
    iters: int = 200
    batch: int = 500

    def __post_init__(self):
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValueError("beta1, beta2 must lie in [0, 1)")
        if self.iters >= _EVAL_ITER:
            raise ValueError(f"iters must be < {_EVAL_ITER}")


@dataclass(frozen=True)
class WassersteinConfig:
    """Estimator settings: ambiguity radius, inner-solver budget, seed."""

    epsilon0: float = 0.5
    epsilon: float | None = None  # overrides epsilon0 / m when set
    inner_starts: int = 10
    seed: int = 0
    adam: AdamConfig = AdamConfig()

    def radius(self, m: int) -> float:
        return self.epsilon if self.epsilon is not None else self.epsilon0 / m

    def fit_node(self, data: Dataset, r: int, scheme: EncodingScheme) -> WeightMatrix:
        return fit(data, r, self, scheme)


@dataclass(frozen=True)
class WassDualState:
    """Point of the dual problem: weights, gamma >= 0, ambiguity radius."""

    w: WeightMatrix
    gamma: float
    epsilon: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass(frozen=True)
class WorstCaseAssignment:
    """Adversarial joint state for one sample and its objective value."""

    state: np.ndarray
    value: float


# ---------------------------------------------------------------------------
# Shared tables
# ---------------------------------------------------------------------------

_TABLE_CACHE: dict = {}


def _kernel_tables(cards: Sequence[int], scheme: EncodingScheme):
    """Padded encoding and l1-distance tables for the numba kernel."""
    key = (tuple(cards), scheme)
    hit = _TABLE_CACHE.get(key)
    if hit is not None:
        return hit
    n = len(cards)
    cmax = max(cards)
    rho = np.asarray([c - 1 for c in cards], dtype=np.int64)
    rhomax = int(rho.max())
    enc = np.zeros((n, cmax, rhomax))
    dist = np.zeros((n, cmax, cmax))
    for j, c in enumerate(cards):
        table = encoding_table(scheme, c)
        enc[j, :c, : c - 1] = table
        dist[j, :c, :c] = np.abs(table[:, None, :] - table[None, :, :]).sum(axis=2)
    off = np.concatenate([[0], np.cumsum(rho)[:-1]]).astype(np.int64)
    pair_j = np.asarray(
        [j for j, c in enumerate(cards) for _ in range(c)], dtype=np.int64
    )
    pair_v = np.asarray(
        [v for c in cards for v in range(c)], dtype=np.int64
    )
    out = (enc, dist, rho, off, np.asarray(cards, dtype=np.int64), pair_j, pair_v)
    _TABLE_CACHE[key] = out
    return out


def _stream_rng(seed: int, node: int, iteration: int, sample_index: int):
    """Counter-based numpy stream for one (sample, iteration)."""
    word = (int(node) << 48) | (int(iteration) << 32) | int(sample_index)
    key = ((int(seed) & ((1 << 64) - 1)) << 64) | (word & ((1 << 64) - 1))
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# Greedy kernel
# ---------------------------------------------------------------------------
#
# Randomness is generated inside the kernel from a splitmix64 stream whose
# state is derived from (seed, node, iteration, sample index), so results
# are independent of batch composition and parallel scheduling.

@numba.njit(cache=True, inline="always")
def _sm_next(state):
    s = state + np.uint64(0x9E3779B97F4A7C15)
    z = s
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return s, z ^ (z >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def _sm_init(seed, node, iteration, idx):
    s = np.uint64(seed) * np.uint64(0x9E3779B97F4A7C15)
    s ^= np.uint64(node) * np.uint64(0xC2B2AE3D27D4EB4F)
    s ^= np.uint64(iteration) * np.uint64(0x165667B19E3779F9)
    s ^= np.uint64(idx) * np.uint64(0x27D4EB2F165667C5)
    # burn-in mixes the correlated key words apart
    s, _ = _sm_next(s)
    s, _ = _sm_next(s)
    return s


@numba.njit(cache=True)
def _greedy_kernel(
    rows, sample_idx, r, w_full, gamma, enc, dist, rho, off, cards,
    pair_j, pair_v, n_starts, seed, iteration,
    out_states, out_vals, out_counts,
):  # pragma: no cover - exercised through the wrappers
    b, n = rows.shape
    rho_r = w_full.shape[1]
    n_pairs = pair_j.shape[0]
    p0 = np.zeros(rho_r)
    p = np.zeros(rho_r)
    pc = np.zeros(rho_r)
    p_best = np.zeros(rho_r)
    t = np.zeros(rho_r)
    pool = np.empty(n_pairs, dtype=np.int64)
    perm = np.empty(n, dtype=np.int64)
    x = np.empty(n, dtype=np.int64)
    for i in range(b):
        row = rows[i]
        count = 0
        rng = _sm_init(seed, r, iteration, sample_idx[i])
        # choose the start pairs: partial Fisher-Yates over all pairs
        for q in range(n_pairs):
            pool[q] = q
        for si in range(n_starts):
            rng, z = _sm_next(rng)
            k = si + np.int64(z % np.uint64(n_pairs - si))
            tmp = pool[si]
            pool[si] = pool[k]
            pool[k] = tmp
        # baseline prediction and target at the observed sample
        for q in range(rho_r):
            p0[q] = 0.0
        for j in range(n):
            if j == r:
                continue
            for a in range(rho[j]):
                coef = enc[j, row[j], a]
                if coef != 0.0:
                    wrow = off[j] + a
                    for q in range(rho_r):
                        p0[q] += coef * w_full[wrow, q]
        base_val = 0.0
        for q in range(rho_r):
            d_ = enc[r, row[r], q] - p0[q]
            base_val += d_ * d_
        base_val *= 0.5
        best_val = base_val
        for j in range(n):
            out_states[i, j] = row[j]

        for s in range(n_starts):
            j0 = pair_j[pool[s]]
            v0 = pair_v[pool[s]]
            # random sweep order with the start coordinate first
            for q in range(n):
                perm[q] = q
            for q in range(n - 1, 0, -1):
                rng, z = _sm_next(rng)
                k = np.int64(z % np.uint64(q + 1))
                tmp = perm[q]
                perm[q] = perm[k]
                perm[k] = tmp
            for q in range(n):
                if perm[q] == j0:
                    perm[q] = perm[0]
                    perm[0] = j0
                    break
            for j in range(n):
                x[j] = row[j]
            for q in range(rho_r):
                p[q] = p0[q]
                t[q] = enc[r, row[r], q]
            dsum = 0.0
            # apply the start assignment
            if j0 == r:
                for q in range(rho_r):
                    t[q] = enc[r, v0, q]
            else:
                for a in range(rho[j0]):
                    dc = enc[j0, v0, a] - enc[j0, x[j0], a]
                    if dc != 0.0:
                        wrow = off[j0] + a
                        for q in range(rho_r):
                            p[q] += dc * w_full[wrow, q]
            dsum += dist[j0, v0, row[j0]]
            x[j0] = v0
            # optimize remaining coordinates one at a time
            for k in range(1, n):
                jj = perm[k]
                cur = x[jj]
                best_a = cur
                best_obj = -np.inf
                for a_cand in range(cards[jj]):
                    dval = dsum - dist[jj, cur, row[jj]] + dist[jj, a_cand, row[jj]]
                    sq = 0.0
                    if jj == r:
                        for q in range(rho_r):
                            d_ = enc[r, a_cand, q] - p[q]
                            sq += d_ * d_
                    else:
                        for q in range(rho_r):
                            pc[q] = p[q]
                        for aa in range(rho[jj]):
                            dc = enc[jj, a_cand, aa] - enc[jj, cur, aa]
                            if dc != 0.0:
                                wrow = off[jj] + aa
                                for q in range(rho_r):
                                    pc[q] += dc * w_full[wrow, q]
                        for q in range(rho_r):
                            d_ = t[q] - pc[q]
                            sq += d_ * d_
                    obj = 0.5 * sq - gamma * dval
                    count += 1
                    if obj > best_obj:
                        best_obj = obj
                        best_a = a_cand
                        if jj != r:
                            for q in range(rho_r):
                                p_best[q] = pc[q]
                if best_a != cur:
                    dsum = dsum - dist[jj, cur, row[jj]] + dist[jj, best_a, row[jj]]
                    if jj == r:
                        for q in range(rho_r):
                            t[q] = enc[r, best_a, q]
                    else:
                        for q in range(rho_r):
                            p[q] = p_best[q]
                    x[jj] = best_a
            # recompute the final objective from scratch to drop drift
            for q in range(rho_r):
                p[q] = 0.0
            dsum = 0.0
            for j in range(n):
                if j != r:
                    for a in range(rho[j]):
                        coef = enc[j, x[j], a]
                        if coef != 0.0:
                            wrow = off[j] + a
                            for q in range(rho_r):
                                p[q] += coef * w_full[wrow, q]
                dsum += dist[j, x[j], row[j]]
            val = 0.0
            for q in range(rho_r):
                d_ = enc[r, x[r], q] - p[q]
                val += d_ * d_
            val = 0.5 * val - gamma * dsum
            better = val > best_val
            if not better and val == best_val:
                for j in range(n):
                    if x[j] != out_states[i, j]:
                        better = x[j] < out_states[i, j]
                        break
            if better:
                best_val = val
                for j in range(n):
                    out_states[i, j] = x[j]
        out_vals[i] = best_val
        out_counts[i] = count


def _run_greedy(
    rows: np.ndarray,
    r: int,
    w: WeightMatrix,
    gamma: float,
    scheme: EncodingScheme,
    starts: int | None,
    seed: int,
    iteration: int,
    sample_indices: Sequence[int],
):
    cards = w.cards
    enc, dist, rho, off, cards_arr, pair_j, pair_v = _kernel_tables(cards, scheme)
    total = len(pair_j)
    n_starts = total if starts is None else min(int(starts), total)
    if n_starts < 1:
        raise ValueError("starts must be >= 1")
    b = rows.shape[0]
    out_states = np.empty((b, len(cards)), dtype=np.int64)
    out_vals = np.empty(b)
    out_counts = np.empty(b, dtype=np.int64)
    _greedy_kernel(
        np.ascontiguousarray(rows, dtype=np.int64),
        np.asarray(sample_indices, dtype=np.int64),
        r, np.ascontiguousarray(w.full_stacked()), float(gamma),
        enc, dist, rho, off, cards_arr,
        pair_j, pair_v, n_starts,
        int(seed) & ((1 << 64) - 1), int(iteration),
        out_states, out_vals, out_counts,
    )
    return out_states, out_vals, out_counts


# ---------------------------------------------------------------------------
# Inner suprema
# ---------------------------------------------------------------------------

def _state_objectives(
    w: WeightMatrix, gamma: float, row: Sequence[int], scheme: EncodingScheme
) -> tuple[np.ndarray, np.ndarray]:
    """(states, objective values) over the full joint state space."""
    cards = w.cards
    n_states = int(np.prod(cards, dtype=np.int64))
    if n_states > MAX_EXACT_STATES:
        raise StateSpaceTooLargeError(
            f"{n_states} joint states exceed the exact-solver limit {MAX_EXACT_STATES}"
        )
    states = enumerate_states(cards)
    losses = _all_state_losses(w, scheme, states)
    dist = l1_distance_tables(scheme, cards)
    cost = np.zeros(n_states)
    for j in range(len(cards)):
        cost += dist[j][states[:, j], int(row[j])]
    return states, losses - gamma * cost


def _all_state_losses(
    w: WeightMatrix, scheme: EncodingScheme, states: np.ndarray
) -> np.ndarray:
    v = encode_dataset(scheme, w.cards, states, exclude=w.target)
    t = encoding_table(scheme, w.cards[w.target])[states[:, w.target]]
    resid = t - v @ w.stacked
    return 0.5 * np.sum(resid * resid, axis=1)


def inner_sup_exact(
    w: WeightMatrix,
    gamma: float,
    row: Sequence[int],
    scheme: EncodingScheme,
) -> WorstCaseAssignment:
    """Exhaustive argmax of loss minus transport price; ties resolve to the
    lexicographically smallest state."""
    states, values = _state_objectives(w, gamma, row, scheme)
    best = int(np.argmax(values))  # first max = lexicographically smallest
    return WorstCaseAssignment(state=states[best].copy(), value=float(values[best]))


def inner_sup_greedy(
    w: WeightMatrix,
    gamma: float,
    row: Sequence[int],
    scheme: EncodingScheme,
    starts: int | None = None,
    seed: int = 0,
    full_output: bool = False,
):
    """Randomized greedy search for the per-sample supremum.

    One start per (coordinate, value) pair: fix that coordinate, then sweep
    the others in a random order, setting each to the best value with the
    rest held fixed.  starts=None uses every pair; otherwise that many pairs
    are subsampled without replacement.  Never returns less than the
    objective at the sample itself.
    """
    rows = np.asarray(row, dtype=np.int64)[None, :]
    states, vals, counts = _run_greedy(
        rows, w.target, w, gamma, scheme, starts, seed, 0, [0]
    )
    result = WorstCaseAssignment(state=states[0].copy(), value=float(vals[0]))
    if full_output:
        return result, int(counts[0])
    return result


def worst_case_batch(
    state: WassDualState,
    data: Dataset,
    scheme: EncodingScheme,
    inner: str = "greedy",
    starts: int | None = None,
    seed: int = 0,
    iteration: int = _EVAL_ITER,
    sample_indices: Sequence[int] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Adversarial states and values for each requested sample."""
    idx = np.arange(data.m) if sample_indices is None else np.asarray(sample_indices)
    rows = data.rows[idx]
    if inner == "greedy":
        states, vals, _ = _run_greedy(
            rows, state.w.target, state.w, state.gamma, scheme,
            starts, seed, iteration, [int(i) for i in idx],
        )
        return states, vals
    if inner != "exact":
        raise ValueError("inner must be 'exact' or 'greedy'")
    cards = state.w.cards
    n_states = int(np.prod(cards, dtype=np.int64))
    if n_states > MAX_EXACT_STATES:
        raise StateSpaceTooLargeError(
            f"{n_states} joint states exceed the exact-solver limit {MAX_EXACT_STATES}"
        )
    all_states = enumerate_states(cards)
    losses = _all_state_losses(state.w, scheme, all_states)
    dist = l1_distance_tables(scheme, cards)
    out_states = np.empty_like(rows)
    out_vals = np.empty(len(rows))
    for b, row in enumerate(rows):
        cost = np.zeros(n_states)
        for j in range(len(cards)):
            cost += dist[j][all_states[:, j], row[j]]
        values = losses - state.gamma * cost
        best = int(np.argmax(values))
        out_states[b] = all_states[best]
        out_vals[b] = values[best]
    return out_states, out_vals


def dual_objective(
    state: WassDualState,
    data: Dataset,
    scheme: EncodingScheme,
    inner: str = "exact",
    starts: int | None = None,
    seed: int = 0,
) -> float:
    """gamma * epsilon + mean over samples of the inner supremum value."""
    _, vals = worst_case_batch(state, data, scheme, inner=inner, starts=starts, seed=seed)
    return state.gamma * state.epsilon + float(np.mean(vals))


def subgradient(
    state: WassDualState,
    data: Dataset,
    assignments: np.ndarray | Sequence[WorstCaseAssignment],
    scheme: EncodingScheme,
    sample_indices: Sequence[int] | None = None,
) -> tuple[np.ndarray, float]:
    """Dual subgradient at frozen worst-case assignments.

    dW averages v v^T W - v t^T over the adversarial encodings; dgamma is
    epsilon minus the mean transport cost to the assignments.
    """
    if not isinstance(assignments, np.ndarray):
        assignments = np.stack([a.state for a in assignments])
    idx = np.arange(data.m) if sample_indices is None else np.asarray(sample_indices)
    rows = data.rows[idx]
    cards = state.w.cards
    r = state.w.target
    v = encode_dataset(scheme, cards, assignments, exclude=r)
    t = encoding_table(scheme, cards[r])[assignments[:, r]]
    m = len(assignments)
    dw = (v.T @ (v @ state.w.stacked - t)) / m
    dist = l1_distance_tables(scheme, cards)
    cost = np.zeros(m)
    for j in range(len(cards)):
        cost += dist[j][assignments[:, j], rows[:, j]]
    return dw, float(state.epsilon - np.mean(cost))


# ---------------------------------------------------------------------------
# Proposition-1 regime
# ---------------------------------------------------------------------------

def prop1_gamma_threshold(w: WeightMatrix) -> float:
    """Transport price above which no sample is worth perturbing:
    rho_total * (|W|_F^2 + rho_r)."""
    view = EncodedView(w.cards, EncodingScheme.DUMMY)
    rho_r = w.cards[w.target] - 1
    return view.rho_total * (float(np.sum(w.stacked * w.stacked)) + rho_r)


def prop1_equivalent_objective(
    w: WeightMatrix, epsilon: float, data: Dataset, scheme: EncodingScheme
) -> float:
    """Empirical risk plus the Frobenius-squared penalty the dual reduces to
    when gamma sits at its saturation threshold."""
    from .moments import empirical_risk

    view = EncodedView(w.cards, EncodingScheme.DUMMY)
    rho_r = w.cards[w.target] - 1
    penalty = epsilon * view.rho_total * (
        float(np.sum(w.stacked * w.stacked)) + rho_r
    )
    return empirical_risk(w, data, scheme) + penalty


# ---------------------------------------------------------------------------
# Outer optimizer
# ---------------------------------------------------------------------------

def fit(
    data: Dataset,
    r: int,
    config: WassersteinConfig,
    scheme: EncodingScheme,
    full_output: bool = False,
) -> WeightMatrix | tuple[WeightMatrix, FitInfo]:
    """Stochastic subgradient minimization of the dual over (W, gamma).

    Each iteration draws a batch, computes greedy worst-case assignments
    (config.inner_starts starts per sample), applies one Adam update, and
    projects gamma back to [0, inf).  The weights with the best full-data
    dual objective (greedy inner solver, fixed evaluation streams) are
    returned.
    """
    adam = config.adam
    cards = tuple(data.cards)
    view = EncodedView(cards, scheme)
    rho_excl, rho_r = view.rho_excluding(r), cards[r] - 1
    eps = config.radius(data.m)
    m = data.m
    batch_size = min(adam.batch, m)

    w = np.zeros((rho_excl, rho_r))
    gamma = 1.0
    mom = np.zeros(rho_excl * rho_r + 1)
    vel = np.zeros(rho_excl * rho_r + 1)

    def full_objective(w_arr: np.ndarray, gam: float) -> float:
        st = WassDualState(
            w=WeightMatrix(target=r, cards=cards, stacked=w_arr),
            gamma=max(gam, 0.0),
            epsilon=eps,
        )
        return dual_objective(
            st, data, scheme, inner="greedy",
            starts=config.inner_starts, seed=config.seed,
        )

    best_obj = full_objective(w, gamma)
    initial_obj = best_obj
    best_w = w.copy()
    best_gamma = gamma
    bad_streak = 0

    for it in range(adam.iters):
        # separate stream namespace for batch selection (node bit 15 set)
        batch_rng = _stream_rng(config.seed, r | (1 << 15), it, 0)
        idx = np.sort(batch_rng.choice(m, size=batch_size, replace=False))
        wm = WeightMatrix(target=r, cards=cards, stacked=w)
        st = WassDualState(w=wm, gamma=max(gamma, 0.0), epsilon=eps)
        states, _ = worst_case_batch(
            st, data, scheme, inner="greedy", starts=config.inner_starts,
            seed=config.seed, iteration=it, sample_indices=idx,
        )
        dw, dgamma = subgradient(st, data, states, scheme, sample_indices=idx)
        g = np.concatenate([dw.ravel(), [dgamma]])
        mom = adam.beta1 * mom + (1 - adam.beta1) * g
        vel = adam.beta2 * vel + (1 - adam.beta2) * g * g
        mhat = mom / (1 - adam.beta1 ** (it + 1))
        vhat = vel / (1 - adam.beta2 ** (it + 1))
        step = adam.lr * mhat / (np.sqrt(vhat) + adam.eps)
        w = w - step[:-1].reshape(rho_excl, rho_r)
        gamma = max(gamma - float(step[-1]), 0.0)

        obj = full_objective(w, gamma)
        if not np.isfinite(obj):
            raise DivergenceError("Wasserstein dual objective became non-finite")
        if obj > 10.0 * abs(initial_obj) + 1e-12:
            bad_streak += 1
            if bad_streak >= 20:
                raise DivergenceError(
                    "Wasserstein dual objective exceeded 10x its initial value "
                    "for 20 consecutive iterations"
                )
        else:
            bad_streak = 0
        if obj < best_obj:
            best_obj = obj
            best_w = w.copy()
            best_gamma = gamma

    result = WeightMatrix(target=r, cards=cards, stacked=best_w)
    if full_output:
        return result, FitInfo(
            converged=True,
            iterations=adam.iters,
            objective=best_obj,
            extra={"gamma": best_gamma},
        )
    return result
