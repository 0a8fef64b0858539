import json

import numpy as np
import pytest

import drskel
from drskel.bayesnet import Dataset, DiscreteBayesNet, sample
from drskel.encoding import EncodingScheme
from drskel.errors import DimensionError, SingularHessianError
from drskel.moments import (
    CrossMoment,
    DiagnosticsReport,
    WeightMatrix,
    cross_moment,
    diagnostics,
    empirical_risk,
    moment_pair,
    risk_gradient,
    solve_surrogate,
    squared_loss,
)

DUMMY = EncodingScheme.DUMMY
EFFECTS = EncodingScheme.EFFECTS


def product_net(p=0.5, q=0.5):
    """Two independent binary variables."""
    return DiscreteBayesNet(
        names=("A", "B"),
        cards=(2, 2),
        parents=((), ()),
        cpts=(np.array([[p, 1 - p]]), np.array([[q, 1 - q]])),
    )


def copy_net():
    """B is a deterministic copy of A."""
    return DiscreteBayesNet(
        names=("A", "B"),
        cards=(2, 2),
        parents=((), (0,)),
        cpts=(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0], [0.0, 1.0]])),
    )


def test_squared_loss_zero_weights():
    w = WeightMatrix.zeros((2, 2), target=1)
    # binary target dummy-encoded, category 0 -> encoding (1)
    assert squared_loss(w, (0, 0), DUMMY) == pytest.approx(0.5)
    assert squared_loss(w, (0, 1), DUMMY) == pytest.approx(0.0)


def test_squared_loss_reproducing_weights():
    # two binary nodes, W block = 1 reproduces a deterministic copy exactly
    w = WeightMatrix.from_blocks((2, 2), 1, {0: np.array([[1.0]])})
    assert squared_loss(w, (0, 0), DUMMY) == 0.0
    assert squared_loss(w, (1, 1), DUMMY) == 0.0


def test_squared_loss_half_weight():
    w = WeightMatrix.from_blocks((2, 2), 1, {0: np.array([[0.5]])})
    assert squared_loss(w, (0, 0), DUMMY) == pytest.approx(0.125)


def test_empirical_risk_is_mean_of_losses():
    data = sample(drskel.load_fixture("cancer"), 50, seed=0)
    w = WeightMatrix.from_blocks(
        data.cards, 2, {0: np.array([[0.3]]), 3: np.array([[-0.2]])}
    )
    per_row = [squared_loss(w, row, DUMMY) for row in data.rows]
    assert empirical_risk(w, data, DUMMY) == pytest.approx(np.mean(per_row))


def test_empirical_risk_single_row_and_duplication():
    row = np.array([[0, 1, 1, 0, 1]])
    data1 = Dataset(cards=(2,) * 5, rows=row)
    data2 = Dataset(cards=(2,) * 5, rows=np.repeat(row, 4, axis=0))
    w = WeightMatrix.zeros((2,) * 5, target=0)
    assert empirical_risk(w, data1, DUMMY) == pytest.approx(
        squared_loss(w, row[0], DUMMY)
    )
    assert empirical_risk(w, data2, DUMMY) == pytest.approx(
        empirical_risk(w, data1, DUMMY)
    )


def test_cross_moment_single_sample():
    data = Dataset(cards=(2, 3, 2), rows=np.array([[0, 2, 1]]))
    cm = cross_moment(data, 2, DUMMY)
    v = np.array([1.0, 0.0, 0.0])  # encoding of (0, 2) under dummy
    assert np.allclose(cm.matrix, np.outer(v, v))


def test_cross_moment_hand_gram():
    # two binary non-target nodes with encodings (1,0) and (0,0):
    # Gram = ((1,0)(1,0)^T + 0) / 2
    data = Dataset(cards=(2, 2, 2), rows=np.array([[0, 1, 0], [1, 1, 0]]))
    cm = cross_moment(data, 2, DUMMY)
    assert np.allclose(cm.matrix, [[0.5, 0.0], [0.0, 0.0]])


def test_cross_moment_psd_and_bounded():
    data = sample(drskel.load_fixture("survey"), 300, seed=7)
    for scheme in (DUMMY, EFFECTS):
        cm = cross_moment(data, 3, scheme)
        assert np.all(np.linalg.eigvalsh(cm.matrix) >= -1e-10)
        assert np.abs(cm.matrix).max() <= 1.0 + 1e-12


def test_solve_surrogate_stationarity_on_declared_support():
    net = drskel.load_fixture("cancer")
    data = sample(net, 2000, seed=3)
    r = 2
    nbrs = {0, 1, 3, 4}
    w = solve_surrogate(data, r, nbrs, EFFECTS)
    grad = risk_gradient(w, data, EFFECTS)
    assert np.abs(grad).max() < 1e-8


def test_solve_surrogate_zero_on_complement():
    net = drskel.load_fixture("cancer")
    data = sample(net, 500, seed=4)
    w = solve_surrogate(data, 0, {2}, EFFECTS)
    for i, norm in w.block_norms().items():
        if i != 2:
            assert norm == 0.0


def test_solve_surrogate_copy_pair_beats_zero():
    states, probs = copy_net().joint_probabilities()
    # enumerate the 4 states as a weighted dataset via exact moments
    w = solve_surrogate(copy_net(), 1, {0}, DUMMY)
    data = sample(copy_net(), 400, seed=0)
    w0 = WeightMatrix.zeros((2, 2), target=1)
    assert empirical_risk(w, data, DUMMY) < empirical_risk(w0, data, DUMMY)


def test_solve_surrogate_exact_vs_empirical():
    net = drskel.load_fixture("earthquake")
    data = sample(net, 50000, seed=12)
    r = 2
    nbrs = {0, 1, 3, 4}
    w_exact = solve_surrogate(net, r, nbrs, EFFECTS)
    w_emp = solve_surrogate(data, r, nbrs, EFFECTS)
    assert np.linalg.norm(w_exact.stacked - w_emp.stacked) <= 0.05


def test_solve_surrogate_singular_reports_lambda():
    rows = np.array([[0, 0, 0]] * 6)  # constant columns: singular moments
    data = Dataset(cards=(2, 2, 2), rows=rows)
    with pytest.raises(SingularHessianError) as err:
        solve_surrogate(data, 2, {0, 1}, EFFECTS)
    assert err.value.lambda_min <= 1e-10 or np.isfinite(err.value.lambda_min)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    net = drskel.load_fixture("survey")
    data = sample(net, 200, seed=8)
    r = 5
    for trial in range(5):
        w_arr = rng.normal(scale=0.3, size=(
            sum(net.cards) - len(net.cards) - (net.cards[r] - 1),
            net.cards[r] - 1,
        ))
        w = WeightMatrix(target=r, cards=net.cards, stacked=w_arr)
        grad = risk_gradient(w, data, EFFECTS)
        h = 1e-6
        for _ in range(3):
            i = rng.integers(w_arr.shape[0])
            j = rng.integers(w_arr.shape[1])
            wp, wm = w_arr.copy(), w_arr.copy()
            wp[i, j] += h
            wm[i, j] -= h
            fd = (
                empirical_risk(WeightMatrix(r, net.cards, wp), data, EFFECTS)
                - empirical_risk(WeightMatrix(r, net.cards, wm), data, EFFECTS)
            ) / (2 * h)
            assert abs(fd - grad[i, j]) <= 1e-5 * (1 + abs(fd))


def test_weight_matrix_shapes_and_blocks():
    w = WeightMatrix.zeros((2, 3, 4), target=1)
    assert w.stacked.shape == (1 + 3, 2)
    with pytest.raises(DimensionError):
        WeightMatrix(target=1, cards=(2, 3, 4), stacked=np.zeros((3, 2)))
    full = w.full_stacked()
    assert full.shape == (6, 2)


def test_diagnostics_noiseless_sigma_zero():
    # target exactly reproduced by one neighbor: sigma_hat = 0
    rng = np.random.default_rng(5)
    col = rng.integers(0, 2, size=300)
    other = rng.integers(0, 2, size=300)
    rows = np.stack([col, other, col], axis=1)
    data = Dataset(cards=(2, 2, 2), rows=rows)
    w = WeightMatrix.from_blocks((2, 2, 2), 2, {0: np.array([[1.0]])})
    rep = diagnostics(data, 2, w, {0}, EFFECTS)
    assert rep.sigma_hat == pytest.approx(0.0, abs=1e-12)
    assert rep.mu_hat == pytest.approx(0.0, abs=1e-12)


def test_diagnostics_all_nodes_neighbors():
    data = sample(drskel.load_fixture("cancer"), 400, seed=9)
    r = 2
    nbrs = {0, 1, 3, 4}
    w = solve_surrogate(data, r, nbrs, EFFECTS)
    rep = diagnostics(data, r, w, nbrs, EFFECTS)
    assert rep.incoherence == 0.0
    assert rep.alpha_hat == 1.0
    assert rep.sigma_hat >= rep.mu_hat >= 0.0


def test_diagnostics_json_roundtrip():
    data = sample(drskel.load_fixture("earthquake"), 400, seed=10)
    w = solve_surrogate(data, 2, {0, 1, 3, 4}, EFFECTS)
    rep = diagnostics(data, 2, w, {0, 1, 3, 4}, EFFECTS)
    back = DiagnosticsReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert back == rep


def test_cross_moment_rejects_asymmetry():
    with pytest.raises(DimensionError):
        CrossMoment(target=0, cards=(2, 2), matrix=np.array([[1.0, 0.5], [0.0, 1.0]]))
