import json

import numpy as np
import pytest

import drskel
from drskel.bayesnet import (
    Dag,
    Dataset,
    DiscreteBayesNet,
    bic_score,
    dataset_names,
    family_score,
    load_dataset,
    load_network,
    random_network,
    sample,
    save_dataset,
    save_network,
)
from drskel.errors import DimensionError, DrskelError, InvariantError, NetworkFormatError


def single_root(p0=1.0):
    return DiscreteBayesNet(
        names=("A", "B"),
        cards=(2, 2),
        parents=((), (0,)),
        cpts=(
            np.array([[p0, 1.0 - p0]]),
            np.array([[1.0, 0.0], [0.0, 1.0]]),  # deterministic copy
        ),
    )


def test_sample_degenerate_cpt_all_zero():
    net = single_root(1.0)
    data = sample(net, 5, seed=0)
    assert np.all(data.rows[:, 0] == 0)


def test_sample_deterministic_copy_chain():
    net = single_root(0.5)
    data = sample(net, 200, seed=3)
    assert np.array_equal(data.rows[:, 0], data.rows[:, 1])


def test_sample_root_marginals_match_cpt():
    net = drskel.load_fixture("cancer")
    data = sample(net, 10000, seed=11)
    # both roots: Pollution (P(low)=0.9) and Smoker (P(True)=0.3)
    assert abs((data.rows[:, 0] == 0).mean() - 0.9) < 0.02
    assert abs((data.rows[:, 1] == 0).mean() - 0.3) < 0.02


def test_sample_conditionals_converge_to_cpt():
    net = drskel.load_fixture("survey")
    data = sample(net, 20000, seed=5)
    # check E | A, S row (young, M) -> P(high) = 0.75
    mask = (data.rows[:, 0] == 0) & (data.rows[:, 1] == 0)
    freq = (data.rows[mask, 2] == 0).mean()
    assert abs(freq - 0.75) < 0.03


def test_sample_deterministic_per_seed():
    net = drskel.load_fixture("earthquake")
    a = sample(net, 100, seed=42)
    b = sample(net, 100, seed=42)
    c = sample(net, 100, seed=43)
    assert np.array_equal(a.rows, b.rows)
    assert not np.array_equal(a.rows, c.rows)


def test_bic_single_binary_closed_form():
    rows = np.array([[0, 0]] * 7 + [[1, 0]] * 3)
    data = Dataset(cards=(2, 2), rows=rows)
    got = family_score(data, 0, [])
    expected = 7 * np.log(0.7) + 3 * np.log(0.3) - 0.5 * np.log(10)
    assert got == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(-7.2599, abs=5e-4)


def test_bic_edge_between_independent_variables_decreases():
    rng = np.random.default_rng(0)
    rows = rng.integers(0, 2, size=(5000, 2))
    data = Dataset(cards=(2, 2), rows=rows)
    empty = Dag(n=2, edges=frozenset())
    one = Dag(n=2, edges=frozenset({(0, 1)}))
    assert bic_score(one, data) < bic_score(empty, data)


def test_bic_duplicate_column_edge_wins():
    rng = np.random.default_rng(1)
    col = rng.integers(0, 2, size=50)
    data = Dataset(cards=(2, 2), rows=np.stack([col, col], axis=1))
    empty = Dag(n=2, edges=frozenset())
    one = Dag(n=2, edges=frozenset({(0, 1)}))
    assert bic_score(one, data) > bic_score(empty, data)


def test_bic_family_decomposition():
    net = drskel.load_fixture("cancer")
    data = sample(net, 500, seed=2)
    dag1 = Dag(n=5, edges=frozenset({(0, 2), (1, 2)}))
    dag2 = Dag(n=5, edges=frozenset({(0, 2), (1, 2), (2, 3)}))
    # adding parent 2 to node 3 changes only node 3's family term
    delta = bic_score(dag2, data) - bic_score(dag1, data)
    expected = family_score(data, 3, [2]) - family_score(data, 3, [])
    assert delta == pytest.approx(expected, abs=1e-9)


def test_bic_parent_blowup_guard():
    cards = tuple([6] * 11)
    rows = np.zeros((3, 11), dtype=int)
    data = Dataset(cards=cards, rows=rows)
    dag = Dag(n=11, edges=frozenset((u, 10) for u in range(10)))
    with pytest.raises(DrskelError):
        bic_score(dag, data)


def test_bic_dimension_mismatch():
    data = Dataset(cards=(2, 2), rows=np.zeros((4, 2), dtype=int))
    with pytest.raises(DimensionError):
        bic_score(Dag(n=3, edges=frozenset()), data)


def test_random_network_single_node():
    net = random_network(1, 0, [3], seed=0)
    assert net.n == 1
    assert net.cpts[0].shape == (1, 3)
    assert net.cpts[0].sum() == pytest.approx(1.0)


def test_random_network_parent_bound_and_validity():
    net = random_network(5, 2, 3, seed=9)
    assert all(len(p) <= 2 for p in net.parents)
    net.topological_order()  # acyclic by construction


def test_random_network_seed_contract():
    a = random_network(4, 2, 2, seed=5)
    b = random_network(4, 2, 2, seed=5)
    c = random_network(4, 2, 2, seed=6)
    assert a.parents == b.parents
    assert all(np.array_equal(x, y) for x, y in zip(a.cpts, b.cpts))
    assert any(
        x.shape != y.shape or not np.allclose(x, y) for x, y in zip(a.cpts, c.cpts)
    ) or a.parents != c.parents


def test_network_roundtrip(tmp_path):
    net = drskel.load_fixture("cancer")
    path = tmp_path / "net.json"
    save_network(net, path)
    back = load_network(path)
    assert back.names == net.names
    assert back.cards == net.cards
    assert back.parents == net.parents
    for a, b in zip(back.cpts, net.cpts):
        assert np.array_equal(a, b)


def test_network_bad_row_sum(tmp_path):
    obj = {
        "nodes": [{"name": "A", "cardinality": 2}],
        "parents": {"A": []},
        "cpts": {"A": [[0.5, 0.4]]},
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(obj))
    with pytest.raises(InvariantError, match="A"):
        load_network(path)


def test_network_unknown_parent(tmp_path):
    obj = {
        "nodes": [{"name": "A", "cardinality": 2}],
        "parents": {"A": ["Zed"]},
        "cpts": {"A": [[0.5, 0.5]]},
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(obj))
    with pytest.raises(NetworkFormatError, match="Zed"):
        load_network(path)


def test_network_invalid_json_line_context(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "nodes": [,]\n}')
    with pytest.raises(NetworkFormatError, match="line 2"):
        load_network(path)


def test_dataset_roundtrip(tmp_path):
    net = drskel.load_fixture("survey")
    data = sample(net, 50, seed=1)
    path = tmp_path / "d.csv"
    save_dataset(data, path, names=list(net.names), meta={"seed": 1})
    back = load_dataset(path)
    assert back.cards == data.cards
    assert np.array_equal(back.rows, data.rows)
    assert dataset_names(path) == list(net.names)


def test_dataset_invariants():
    with pytest.raises(InvariantError):
        Dataset(cards=(2, 2), rows=np.array([[0, 2]]))
    with pytest.raises(InvariantError):
        Dataset(cards=(2,), rows=np.array([[0]]))


def test_dag_invariants():
    with pytest.raises(InvariantError):
        Dag(n=2, edges=frozenset({(0, 0)}))
    with pytest.raises(InvariantError):
        Dag(n=2, edges=frozenset({(0, 1), (1, 0)}))


def test_cpt_row_count_invariant():
    with pytest.raises(InvariantError):
        DiscreteBayesNet(
            names=("A", "B"),
            cards=(2, 2),
            parents=((), (0,)),
            cpts=(np.array([[0.5, 0.5]]), np.array([[0.5, 0.5]])),
        )
