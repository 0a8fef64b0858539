import numpy as np
import pytest
from hypothesis import given, strategies as st

from drskel.encoding import (
    EncodedView,
    EncodingScheme,
    encode_dataset,
    encode_sample,
    encode_value,
    l1_distance_tables,
    scheme_from_name,
)


def test_dummy_examples():
    assert np.array_equal(encode_value(EncodingScheme.DUMMY, 4, 0), [1, 0, 0])
    assert np.array_equal(encode_value(EncodingScheme.DUMMY, 4, 3), [0, 0, 0])
    assert np.array_equal(encode_value(EncodingScheme.DUMMY, 2, 0), [1])
    assert np.array_equal(encode_value(EncodingScheme.DUMMY, 2, 1), [0])


def test_effects_examples():
    assert np.array_equal(encode_value(EncodingScheme.EFFECTS, 4, 3), [-1, -1, -1])
    assert np.array_equal(encode_value(EncodingScheme.EFFECTS, 4, 1), [0, 1, 0])


def test_out_of_range_value():
    with pytest.raises(ValueError):
        encode_value(EncodingScheme.DUMMY, 3, 3)
    with pytest.raises(ValueError):
        encode_value(EncodingScheme.DUMMY, 3, -1)


def test_encode_sample_concatenation():
    got = encode_sample(EncodingScheme.DUMMY, (2, 2), (0, 1))
    assert np.array_equal(got, [1, 0])
    got = encode_sample(EncodingScheme.DUMMY, (2, 2), (0, 1), exclude=0)
    assert np.array_equal(got, [0])
    got = encode_sample(EncodingScheme.DUMMY, (2, 3, 2), (1, 2, 0))
    assert np.array_equal(got, [0, 0, 0, 1])
    assert len(got) == EncodedView((2, 3, 2), EncodingScheme.DUMMY).rho_total


@given(
    scheme=st.sampled_from(list(EncodingScheme)),
    card=st.integers(min_value=2, max_value=6),
)
def test_injectivity_and_range(scheme, card):
    vectors = [tuple(encode_value(scheme, card, k)) for k in range(card)]
    assert len(set(vectors)) == card
    for v in vectors:
        assert set(v) <= {-1.0, 0.0, 1.0}


@given(
    scheme=st.sampled_from(list(EncodingScheme)),
    cards=st.lists(st.integers(2, 4), min_size=2, max_size=5),
    data=st.data(),
)
def test_l1_distance_decomposes_per_coordinate(scheme, cards, data):
    row_a = [data.draw(st.integers(0, c - 1)) for c in cards]
    row_b = [data.draw(st.integers(0, c - 1)) for c in cards]
    ea = encode_sample(scheme, cards, row_a)
    eb = encode_sample(scheme, cards, row_b)
    total = np.abs(ea - eb).sum()
    per_coord = sum(
        np.abs(
            encode_value(scheme, c, a) - encode_value(scheme, c, b)
        ).sum()
        for c, a, b in zip(cards, row_a, row_b)
    )
    assert total == pytest.approx(per_coord)
    if scheme == EncodingScheme.DUMMY:
        for c, a, b in zip(cards, row_a, row_b):
            d = np.abs(
                encode_value(scheme, c, a) - encode_value(scheme, c, b)
            ).sum()
            assert d in (0.0, 1.0, 2.0)


def test_first_encodings_form_identity():
    for scheme in EncodingScheme:
        for c in (2, 3, 5):
            first = np.stack([encode_value(scheme, c, k) for k in range(c - 1)])
            assert np.array_equal(first, np.eye(c - 1))


def test_encoded_view_offsets():
    view = EncodedView((2, 3, 4), EncodingScheme.DUMMY)
    assert view.offsets == (0, 1, 3)
    assert view.rho_total == 6
    assert view.rho_excluding(1) == 4
    slices = view.block_slices(1)
    assert 1 not in slices
    assert slices[0] == slice(0, 1)
    assert slices[2] == slice(1, 4)


def test_encode_dataset_matches_rowwise():
    rng = np.random.default_rng(0)
    cards = (2, 3, 2)
    rows = np.stack([rng.integers(0, c, size=20) for c in cards], axis=1)
    batch = encode_dataset(EncodingScheme.EFFECTS, cards, rows, exclude=1)
    for i in range(20):
        single = encode_sample(EncodingScheme.EFFECTS, cards, rows[i], exclude=1)
        assert np.array_equal(batch[i], single)


def test_distance_tables():
    tables = l1_distance_tables(EncodingScheme.EFFECTS, [2, 3])
    assert tables[0][0, 1] == 2.0  # (1) vs (-1)
    assert tables[0][0, 0] == 0.0
    assert tables[1][0, 2] == pytest.approx(3.0)  # (1,0) vs (-1,-1)


def test_scheme_from_name():
    assert scheme_from_name("dummy") == EncodingScheme.DUMMY
    assert scheme_from_name("effects") == EncodingScheme.EFFECTS
    with pytest.raises(ValueError):
        scheme_from_name("onehot")
