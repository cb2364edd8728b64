import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracle
from hyperbox.core import (
    FMNN,
    GFMM,
    UNLABELED,
    DimensionError,
    Hyperbox,
    IntervalSample,
    InvariantError,
    ModelParams,
    TrainedModel,
    box_from_sample,
    contract,
    expand,
    fmnn_membership,
    gfmm_membership,
    is_expandable,
    overlap_test,
    predict,
)

BOX = Hyperbox([0.2, 0.2], [0.4, 0.4], label=1)
P = IntervalSample.point

# coordinates on a fine grid keep ramp products away from underflow
unit = st.integers(0, 10**6).map(lambda k: k / 10**6)


@st.composite
def boxes(draw, n):
    lo = [draw(unit) for _ in range(n)]
    hi = [draw(unit) for _ in range(n)]
    V = [min(a, b) for a, b in zip(lo, hi)]
    W = [max(a, b) for a, b in zip(lo, hi)]
    return Hyperbox(V, W, label=draw(st.integers(1, 3)))


# -- membership ---------------------------------------------------------------

def test_gfmm_ramp_worked_value():
    assert gfmm_membership(BOX, P([0.5, 0.3]), 4) == pytest.approx(0.6, abs=1e-12)


def test_gfmm_inside_is_one():
    assert gfmm_membership(BOX, P([0.3, 0.25]), 7.5) == 1.0


def test_gfmm_missing_feature_is_neutral():
    assert gfmm_membership(BOX, P([0.5, np.nan]), 4) == pytest.approx(0.6, abs=1e-12)


def test_gfmm_all_neutral_returns_one():
    assert gfmm_membership(BOX, P([np.nan, np.nan]), 1) == 1.0


def test_gfmm_errors():
    with pytest.raises(DimensionError):
        gfmm_membership(BOX, P([0.1, 0.2, 0.3]))
    with pytest.raises(ValueError):
        gfmm_membership(BOX, P([0.1, 0.2]), 0)
    with pytest.raises(ValueError):
        gfmm_membership(BOX, P([0.1, 0.2]), [1, -1])


def test_fmnn_worked_value():
    assert fmnn_membership(BOX, P([0.5, 0.3]), 4) == pytest.approx(0.9, abs=1e-12)


@pytest.mark.parametrize("x", [[0.3, 0.3], [0.2, 0.4]])
def test_fmnn_inside_is_one(x):
    assert fmnn_membership(BOX, P(x), 4) == 1.0


def test_fmnn_point_box():
    box = Hyperbox([0.7, 0.1], [0.7, 0.1])
    assert fmnn_membership(box, P([0.7, 0.1]), 3) == 1.0


def test_fmnn_rejects_interval_and_missing():
    with pytest.raises(ValueError):
        fmnn_membership(BOX, IntervalSample([0.1, 0.1], [0.2, 0.2]))
    with pytest.raises(ValueError):
        fmnn_membership(BOX, P([0.1, np.nan]))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(boxes(n), st.lists(unit, min_size=n, max_size=n))),
       st.floats(0.1, 20))
def test_membership_matches_scalar_formula(case, gamma):
    box, x = case
    got = gfmm_membership(box, P(x), gamma)
    assert got == pytest.approx(oracle.gfmm(box.V, box.W, x, x, [gamma] * len(x)), abs=1e-12)
    assert 0.0 <= got <= 1.0
    got = fmnn_membership(box, P(x), gamma)
    assert got == pytest.approx(oracle.fmnn(box.V, box.W, x, gamma), abs=1e-12)
    assert 0.0 <= got <= 1.0


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(boxes(n), boxes(n))))
def test_containment_iff_membership_one(pair):
    box, sample_box = pair
    x = IntervalSample(sample_box.V, sample_box.W)
    inside = bool(np.all(box.V <= x.lower) and np.all(x.upper <= box.W))
    assert (gfmm_membership(box, x, 2.0) == 1.0) == inside


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(boxes(n), st.lists(unit, min_size=n, max_size=n))),
       st.data())
def test_membership_monotone_away_from_box(case, data):
    box, x = case
    j = data.draw(st.integers(0, len(x) - 1))
    assume(box.W[j] < 1)
    start = data.draw(st.floats(box.W[j], 1))
    further = data.draw(st.floats(start, 1))
    near, far = list(x), list(x)
    near[j], far[j] = start, further
    assert gfmm_membership(box, P(far), 3) <= gfmm_membership(box, P(near), 3)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 4).flatmap(lambda n: st.tuples(boxes(n), st.lists(unit, min_size=n, max_size=n))),
       st.data())
def test_unset_dimension_is_neutral(case, data):
    box, x = case
    j = data.draw(st.integers(0, len(x) - 1))
    V, W = box.V.copy(), box.W.copy()
    V[j], W[j] = 1.0, 0.0
    with_unset = Hyperbox(V, W)
    reduced = Hyperbox(np.delete(box.V, j), np.delete(box.W, j))
    assert gfmm_membership(with_unset, P(x), 2) == gfmm_membership(reduced, P(np.delete(x, j)), 2)


# -- expansion ----------------------------------------------------------------

def test_is_expandable_examples():
    box = Hyperbox([0.1, 0.1], [0.3, 0.3])
    assert is_expandable(box, P([0.35, 0.2]), 0.3)
    assert not is_expandable(box, P([0.35, 0.2]), 0.2)
    assert is_expandable(box, P([0.1, 0.3]), 0.2)


def test_is_expandable_ignores_unset_and_missing():
    box = Hyperbox([0.1, 1.0], [0.3, 0.0])
    assert is_expandable(box, P([0.2, 0.9]), 0.2)
    assert is_expandable(Hyperbox([0.1, 0.1], [0.3, 0.3]), P([np.nan, 0.2]), 0.2)


def test_expand_hull():
    out = expand(Hyperbox([0.1, 0.1], [0.3, 0.3], label=1, count=3, id=7), P([0.35, 0.2]))
    assert out.V.tolist() == [0.1, 0.1] and out.W.tolist() == [0.35, 0.3]
    assert out.count == 4 and out.id == 7 and out.label == 1


def test_expand_inside_only_counts():
    box = Hyperbox([0.1, 0.1], [0.3, 0.3], label=2)
    out = expand(box, P([0.2, 0.2]), 2)
    assert np.array_equal(out.V, box.V) and np.array_equal(out.W, box.W) and out.count == 2


def test_expand_unset_dimension_adopts_sample():
    out = expand(Hyperbox([0.1, 1.0], [0.3, 0.0]), P([0.2, 0.5]))
    assert out.V.tolist() == [0.1, 0.5] and out.W.tolist() == [0.3, 0.5]


def test_expand_missing_leaves_dimension():
    out = expand(Hyperbox([0.1, 0.1], [0.3, 0.3]), P([0.4, np.nan]))
    assert out.V.tolist() == [0.1, 0.1] and out.W.tolist() == [0.4, 0.3]


def test_expand_labels_unlabelled_box():
    assert expand(Hyperbox([0.1], [0.2]), P([0.15]), 3).label == 3
    assert expand(Hyperbox([0.1], [0.2], label=1), P([0.15]), 3).label == 1


def test_box_from_missing_sample_is_unset():
    b = box_from_sample(P([0.2, np.nan]), 1)
    assert b.V.tolist() == [0.2, 1.0] and b.W.tolist() == [0.2, 0.0]
    b.validate()


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(boxes(n), st.lists(unit, min_size=n, max_size=n))))
def test_expand_contains_box_and_sample(case):
    box, x = case
    out = expand(box, P(x))
    assert np.all(out.V <= box.V) and np.all(out.W >= box.W)
    assert np.all(out.V <= x) and np.all(out.W >= x)


# -- overlap and contraction --------------------------------------------------

def test_overlap_symmetric_shift():
    a = Hyperbox([0.1, 0.1], [0.4, 0.4])
    b = Hyperbox([0.3, 0.3], [0.6, 0.6])
    dim, delta, case = overlap_test(a, b)
    assert (dim, case) == (0, 1) and delta == pytest.approx(0.1)


def test_overlap_disjoint():
    assert overlap_test(Hyperbox([0.1, 0.1], [0.2, 0.2]), Hyperbox([0.5, 0.5], [0.6, 0.6])) is None


def test_overlap_containment_case():
    a = Hyperbox([0.1, 0.0], [0.5, 0.9])
    b = Hyperbox([0.2, 0.1], [0.3, 0.8])
    dim, delta, case = overlap_test(a, b)
    assert (dim, case) == (0, 3) and delta == pytest.approx(0.2)


def test_overlap_touching_and_duplicate_points():
    assert overlap_test(Hyperbox([0.1], [0.3]), Hyperbox([0.3], [0.5])) is None
    assert overlap_test(Hyperbox([0.4], [0.4]), Hyperbox([0.4], [0.4])) is None


def test_point_strictly_inside_overlaps():
    assert overlap_test(Hyperbox([0.3, 0.3], [0.55, 0.55]), Hyperbox([0.45, 0.45], [0.45, 0.45]))[2] == 3


def test_overlap_unset_rules():
    a = Hyperbox([0.1, 1.0], [0.4, 0.0])
    assert overlap_test(a, Hyperbox([0.2, 0.2], [0.3, 0.3])) is None
    # unset in both boxes is skipped
    assert overlap_test(a, Hyperbox([0.2, 1.0], [0.3, 0.0])) is not None


@pytest.mark.parametrize(
    "a, b, case, expect_a, expect_b",
    [
        ([0.1, 0.4], [0.3, 0.6], 1, [0.1, 0.35], [0.35, 0.6]),
        ([0.3, 0.6], [0.1, 0.4], 2, [0.35, 0.6], [0.1, 0.35]),
        # b within a: Q-V = 0.2 < W-P = 0.3, so V_a := Q_b
        ([0.1, 0.6], [0.3, 0.3], 3, [0.3, 0.6], [0.3, 0.3]),
        ([0.1, 0.6], [0.4, 0.5], 3, [0.1, 0.4], [0.4, 0.5]),
        ([0.3, 0.4], [0.1, 0.9], 4, [0.3, 0.4], [0.4, 0.9]),
        ([0.3, 0.4], [0.2, 0.9], 4, [0.3, 0.4], [0.4, 0.9]),
        ([0.3, 0.6], [0.1, 0.7], 4, [0.3, 0.6], [0.1, 0.3]),
    ],
)
def test_contract_cases(a, b, case, expect_a, expect_b):
    A = Hyperbox([a[0]], [a[1]], 1)
    B = Hyperbox([b[0]], [b[1]], 2)
    found = overlap_test(A, B)
    assert found[2] == case
    A2, B2 = contract(A, B, found[0], case)
    assert [A2.V[0], A2.W[0]] == pytest.approx(expect_a)
    assert [B2.V[0], B2.W[0]] == pytest.approx(expect_b)
    assert overlap_test(A2, B2) is None


def test_contract_rejects_wrong_case():
    A, B = Hyperbox([0.1], [0.4]), Hyperbox([0.3], [0.6])
    with pytest.raises(ValueError):
        contract(A, B, 0, 2)
    with pytest.raises(ValueError):
        contract(Hyperbox([0.1], [0.2]), Hyperbox([0.5], [0.6]), 0, 1)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(boxes(n), boxes(n))))
def test_contraction_resolves(pair):
    a, b = pair
    found = overlap_test(a, b)
    assume(found is not None)
    assert found == oracle.overlap({"V": list(a.V), "W": list(a.W)}, {"V": list(b.V), "W": list(b.W)})
    dim, _, case = found
    a2, b2 = contract(a, b, dim, case)
    assert not (a2.V[dim] < b2.W[dim] and b2.V[dim] < a2.W[dim])
    assert overlap_test(a2, b2) is None
    for box in (a2, b2):
        box.validate()


# -- prediction ---------------------------------------------------------------

def _model(boxes, gamma=1.0):
    return TrainedModel(boxes, ModelParams(0.5, gamma), boxes[0].n_features, {b.label for b in boxes})


def test_predict_nearer_box_wins():
    # "green" is nearer on the decisive feature than "blue"
    green = Hyperbox([0.1, 0.1, 0.1, 0.50], [0.3, 0.3, 0.3, 0.55], label=1, id=0)
    blue = Hyperbox([0.1, 0.1, 0.1, 0.05], [0.3, 0.3, 0.3, 0.20], label=2, id=1)
    assert predict(_model([green, blue]), P([0.2, 0.2, 0.2, 0.7]))[0] == 1


def test_predict_inside_box():
    m = _model([Hyperbox([0.1], [0.2], 1, id=0), Hyperbox([0.6], [0.9], 2, id=1)])
    assert predict(m, P([0.7])) == (2, 1.0)


def test_predict_tie_prefers_count_then_volume_then_id():
    # binary-exact coordinates so both memberships are exactly 0.875
    a = Hyperbox([0.25], [0.375], 1, count=2, id=0)
    b = Hyperbox([0.625], [0.75], 2, count=5, id=1)
    assert predict(_model([a, b]), P([0.5])) == (2, 0.875)
    c = Hyperbox([0.125], [0.375], 1, count=5, id=0)
    assert predict(_model([c, b]), P([0.5]))[0] == 2
    d = Hyperbox([0.25], [0.375], 1, count=5, id=3)
    assert predict(_model([d, b]), P([0.5]))[0] == 2
    e = Hyperbox([0.25], [0.375], 1, count=5, id=0)
    assert predict(_model([e, b]), P([0.5]))[0] == 1


def test_predict_ignores_unlabelled_when_labelled_exist():
    m = _model([Hyperbox([0.45], [0.55], UNLABELED, id=0), Hyperbox([0.9], [0.95], 1, id=1)])
    assert predict(m, P([0.5]))[0] == 1
    only = _model([Hyperbox([0.45], [0.55], UNLABELED, id=0)])
    assert predict(only, P([0.5]))[0] == UNLABELED


def test_predict_empty_model():
    with pytest.raises(ValueError):
        predict(TrainedModel([], ModelParams(), 1), P([0.1]))


@settings(max_examples=100, deadline=None)
@given(st.lists(boxes(2), min_size=1, max_size=6), st.lists(unit, min_size=2, max_size=2),
       st.floats(0.5, 5), st.floats(1.1, 4))
def test_argmax_invariant_under_gamma_scaling(bxs, x, gamma, scale):
    bxs = [Hyperbox(b.V, b.W, b.label, 1, i) for i, b in enumerate(bxs)]
    m = _model(bxs, gamma)
    mems = [oracle.gfmm(b.V, b.W, x, x, [gamma] * 2) for b in bxs]
    assume(mems.count(max(mems)) == 1)
    assume(max(mems) < 1)
    # the ramp must stay unsaturated after scaling, else distinct memberships collapse to 0
    assume(all(oracle.gfmm(b.V, b.W, x, x, [gamma * scale] * 2) > 0 for b in bxs))
    scaled = _model(bxs, gamma * scale)
    assert predict(m, P(x))[0] == predict(scaled, P(x))[0]


# -- types --------------------------------------------------------------------

def test_interval_sample_validation():
    with pytest.raises(InvariantError):
        IntervalSample([0.5], [0.4])
    with pytest.raises(InvariantError):
        IntervalSample([np.nan], [0.4])
    with pytest.raises(InvariantError):
        P([1.2])
    assert IntervalSample([0.1, np.nan], [0.2, np.nan]).missing.tolist() == [False, True]


def test_hyperbox_validation():
    Hyperbox([1.0], [0.0]).validate()
    with pytest.raises(InvariantError):
        Hyperbox([0.6], [0.5]).validate()


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(theta=0)
    with pytest.raises(ValueError):
        ModelParams(theta=1.5)
    with pytest.raises(ValueError):
        ModelParams(gamma=[1, 0])
    assert ModelParams(gamma=[1, 2]).gamma == (1.0, 2.0)
    assert ModelParams(membership_kind=FMNN).membership_kind == FMNN != GFMM
    assert math.isclose(ModelParams().gamma, 1.0)


def test_point_box_inside_other_class_is_not_an_invariant_violation():
    from hyperbox.core import find_overlaps, interior_overlap_mask, overlap_mask

    big = Hyperbox([0.2, 0.2], [0.6, 0.6], label=1, id=0)
    dot = Hyperbox([0.4, 0.4], [0.4, 0.4], label=2, id=1)
    # training treats the point as inside the box ...
    assert overlap_mask(big.V, big.W, dot.V, dot.W)[0]
    # ... but it shares no interior volume with it
    assert not interior_overlap_mask(big.V, big.W, dot.V, dot.W)[0]
    model = TrainedModel([big, dot], ModelParams(), 2, [1, 2])
    assert find_overlaps(model) == []
    other = Hyperbox([0.5, 0.5], [0.7, 0.7], label=2, id=2)
    assert find_overlaps(TrainedModel([big, other], ModelParams(), 2, [1, 2])) == [(0, 1)]
