import itertools

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from gqgames import contextuality as ctx
from gqgames import geometry, invariant


def chi_of(g, vals):
    return (g.signs * vals[..., g.line_points].prod(axis=-1)).sum(axis=-1)


small_ints = hnp.arrays(np.int64, (3, 3), elements=st.integers(-5, 5))


@given(small_ints)
def test_det3_matches_sympy(m):
    assert int(invariant.det3(m)) == int(sympy.Matrix(m.tolist()).det())


@settings(max_examples=50, deadline=None)
@given(small_ints, small_ints, small_ints)
def test_i3_determinant_form_equals_trace_form(a, b, c):
    m = invariant.HVMatrices(a, b, c)
    assert abs(float(invariant.i3_det(m)) - invariant.i3_trace(m)) < 1e-8


def test_monomials_are_the_eloily_lines():
    e = invariant.canonical_eloily()
    lines = {frozenset(e.line_labels(li)) for li in range(e.n_lines)}
    monomials = invariant.i3_monomials()
    assert len(monomials) == 45
    found = {frozenset(invariant.slot_label(*slot) for slot in slots) for _, slots in monomials}
    assert found == lines


def test_slots_cover_the_eloily_once():
    labels = [invariant.slot_label(*s) for s in invariant.SLOTS]
    e = invariant.canonical_eloily()
    assert sorted(labels) == sorted(e.label(k) for k in range(27))


def test_solved_dressing_is_the_frozen_one():
    solved = invariant.solve_sign_dressing()
    assert solved.signs == invariant.DRESSING.signs
    assert (solved.rank, solved.nullity) == (21, 6)


@given(st.integers(0, (1 << 27) - 1))
def test_dressed_i3_equals_chi(bits):
    g = invariant.canonical_eloily()
    a = ctx.Assignment(g, bits)
    assert int(invariant.i3_det(invariant.assignment_to_matrices(a))) == ctx.cabello_chi(g, a)


def test_undressed_i3_is_minus_chi():
    g = invariant.canonical_eloily()
    plain = invariant.SignDressing({pid: 1 for pid in g.point_ids})
    vals = np.random.default_rng(5).choice([-1, 1], size=(2000, 27))
    i3 = invariant.i3_det(invariant.values_to_matrices(vals, plain))
    assert (i3 == -chi_of(g, vals)).all()


def test_vectorised_matrices_agree_with_single_ones():
    g = invariant.canonical_eloily()
    rng = np.random.default_rng(9)
    for bits in rng.integers(0, 1 << 27, size=20):
        a = ctx.Assignment(g, int(bits))
        one = invariant.assignment_to_matrices(a)
        many = invariant.values_to_matrices(a.values[None, :])
        for blk in invariant.BLOCKS:
            assert (many.block(blk)[0] == one.block(blk)).all()


@pytest.mark.parametrize("block", invariant.BLOCKS)
def test_grid_determinant_equals_chi_everywhere(block):
    g, dets = invariant.grid_determinants(block)
    bits = np.arange(512)
    vals = np.where((bits[:, None] >> np.arange(9)) & 1, -1, 1)
    assert (dets == chi_of(g, vals)).all()
    assert dets.max() == 4


def test_pm1_determinants():
    dets = invariant.det3(invariant.all_pm1_matrices())
    assert set(dets.tolist()) == {-4, 0, 4}
    brute = [round(np.linalg.det(np.array(m).reshape(3, 3))) for m in itertools.product((1, -1), repeat=9)]
    assert sorted(dets.tolist()) == sorted(brute)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.int64, (15,), elements=st.integers(-4, 4)))
def test_pfaffian_squares_to_determinant(upper):
    m = np.zeros((6, 6), dtype=np.int64)
    m[np.triu_indices(6, 1)] = upper
    m = m - m.T
    pf = int(invariant.pfaffian(m))
    assert pf * pf == int(sympy.Matrix(m.tolist()).det())


def test_doily_pfaffian_equals_chi(doily):
    pf = invariant.doily_pfaffian_all(doily)
    bits = np.arange(1 << 15)
    vals = np.where((bits[:, None] >> np.arange(15)) & 1, -1, 1)
    assert (pf == chi_of(doily, vals)).all()
    assert pf.max() == 9
    a = ctx.Assignment(doily, 12345)
    assert invariant.doily_pfaffian(a) == pf[12345]


def test_frozen_duad_map_sends_lines_to_synthemes(doily):
    duads = invariant.frozen_duad_map()
    for row in doily.line_points:
        pairs = [duads[doily.point_ids[k]] for k in row]
        assert sorted(x for p in pairs for x in p) == list(range(6))


def test_duad_search_recovers_the_frozen_labelling(doily):
    duads, dressing = invariant.find_duad_labelling(doily)
    assert duads == invariant.frozen_duad_map()
    assert dressing == invariant.frozen_duad_dressing()


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_solve_gf2_solves_consistent_systems(n_rows, n_cols, seed):
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, 2, size=(n_rows, n_cols))
    x_true = rng.integers(0, 2, size=n_cols)
    rhs = rows @ x_true % 2
    x, rank = invariant.solve_gf2(rows, rhs)
    assert x is not None
    assert ((rows @ x) % 2 == rhs).all()
    # the row space over F2 has exactly 2**rank vectors
    span = {tuple(np.array(c) @ rows % 2) for c in itertools.product((0, 1), repeat=n_rows)}
    assert len(span) == 1 << rank


def test_solve_gf2_detects_inconsistency():
    rows = np.array([[1, 1], [1, 1]])
    x, _ = invariant.solve_gf2(rows, np.array([0, 1]))
    assert x is None


@pytest.mark.parametrize("kind, value", [("grid", 4), ("doily", 9), ("eloily", 27)])
def test_max_i3_is_the_hidden_variable_bound(kind, value):
    res = invariant.max_i3(kind)
    assert res.value == res.hv_bound == value
    assert res.direct_check
