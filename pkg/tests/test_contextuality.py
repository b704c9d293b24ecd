import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gqgames import contextuality as ctx
from gqgames import geometry


def brute_force_degree(g):
    """Violated-line counts for every assignment, straight from products."""
    bits = np.arange(1 << g.n_points)
    vals = np.where((bits[:, None] >> np.arange(g.n_points)) & 1, -1, 1)
    counts = (vals[:, g.line_points].prod(axis=2) != g.signs).sum(axis=1)
    return int(counts.min()), int((counts == counts.min()).sum()), int(bits[counts.argmin()])


@pytest.mark.parametrize("name, d", [("grid", 1), ("mermin", 1), ("doily", 3), ("doily-2q", 3)])
def test_degree_matches_brute_force(name, d):
    g = geometry.build_named(name)
    res = ctx.degree_of_contextuality(g)
    want_d, want_count, want_witness = brute_force_degree(g)
    assert res.d == want_d == d
    assert res.minimal_count == want_count
    assert res.witness.bits == want_witness
    assert res.assignments == 1 << g.n_points
    assert ctx.violated_lines(g, res.witness).count == d


def test_eloily_degree_and_spread_property(eloily):
    res = ctx.degree_of_contextuality(eloily)
    assert res.d == 9
    assert ctx.hv_bound(eloily) == 27
    verdict = ctx.verify_minimal_spread_property(eloily)
    assert verdict.holds and verdict.counterexample is None
    violated = ctx.violated_lines(eloily, res.witness).violated
    assert geometry.spread_failure(eloily, violated) is None


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 4), st.integers(0, 8))
def test_result_does_not_depend_on_sharding(workers, shard_bits):
    g = geometry.build_doily()
    base = ctx.degree_of_contextuality(g)
    res = ctx.degree_of_contextuality(g, workers=workers, shard_bits=shard_bits)
    assert (res.d, res.witness.bits, res.minimal_count, res.non_spread_count) == (
        base.d, base.witness.bits, base.minimal_count, base.non_spread_count,
    )


@settings(max_examples=10, deadline=None)
@given(st.permutations(range(15)))
def test_degree_is_invariant_under_relabelling(perm):
    g = geometry.build_doily()
    moved = g.relabel(perm)
    assert ctx.degree_of_contextuality(moved).d == 3
    assert brute_force_degree(moved)[1] == ctx.degree_of_contextuality(g).minimal_count


@given(st.integers(0, (1 << 27) - 1))
def test_chi_is_lines_minus_twice_violations(bits):
    g = geometry.build_eloily()
    a = ctx.Assignment(g, bits)
    report = ctx.violated_lines(g, a)
    assert ctx.cabello_chi(g, a) == g.n_lines - 2 * report.count == report.chi


@given(st.integers(0, (1 << 27) - 1), st.integers(0, 26))
def test_flip_toggles_exactly_the_lines_through_the_point(bits, p):
    g = geometry.build_eloily()
    a = ctx.Assignment(g, bits)
    before = ctx.violated_lines(g, a).violated
    after = ctx.violated_lines(g, a.flip(p)).violated
    assert before ^ after == frozenset(g.incidence[p])


@given(st.lists(st.integers(0, (1 << 15) - 1), min_size=1, max_size=50))
def test_vectorised_counts_match_single_reports(bits):
    g = geometry.build_doily()
    counts = ctx.violation_counts(g, np.array(bits))
    assert counts.tolist() == [ctx.violated_lines(g, ctx.Assignment(g, b)).count for b in bits]


def test_gray_walk_counts_match_scratch_counts(doily):
    steps = np.array([0, 1, 2, 3, 100, 4095, 32767])
    assignments, counts = ctx.gray_walk_checkpoints(doily, steps)
    # step i of a reflected Gray walk visits i ^ (i >> 1)
    assert assignments.tolist() == (steps ^ (steps >> 1)).tolist()
    assert counts.tolist() == ctx.violation_counts(doily, assignments).tolist()


def test_assignment_round_trip(doily):
    vals = [1, -1] * 7 + [1]
    a = ctx.Assignment.from_values(doily, vals)
    assert a.values.tolist() == vals
    with pytest.raises(ValueError):
        ctx.Assignment.from_values(doily, [1, 0] * 7 + [1])
    with pytest.raises(ValueError):
        ctx.Assignment(doily, 1 << 15)


def test_too_large_searches_are_refused():
    with pytest.raises(ctx.SearchTooLargeError):
        ctx.degree_of_contextuality(geometry.build_w52())


def test_workers_must_be_positive(grid):
    with pytest.raises(ValueError):
        ctx.degree_of_contextuality(grid, workers=0)
