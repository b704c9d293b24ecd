import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gqgames import geometry
from gqgames.pauli import all_points, format_label, parse, to_matrix


def dense_contexts(labels):
    """Commuting triples multiplying to +-I, found with 2^n x 2^n matrices."""
    mats = {s: to_matrix(parse(s)) for s in labels}
    ident = np.eye(len(next(iter(mats.values()))))
    out = {}
    for a, b, c in itertools.combinations(sorted(labels), 3):
        ma, mb, mc = mats[a], mats[b], mats[c]
        if not (np.allclose(ma @ mb, mb @ ma) and np.allclose(ma @ mc, mc @ ma) and np.allclose(mb @ mc, mc @ mb)):
            continue
        prod = ma @ mb @ mc
        for sign in (1, -1):
            if np.allclose(prod, sign * ident):
                out[frozenset((a, b, c))] = sign
    return out


def line_map(g):
    return {frozenset(g.line_labels(li)): ln.sign for li, ln in enumerate(g.lines)}


def point_labels(g):
    return {g.label(k) for k in range(g.n_points)}


def test_eloily_matches_dense_enumeration(eloily):
    # points of the elliptic quadric: Y count plus anticommutation with YYY is even
    yyy = to_matrix(parse("YYY"))
    labels = set()
    for s in ("".join(t) for t in itertools.product("IXYZ", repeat=3)):
        if s == "III":
            continue
        m = to_matrix(parse(s))
        anti = not np.allclose(m @ yyy, yyy @ m)
        if (s.count("Y") + anti) % 2 == 0:
            labels.add(s)
    assert point_labels(eloily) == labels
    assert line_map(eloily) == dense_contexts(labels)


def test_doily_matches_dense_enumeration(doily):
    assert line_map(doily) == dense_contexts(point_labels(doily))


@pytest.mark.parametrize(
    "name, points, lines, negative, per_point",
    [
        ("grid", 9, 6, 3, 2),
        ("mermin", 9, 6, 1, 2),
        ("doily", 15, 15, 3, 3),
        ("doily-2q", 15, 15, 3, 3),
        ("eloily", 27, 45, 9, 5),
        ("w52", 63, 315, None, 15),
    ],
)
def test_sizes(name, points, lines, negative, per_point):
    g = geometry.build_named(name)
    assert (g.n_points, g.n_lines) == (points, lines)
    if negative is not None:
        assert len(g.negative_lines) == negative
    assert {len(inc) for inc in g.incidence} == {per_point}
    geometry.validate(g, check_signs=True)


def test_w32_lines_match_dense_enumeration():
    g = geometry.build_w32()
    labels = {format_label(p) for p in all_points(2)}
    assert line_map(g) == dense_contexts(labels)


@pytest.mark.parametrize("name, order", [("grid", (2, 1)), ("doily", (2, 2)), ("eloily", (2, 4))])
def test_gq_order(name, order):
    assert geometry.gq_order(geometry.build_named(name)) == order


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 26), st.integers(0, 44))
def test_eloily_quadrangle_axiom(p, li):
    # a point off a line is collinear with exactly one of its points
    g = geometry.build_eloily()
    row = [int(k) for k in g.line_points[li]]
    if p in row:
        return
    neighbours = {int(k) for m in g.incidence[p] for k in g.line_points[m]}
    assert sum(q in neighbours for q in row) == 1


def test_eloily_negative_lines_partition_points(eloily):
    covered = sorted(int(k) for li in eloily.negative_lines for k in eloily.line_points[li])
    assert covered == list(range(27))
    assert geometry.spread_failure(eloily, eloily.negative_lines) is None
    assert geometry.find_negative_spread(eloily).lines == frozenset(eloily.negative_lines)


def test_doily_negative_lines_are_not_a_spread(doily):
    assert geometry.spread_failure(doily, doily.negative_lines) is not None
    assert geometry.find_negative_spread(doily) is None


def test_quadric_sizes():
    pts = all_points(3)
    assert {len(geometry.elliptic_quadric(q)) for q in pts if q.y_count % 2} == {27}
    even = [p for p in pts if p.y_count % 2 == 0]
    assert {len(geometry.hyperbolic_quadric(q)) for q in even} == {35}


def test_subgeometry_counts(eloily):
    grids = geometry.enumerate_subgeometries(eloily, "grid")
    doilies = geometry.enumerate_subgeometries(eloily, "doily")
    assert (len(grids), len(doilies)) == (120, 36)
    for sub in grids[:5] + doilies[:5]:
        lines = line_map(eloily)
        assert all(lines[k] == v for k, v in line_map(sub).items())


def test_canonical_grids_are_disjoint_and_signed(eloily):
    grids = geometry.build_canonical_grids()
    seen = set()
    for g in grids:
        assert point_labels(g) <= point_labels(eloily)
        assert not seen & point_labels(g)
        seen |= point_labels(g)
        assert len(g.negative_lines) % 2 == 1
    assert len(seen) == 27


def test_text_roundtrip(eloily):
    again = geometry.loads(geometry.dumps(eloily))
    assert again.lines == eloily.lines and again.point_ids == eloily.point_ids
    assert again.name == eloily.name


def test_stored_file_matches_construction(eloily):
    stored = geometry.load_stored_eloily()
    assert stored.lines == eloily.lines


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("XXI IXX XIX\n", 1),
        ("XXI IXX XIX +1\nXXI IXQ XIX +1\n", 2),
        ("XXI IXX XIX 0\n", 1),
        ("XXI IXX XIX +1\nXX IXX XIX +1\n", 2),
        ("-XXI IXX XIX +1\n", 1),
    ],
)
def test_corrupted_text_names_the_line(text, lineno):
    with pytest.raises(geometry.GeometryFormatError) as err:
        geometry.loads(text)
    assert err.value.lineno == lineno


def test_non_commuting_line_is_rejected():
    with pytest.raises(geometry.GeometryValidationError):
        geometry.loads("XII ZII YII +1\n")


def test_relabel_keeps_incidence_shape(doily):
    perm = np.random.default_rng(3).permutation(doily.n_points)
    moved = doily.relabel(perm)
    assert sorted(map(len, moved.incidence)) == sorted(map(len, doily.incidence))
    assert sorted(moved.signs) == sorted(doily.signs)
    with pytest.raises(ValueError):
        doily.relabel([0] * doily.n_points)
