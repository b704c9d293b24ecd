"""Point-line geometries labelled by Pauli observables.

Points are unsigned Pauli operators identified by their point id (see
:mod:`gqgames.pauli`).  A line is a context: three distinct, pairwise
commuting points whose bit vectors sum to zero, together with the sign
``eps`` for which the product of the three operators is ``eps * I``.

Geometries loaded from files keep the signs stored in the file, so
hypothetical sign distributions can be studied; geometries built from
operators compute signs with :func:`gqgames.pauli.line_sign`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

from .pauli import (
    PauliOperator,
    PauliParseError,
    all_points,
    format_label,
    line_sign,
    parse,
    q0,
    qq,
    symplectic_form,
)


class GeometryFormatError(ValueError):
    """A geometry file could not be parsed."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


class GeometryValidationError(ValueError):
    """A geometry violates one of its structural invariants."""


@dataclass(frozen=True)
class Line:
    points: tuple[int, int, int]
    sign: int

    def __post_init__(self):
        if len(self.points) != 3 or len(set(self.points)) != 3:
            raise GeometryValidationError(f"a line needs three distinct points, got {self.points}")
        if self.sign not in (1, -1):
            raise GeometryValidationError(f"line sign must be +1 or -1, got {self.sign}")
        object.__setattr__(self, "points", tuple(sorted(self.points)))


@dataclass(frozen=True)
class Spread:
    lines: frozenset[int]


@dataclass(frozen=True)
class Geometry:
    """Points sorted by id and lines sorted by their point triples."""

    name: str
    points: tuple[PauliOperator, ...]
    lines: tuple[Line, ...]

    def __post_init__(self):
        pts = tuple(sorted((p.unsigned() for p in self.points), key=lambda p: p.id))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "lines", tuple(sorted(self.lines, key=lambda ln: ln.points)))

    @property
    def width(self) -> int:
        return self.points[0].width

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @cached_property
    def point_ids(self) -> tuple[int, ...]:
        return tuple(p.id for p in self.points)

    @cached_property
    def index_of(self) -> dict[int, int]:
        return {pid: k for k, pid in enumerate(self.point_ids)}

    @cached_property
    def line_points(self) -> np.ndarray:
        """``(n_lines, 3)`` array of point indices."""
        arr = np.array(
            [[self.index_of[pid] for pid in ln.points] for ln in self.lines], dtype=np.int64
        )
        return arr.reshape(len(self.lines), 3)

    @cached_property
    def signs(self) -> np.ndarray:
        return np.array([ln.sign for ln in self.lines], dtype=np.int64)

    @cached_property
    def incidence(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in self.points]
        for li, row in enumerate(self.line_points):
            for k in row:
                inc[k].append(li)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def negative_lines(self) -> tuple[int, ...]:
        return tuple(k for k, ln in enumerate(self.lines) if ln.sign < 0)

    def label(self, index: int) -> str:
        return format_label(self.points[index])

    def line_labels(self, line_index: int) -> tuple[str, str, str]:
        return tuple(self.label(k) for k in self.line_points[line_index])

    def line_index(self, point_ids: Iterable[int]) -> int:
        key = tuple(sorted(point_ids))
        for k, ln in enumerate(self.lines):
            if ln.points == key:
                return k
        raise KeyError(key)

    def with_signs(self, signs: Iterable[int], name: str | None = None) -> Geometry:
        """Same incidence, replacement line signs."""
        new = [Line(ln.points, int(s)) for ln, s in zip(self.lines, signs, strict=True)]
        return Geometry(name or self.name, self.points, tuple(new))

    def relabel(self, permutation: Iterable[int], name: str | None = None) -> Geometry:
        """Move point ``k`` onto the id of point ``permutation[k]``.

        Incidence and signs are carried over, so the result is isomorphic but
        generally no longer an operator labelling; used to check that searches
        do not depend on point ordering.
        """
        perm = [int(k) for k in permutation]
        if sorted(perm) != list(range(self.n_points)):
            raise ValueError("not a permutation of the point indices")
        new_id = {old: self.point_ids[perm[k]] for k, old in enumerate(self.point_ids)}
        lines = tuple(Line(tuple(new_id[p] for p in ln.points), ln.sign) for ln in self.lines)
        return Geometry(name or self.name, self.points, lines)


def _line_key(a: int, b: int) -> tuple[int, int, int]:
    return tuple(sorted((a, b, a ^ b)))


def induced_geometry(name: str, ops: Iterable[PauliOperator]) -> Geometry:
    """All contexts whose three points lie in ``ops``, signs from the operators."""
    ops = [op.unsigned() for op in ops]
    by_id = {op.id: op for op in ops}
    if len(by_id) != len(ops):
        raise GeometryValidationError("duplicate points")
    keys = set()
    for a, b in itertools.combinations(sorted(by_id), 2):
        c = a ^ b
        if c in by_id and symplectic_form(by_id[a], by_id[b]) == 0:
            keys.add(_line_key(a, b))
    lines = tuple(Line(k, line_sign(*(by_id[p] for p in k))) for k in sorted(keys))
    return Geometry(name, tuple(by_id.values()), lines)


def build_symplectic(width: int, name: str | None = None) -> Geometry:
    """W(2N-1, 2): every non-identity N-qubit operator and every context."""
    return induced_geometry(name or f"W({2 * width - 1},2)", all_points(width))


def build_w52() -> Geometry:
    return build_symplectic(3)


def build_w32() -> Geometry:
    """The two-qubit doily."""
    return build_symplectic(2, name="doily-2q")


def _as_point(q, width: int = 3):
    if isinstance(q, str):
        return parse(q)
    if isinstance(q, int):
        return PauliOperator.from_id(q, width)
    return q


def _quadric(q, want_q0: int) -> frozenset[int]:
    q = _as_point(q)
    if q0(q) != want_q0:
        kind = "elliptic" if want_q0 else "hyperbolic"
        need = "skew" if want_q0 else "even"
        raise ValueError(f"{kind} quadric needs a {need} parameter, got {format_label(q)}")
    return frozenset(p.id for p in all_points(q.width) if qq(q, p) == 0)


def elliptic_quadric(q) -> frozenset[int]:
    """Point ids of ``E_q`` for a skew ``q``."""
    if _as_point(q).is_identity:
        raise ValueError("elliptic quadric needs a skew parameter, got the identity")
    return _quadric(q, 1)


def hyperbolic_quadric(q) -> frozenset[int]:
    """Point ids of ``H_q`` for an even ``q``; ``q`` may be the identity."""
    return _quadric(q, 0)


def _ops(ids: Iterable[int], width: int) -> list[PauliOperator]:
    return [PauliOperator.from_id(pid, width) for pid in sorted(ids)]


def build_eloily(q="YYY") -> Geometry:
    """GQ(2,4) induced by W(5,2) on the elliptic quadric ``E_q``."""
    qp = _as_point(q)
    return induced_geometry(f"eloily[{format_label(qp)}]", _ops(elliptic_quadric(qp), qp.width))


def build_doily(q="YYY") -> Geometry:
    """GQ(2,2) on ``E_q`` intersected with the even points ``H_III``."""
    qp = _as_point(q)
    ids = elliptic_quadric(qp) & hyperbolic_quadric(PauliOperator.identity(qp.width))
    return induced_geometry(f"doily[{format_label(qp)}]", _ops(ids, qp.width))


# Three Mermin grids partitioning E_YYY by the position of the identity.
GRID_A = (("XYI", "ZXI", "YZI"), ("ZZI", "YYI", "XXI"), ("YXI", "XZI", "ZYI"))
GRID_B = (("YIX", "XIZ", "ZIY"), ("ZIZ", "YIY", "XIX"), ("XIY", "ZIX", "YIZ"))
GRID_C = (("IXY", "IZX", "IYZ"), ("IZZ", "IYY", "IXX"), ("IYX", "IXZ", "IZY"))
CANONICAL_GRIDS = {"A": GRID_A, "B": GRID_B, "C": GRID_C}

# Two-qubit Mermin-Peres square; rows multiply to +I, the last column to -I.
MERMIN_SQUARE = (("XI", "IX", "XX"), ("IZ", "ZI", "ZZ"), ("XZ", "ZX", "YY"))


def grid_from_labels(name: str, cells) -> Geometry:
    """A 3x3 grid whose rows and columns are contexts."""
    ops = [[parse(c) for c in row] for row in cells]
    triples = [row for row in ops] + [[ops[r][c] for r in range(3)] for c in range(3)]
    lines = tuple(Line(tuple(o.id for o in t), line_sign(*t)) for t in triples)
    return Geometry(name, tuple(o for row in ops for o in row), lines)


def build_canonical_grids() -> tuple[Geometry, Geometry, Geometry]:
    return tuple(grid_from_labels(f"grid-{k}", cells) for k, cells in CANONICAL_GRIDS.items())


def build_mermin_grid() -> Geometry:
    return grid_from_labels("mermin-2q", MERMIN_SQUARE)


def build_named(selector: str) -> Geometry:
    """``grid`` (grid A), ``doily``, ``eloily``, ``w52``, ``mermin`` or ``doily-2q``."""
    builders = {
        "grid": lambda: build_canonical_grids()[0],
        "doily": build_doily,
        "eloily": build_eloily,
        "w52": build_w52,
        "mermin": build_mermin_grid,
        "doily-2q": build_w32,
    }
    try:
        return builders[selector]()
    except KeyError:
        raise ValueError(f"unknown geometry {selector!r}") from None


def validate(g: Geometry, check_signs: bool = False) -> None:
    """Raise :class:`GeometryValidationError` on any broken context invariant."""
    if not g.points:
        raise GeometryValidationError("geometry has no points")
    widths = {p.width for p in g.points}
    if len(widths) != 1:
        raise GeometryValidationError(f"mixed operator widths {sorted(widths)}")
    if len(set(g.point_ids)) != len(g.point_ids):
        raise GeometryValidationError("duplicate points")
    seen = set()
    for ln in g.lines:
        if ln.points in seen:
            raise GeometryValidationError(f"duplicate line {ln.points}")
        seen.add(ln.points)
        a, b, c = ln.points
        for pid in ln.points:
            if pid not in g.index_of:
                raise GeometryValidationError(f"line {ln.points} uses unknown point {pid}")
        if a ^ b ^ c:
            raise GeometryValidationError(
                "points " + " ".join(_labels(g, ln)) + " do not multiply to +-I"
            )
        ops = [g.points[g.index_of[p]] for p in ln.points]
        for x, y in itertools.combinations(ops, 2):
            if symplectic_form(x, y):
                raise GeometryValidationError(
                    f"{format_label(x)} and {format_label(y)} do not commute"
                )
        if check_signs and line_sign(*ops) != ln.sign:
            raise GeometryValidationError("sign of " + " ".join(_labels(g, ln)) + " is wrong")


def _labels(g: Geometry, ln: Line) -> list[str]:
    return [format_label(g.points[g.index_of[p]]) for p in ln.points]


def is_triangle_free(g: Geometry) -> bool:
    """No three pairwise collinear points that are not on a common line."""
    collinear: dict[int, set[int]] = {k: set() for k in range(g.n_points)}
    on_line: set[frozenset[int]] = set()
    for row in g.line_points:
        row = [int(k) for k in row]
        on_line.add(frozenset(row))
        for a, b in itertools.combinations(row, 2):
            collinear[a].add(b)
            collinear[b].add(a)
    for a in range(g.n_points):
        for b in collinear[a]:
            if b <= a:
                continue
            for c in collinear[a] & collinear[b]:
                if c > b and frozenset((a, b, c)) not in on_line:
                    return False
    return True


def gq_order(g: Geometry) -> tuple[int, int] | None:
    """``(s, t)`` if ``g`` is a generalized quadrangle GQ(s, t), else None."""
    degrees = {len(x) for x in g.incidence}
    if len(degrees) != 1 or not is_triangle_free(g):
        return None
    s, t = 2, degrees.pop() - 1
    if g.n_points != (s + 1) * (s * t + 1) or g.n_lines != (t + 1) * (s * t + 1):
        return None
    return s, t


def spread_failure(g: Geometry, lines: Iterable[int]) -> str | None:
    """Why ``lines`` is not a spread of ``g``, or None if it is one."""
    lines = sorted(set(lines))
    cover = np.zeros(g.n_points, dtype=np.int64)
    for li in lines:
        cover[g.line_points[li]] += 1
    twice = np.flatnonzero(cover > 1)
    if twice.size:
        return f"lines are not pairwise disjoint: point {g.label(int(twice[0]))} is covered {int(cover[twice[0]])} times"
    missed = np.flatnonzero(cover == 0)
    if missed.size:
        return f"{missed.size} of {g.n_points} points are not covered, e.g. {g.label(int(missed[0]))}"
    return None


def find_negative_spread(g: Geometry) -> Spread | None:
    """The negative lines as a spread, if they form one."""
    if spread_failure(g, g.negative_lines) is None:
        return Spread(frozenset(g.negative_lines))
    return None


_SUBGEOMETRY_SHAPES = {"grid": (2, 9, 6), "doily": (3, 15, 15)}


def enumerate_subgeometries(g: Geometry, kind: str) -> list[Geometry]:
    """All embedded grids (GQ(2,1)) or doilies (GQ(2,2)) of ``g``.

    Backtracking over line subsets: the smallest point of a candidate is
    fixed as the root, each reached point is completed to the required
    number of lines, and a candidate is kept when it is closed (no other
    line of ``g`` lies inside its points).
    """
    try:
        degree, n_points, n_lines = _SUBGEOMETRY_SHAPES[kind]
    except KeyError:
        raise ValueError(f"unsupported subgeometry kind {kind!r}") from None

    lp = [tuple(int(k) for k in row) for row in g.line_points]
    inc = g.incidence
    found: set[frozenset[int]] = set()

    for root in range(g.n_points):
        allowed = {li for li, pts in enumerate(lp) if min(pts) >= root}

        def extend(selected: frozenset[int], closed: frozenset[int]) -> None:
            pts: set[int] = set()
            for li in selected:
                pts.update(lp[li])
            if len(pts) > n_points or len(selected) > n_lines:
                return
            deg = {p: sum(1 for li in inc[p] if li in selected) for p in pts}
            if any(d > degree for d in deg.values()):
                return
            open_pts = [p for p in pts if deg[p] < degree]
            if not open_pts:
                if len(pts) == n_points and len(selected) == n_lines:
                    inside = {li for li in allowed if set(lp[li]) <= pts}
                    if inside == set(selected):
                        found.add(selected)
                return
            best = None
            for p in open_pts:
                opts = [li for li in inc[p] if li in allowed and li not in selected and li not in closed]
                if best is None or len(opts) < len(best[1]):
                    best = (p, opts)
            p, opts = best
            need = degree - deg[p]
            for combo in itertools.combinations(opts, need):
                rest = frozenset(opts) - frozenset(combo)
                extend(selected | frozenset(combo), closed | rest)

        root_lines = [li for li in inc[root] if li in allowed]
        for combo in itertools.combinations(root_lines, degree):
            extend(frozenset(combo), frozenset(root_lines) - frozenset(combo))

    out = []
    for k, sel in enumerate(sorted(found, key=lambda s: sorted(s))):
        lines = tuple(g.lines[li] for li in sorted(sel))
        pids = sorted({p for ln in lines for p in ln.points})
        pts = tuple(g.points[g.index_of[p]] for p in pids)
        out.append(Geometry(f"{g.name}/{kind}-{k}", pts, lines))
    return out


def dumps(g: Geometry) -> str:
    """Canonical text form: one ``LABEL LABEL LABEL sign`` row per line."""
    rows = [f"# geometry: {g.name}", f"# points: {g.n_points} lines: {g.n_lines}"]
    for li, ln in enumerate(g.lines):
        rows.append(" ".join(g.line_labels(li)) + (" +1" if ln.sign > 0 else " -1"))
    return "\n".join(rows) + "\n"


def loads(text: str, name: str = "loaded") -> Geometry:
    """Parse the text form; signs are taken from the file, not recomputed."""
    ops: dict[int, PauliOperator] = {}
    lines: list[Line] = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            if body.startswith("geometry:"):
                name = body.split(":", 1)[1].strip() or name
            continue
        fields = stripped.split()
        if len(fields) != 4:
            raise GeometryFormatError(f"expected 3 labels and a sign, got {len(fields)} fields", lineno)
        try:
            labels = [parse(f) for f in fields[:3]]
        except PauliParseError as exc:
            raise GeometryFormatError(str(exc), lineno) from exc
        if any(op.sign < 0 for op in labels):
            raise GeometryFormatError("point labels must be unsigned", lineno)
        if fields[3] not in ("+1", "-1", "1"):
            raise GeometryFormatError(f"sign must be +1 or -1, got {fields[3]!r}", lineno)
        for op in labels:
            if width is None:
                width = op.width
            elif op.width != width:
                raise GeometryFormatError(f"label {format_label(op)} has width {op.width}, expected {width}", lineno)
            ops[op.id] = op
        try:
            lines.append(Line(tuple(op.id for op in labels), -1 if fields[3] == "-1" else 1))
        except GeometryValidationError as exc:
            raise GeometryFormatError(str(exc), lineno) from exc
    if not lines:
        raise GeometryFormatError("no lines found")
    g = Geometry(name, tuple(ops.values()), tuple(lines))
    validate(g)
    return g


def save(g: Geometry, path) -> None:
    Path(path).write_text(dumps(g), encoding="utf-8")


def load(path) -> Geometry:
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), name=path.stem)


def data_path(name: str) -> Path:
    return Path(__file__).parent / "data" / name


def load_stored_eloily() -> Geometry:
    """The canonical labelling of GQ(2,4) as transcribed in ``data/eloily_yyy.txt``."""
    return load(data_path("eloily_yyy.txt"))
