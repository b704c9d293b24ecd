"""The cubic three-qubit invariant and its relation to Cabello's chi.

The 27 eloily points are split by the position of their identity factor
into three blocks; slot ``(i, j)`` of block A holds ``s_i s_j I``, of B
``s_i I s_j`` and of C ``I s_i s_j`` with ``(s_1, s_2, s_3) = (X, Y, Z)``.
With that placement the 45 monomials of

    I3 = Det(A) + Det(B) + Det(C) - Tr(C B^T A)

are exactly the 45 contexts of the eloily, and ``I3 = -Tr(H^3) / 48`` for
``H = sum A_ij s_i s_j I + sum B_ij s_i I s_j + sum C_ij I s_i s_j``.

Plugging raw hidden-variable values into the slots gives ``-chi``; a sign
dressing of the points (found by :func:`solve_sign_dressing`) turns the
identity into ``I3 = chi``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import sympy

from . import contextuality as ctx
from .geometry import Geometry, build_canonical_grids, build_doily, build_eloily
from .pauli import PauliOperator, format_label, parse, to_matrix

SIGMA = "XYZ"
BLOCKS = ("A", "B", "C")


class DressingError(ValueError):
    """No point dressing reproduces the line parities."""


def slot_label(block: str, i: int, j: int) -> str:
    a, b = SIGMA[i], SIGMA[j]
    return {"A": a + b + "I", "B": a + "I" + b, "C": "I" + a + b}[block]


def slot_operator(block: str, i: int, j: int) -> PauliOperator:
    return parse(slot_label(block, i, j))


SLOTS = tuple((blk, i, j) for blk in BLOCKS for i in range(3) for j in range(3))


@dataclass(frozen=True)
class HVMatrices:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @classmethod
    def zeros(cls) -> HVMatrices:
        return cls(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((3, 3)))

    def block(self, name: str) -> np.ndarray:
        return {"A": self.A, "B": self.B, "C": self.C}[name]


def det3(m: np.ndarray) -> np.ndarray:
    """Cofactor expansion; exact for integer input, works on stacks ``(..., 3, 3)``."""
    m = np.asarray(m)
    return (
        m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
        - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
        + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
    )


def i3_det(m: HVMatrices):
    """``Det(A) + Det(B) + Det(C) - Tr(C B^T A)``; vectorises over leading axes."""
    A, B, C = (np.asarray(x) for x in (m.A, m.B, m.C))
    cross = np.einsum("...ij,...kj,...ki->...", C, B, A)
    return det3(A) + det3(B) + det3(C) - cross


def hermitian_h(m: HVMatrices) -> np.ndarray:
    """The 8x8 observable with coefficient ``block[i, j]`` on slot ``(i, j)``."""
    h = np.zeros((8, 8), dtype=complex)
    for blk, i, j in SLOTS:
        h += m.block(blk)[i, j] * to_matrix(slot_operator(blk, i, j))
    return h


def i3_trace(m: HVMatrices) -> float:
    h = hermitian_h(m)
    return float(-np.trace(h @ h @ h).real / 48)


# ---------------------------------------------------------------------------
# dressing of the eloily points


@dataclass(frozen=True)
class SignDressing:
    """Per-point sign, keyed by point id of the canonical eloily."""

    signs: dict[int, int]
    rank: int = 0
    nullity: int = 0

    def sign(self, pid: int) -> int:
        return self.signs[pid]


def canonical_eloily() -> Geometry:
    return build_eloily("YYY")


def _slot_symbols():
    return {slot: sympy.Symbol(f"{slot[0]}{slot[1] + 1}{slot[2] + 1}") for slot in SLOTS}


def i3_monomials() -> list[tuple[int, tuple[tuple[str, int, int], ...]]]:
    """Symbolic expansion of ``i3_det`` into ``(coefficient, slots)`` terms."""
    sym = _slot_symbols()
    mats = {
        blk: sympy.Matrix(3, 3, lambda i, j, b=blk: sym[(b, i, j)]) for blk in BLOCKS
    }
    expr = sympy.expand(
        mats["A"].det() + mats["B"].det() + mats["C"].det()
        - (mats["C"] * mats["B"].T * mats["A"]).trace()
    )
    back = {v: k for k, v in sym.items()}
    out = []
    for term, coeff in expr.as_coefficients_dict().items():
        factors = term.as_powers_dict()
        if any(p != 1 for p in factors.values()):
            raise DressingError(f"monomial {term} is not square-free")
        out.append((int(coeff), tuple(sorted(back[s] for s in factors))))
    return sorted(out, key=lambda t: t[1])


def solve_gf2(rows: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray | None, int]:
    """Solve ``rows @ x = rhs`` over F2; returns (solution or None, rank).

    Free variables are set to zero, so the solution is deterministic.
    """
    a = np.concatenate([rows.astype(np.uint8) & 1, (rhs.astype(np.uint8) & 1)[:, None]], axis=1)
    n_rows, n_cols = rows.shape
    pivots = []
    r = 0
    for c in range(n_cols):
        hit = np.flatnonzero(a[r:, c])
        if hit.size == 0:
            continue
        p = r + hit[0]
        a[[r, p]] = a[[p, r]]
        others = np.flatnonzero(a[:, c])
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    if np.any(a[r:, -1]):
        return None, r
    x = np.zeros(n_cols, dtype=np.uint8)
    for k, c in enumerate(pivots):
        x[c] = a[k, -1]
    return x, r


def solve_sign_dressing() -> SignDressing:
    """Point signs making every I3 monomial carry its context's parity."""
    g = canonical_eloily()
    slot_pid = {slot: slot_operator(*slot).id for slot in SLOTS}
    monos = i3_monomials()
    if len(monos) != g.n_lines:
        raise DressingError(f"I3 has {len(monos)} monomials, the eloily {g.n_lines} lines")
    rows = np.zeros((len(monos), g.n_points), dtype=np.uint8)
    rhs = np.zeros(len(monos), dtype=np.uint8)
    for r, (coeff, slots) in enumerate(monos):
        pids = [slot_pid[s] for s in slots]
        try:
            li = g.line_index(pids)
        except KeyError:
            labels = " ".join(format_label(PauliOperator.from_id(p, 3)) for p in pids)
            raise DressingError(f"monomial on {labels} is not a context") from None
        if abs(coeff) != 1:
            raise DressingError(f"monomial coefficient {coeff} is not +-1")
        for pid in pids:
            rows[r, g.index_of[pid]] = 1
        rhs[r] = (coeff * g.lines[li].sign) < 0
    x, rank = solve_gf2(rows, rhs)
    if x is None:
        raise DressingError(f"no dressing exists (rank {rank} of {g.n_points})")
    signs = {pid: (-1 if x[k] else 1) for k, pid in enumerate(g.point_ids)}
    return SignDressing(signs, rank, g.n_points - rank)


# Frozen output of solve_sign_dressing(); test_invariant re-derives it.
_DRESSING_MINUS = frozenset(
    {"ZXI", "ZYI", "ZZI", "ZIX", "ZIY", "ZIZ", "IXX", "IXY", "IXZ", "IYX", "IYY", "IYZ",
     "IZX", "IZY", "IZZ"}
)
DRESSING = SignDressing(
    {slot_operator(*s).id: (-1 if slot_label(*s) in _DRESSING_MINUS else 1) for s in SLOTS},
    rank=21,
    nullity=6,
)


def assignment_to_matrices(a: ctx.Assignment, dressing: SignDressing = DRESSING) -> HVMatrices:
    g = a.geometry
    if g.point_ids != canonical_eloily().point_ids:
        raise ValueError(f"{g.name} is not the canonical eloily")
    vals = a.values
    mats = {blk: np.zeros((3, 3), dtype=np.int64) for blk in BLOCKS}
    for blk, i, j in SLOTS:
        pid = slot_operator(blk, i, j).id
        mats[blk][i, j] = dressing.sign(pid) * vals[g.index_of[pid]]
    return HVMatrices(mats["A"], mats["B"], mats["C"])


def values_to_matrices(values: np.ndarray, dressing: SignDressing = DRESSING) -> HVMatrices:
    """Stacked version of :func:`assignment_to_matrices` for ``(k, 27)`` value arrays."""
    g = canonical_eloily()
    values = np.asarray(values)
    mats = {}
    for blk in BLOCKS:
        cols = []
        sgn = []
        for i in range(3):
            for j in range(3):
                pid = slot_operator(blk, i, j).id
                cols.append(g.index_of[pid])
                sgn.append(dressing.sign(pid))
        mats[blk] = (values[..., cols] * np.array(sgn)).reshape(values.shape[:-1] + (3, 3))
    return HVMatrices(mats["A"], mats["B"], mats["C"])


# ---------------------------------------------------------------------------
# doily Pfaffian


def pfaffian(m: np.ndarray):
    """Pfaffian by expansion along the first row; vectorises over leading axes."""
    m = np.asarray(m)
    n = m.shape[-1]
    if n == 0:
        return np.ones(m.shape[:-2], dtype=m.dtype)
    if n % 2:
        return np.zeros(m.shape[:-2], dtype=m.dtype)
    total = 0
    for j in range(1, n):
        keep = [k for k in range(n) if k not in (0, j)]
        minor = m[..., keep, :][..., :, keep]
        total = total + (-1) ** (j + 1) * m[..., 0, j] * pfaffian(minor)
    return total


DUADS = tuple(itertools.combinations(range(6), 2))


def _matching_sign(pairs) -> int:
    seq = [k for pair in pairs for k in sorted(pair)]
    inv = sum(1 for a, b in itertools.combinations(seq, 2) if a > b)
    return -1 if inv % 2 else 1


def duad_isomorphisms(g: Geometry):
    """Bijections points -> duads of {0..5} with lines -> synthemes."""
    n = g.n_points
    collinear = np.zeros((n, n), dtype=bool)
    for row in g.line_points:
        for a, b in itertools.combinations(row, 2):
            collinear[a, b] = collinear[b, a] = True
    assigned: list[tuple[int, int]] = []

    def rec(k: int):
        if k == n:
            yield tuple(assigned)
            return
        used = set(assigned)
        for d in DUADS:
            if d in used:
                continue
            if all(
                collinear[k, j] == (not set(d) & set(assigned[j])) for j in range(k)
            ):
                assigned.append(d)
                yield from rec(k + 1)
                assigned.pop()

    yield from rec(0)


def duad_dressing(g: Geometry, duad_map) -> dict[int, int] | None:
    """Point signs making Pf match chi for this labelling, or None."""
    index = {d: k for k, d in enumerate(duad_map)}
    rows = np.zeros((g.n_lines, g.n_points), dtype=np.uint8)
    rhs = np.zeros(g.n_lines, dtype=np.uint8)
    for li, row in enumerate(g.line_points):
        pairs = [duad_map[k] for k in row]
        if len(set().union(*pairs)) != 6:
            raise ValueError("labelling does not send lines to synthemes")
        rows[li, list(row)] = 1
        rhs[li] = (_matching_sign(pairs) * g.lines[li].sign) < 0
    x, _ = solve_gf2(rows, rhs)
    if x is None:
        return None
    assert all(index[duad_map[k]] == k for k in range(g.n_points))
    return {pid: (-1 if x[k] else 1) for k, pid in enumerate(g.point_ids)}


def find_duad_labelling(g: Geometry | None = None):
    """First duad labelling (in search order) that admits a dressing."""
    g = g or build_doily()
    for iso in duad_isomorphisms(g):
        dressing = duad_dressing(g, iso)
        if dressing is not None:
            return {pid: iso[k] for k, pid in enumerate(g.point_ids)}, dressing
    raise DressingError("no duad labelling reproduces the line parities")


# Frozen output of find_duad_labelling() for D_YYY.
DOILY_DUADS = {
    "IZZ": (0, 1), "ZIZ": (2, 3), "ZZI": (4, 5), "IZX": (0, 2), "ZIX": (1, 3), "IXZ": (1, 4),
    "ZXI": (0, 5), "IXX": (2, 4), "IYY": (3, 5), "XIZ": (2, 5), "XZI": (3, 4), "XIX": (1, 5),
    "YIY": (0, 4), "XXI": (0, 3), "YYI": (1, 2),
}
DOILY_DUAD_MINUS = frozenset({"IZZ", "ZZI", "IZX", "ZIX", "IYY", "XIZ"})


def frozen_duad_map() -> dict[int, tuple[int, int]]:
    return {parse(k).id: v for k, v in DOILY_DUADS.items()}


def frozen_duad_dressing() -> dict[int, int]:
    return {parse(k).id: (-1 if k in DOILY_DUAD_MINUS else 1) for k in DOILY_DUADS}


def doily_matrix(a: ctx.Assignment, duad_map=None, dressing=None) -> np.ndarray:
    g = a.geometry
    duad_map = duad_map or frozen_duad_map()
    dressing = dressing or frozen_duad_dressing()
    if sorted(duad_map.values()) != list(DUADS) or set(duad_map) != set(g.point_ids):
        raise ValueError("duad map is not a bijection between points and duads")
    vals = a.values
    m = np.zeros((6, 6), dtype=np.int64)
    for pid, (i, j) in duad_map.items():
        v = dressing[pid] * vals[g.index_of[pid]]
        m[i, j], m[j, i] = v, -v
    return m


def doily_pfaffian(a: ctx.Assignment, duad_map=None, dressing=None) -> int:
    if a.geometry.n_points != 15:
        raise ValueError("the Pfaffian form needs a 15-point doily")
    return int(pfaffian(doily_matrix(a, duad_map, dressing)))


def doily_pfaffian_all(g: Geometry | None = None, duad_map=None, dressing=None) -> np.ndarray:
    """Pf for every assignment ``0 .. 2**15 - 1`` of the doily."""
    g = g or build_doily()
    duad_map = duad_map or frozen_duad_map()
    dressing = dressing or frozen_duad_dressing()
    bits = np.arange(1 << g.n_points)
    vals = np.where((bits[:, None] >> np.arange(g.n_points)) & 1, -1, 1)
    m = np.zeros((bits.size, 6, 6), dtype=np.int64)
    for pid, (i, j) in duad_map.items():
        col = dressing[pid] * vals[:, g.index_of[pid]]
        m[:, i, j], m[:, j, i] = col, -col
    return pfaffian(m)


# ---------------------------------------------------------------------------
# maxima over hidden-variable inputs


@dataclass(frozen=True)
class MaxI3Result:
    kind: str
    value: int
    hv_bound: int
    d: int
    n_lines: int
    argmax: ctx.Assignment | None
    direct_check: bool


def all_pm1_matrices() -> np.ndarray:
    bits = np.arange(512)
    return np.where((bits[:, None] >> np.arange(9)) & 1, -1, 1).reshape(512, 3, 3)


def max_i3(kind: str, workers: int = 1) -> MaxI3Result:
    """Maximum of I3 over +-1 inputs, cross-checked against N - 2d."""
    if kind == "grid":
        g = build_canonical_grids()[0]
        value = int(det3(all_pm1_matrices()).max())
        res = ctx.degree_of_contextuality(g, workers)
        # grid A holds the block-A slots, so B = C = 0 reduces I3 to Det(A)
        vals = res.witness.values
        a = np.zeros((3, 3), dtype=np.int64)
        for i in range(3):
            for j in range(3):
                pid = slot_operator("A", i, j).id
                a[i, j] = DRESSING.sign(pid) * vals[g.index_of[pid]]
        direct = int(det3(a)) == g.n_lines - 2 * res.d
    elif kind == "doily":
        g = build_doily()
        value = int(doily_pfaffian_all(g).max())
        res = ctx.degree_of_contextuality(g, workers)
        direct = doily_pfaffian(res.witness) == g.n_lines - 2 * res.d
    elif kind == "eloily":
        g = canonical_eloily()
        res = ctx.degree_of_contextuality(g, workers)
        value = g.n_lines - 2 * res.d
        direct = int(i3_det(assignment_to_matrices(res.witness))) == value
    else:
        raise ValueError(f"unknown quadrangle {kind!r}")
    return MaxI3Result(kind, value, g.n_lines - 2 * res.d, res.d, g.n_lines, res.witness, direct)


def grid_determinants(block: str = "A") -> tuple[Geometry, np.ndarray]:
    """The grid holding ``block``'s slots and its dressed Det for all 512 assignments.

    With the other two blocks zero, I3 reduces to the determinant of one
    block, whose six monomials are the grid's rows and columns.
    """
    g = dict(zip(BLOCKS, build_canonical_grids()))[block]
    bits = np.arange(1 << g.n_points)
    vals = np.where((bits[:, None] >> np.arange(g.n_points)) & 1, -1, 1)
    m = np.zeros((bits.size, 3, 3), dtype=np.int64)
    for i in range(3):
        for j in range(3):
            pid = slot_operator(block, i, j).id
            m[:, i, j] = DRESSING.sign(pid) * vals[:, g.index_of[pid]]
    return g, det3(m)
