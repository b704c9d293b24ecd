"""Signed N-qubit Pauli observables over F2.

An operator is stored as a sign and two bit masks.  For an N-qubit
operator, qubit 1 (the leftmost tensor factor) is the most significant bit
of each mask, so the label ``XYI`` has ``xbits = 0b110`` and
``zbits = 0b010``.  The point of the binary symplectic space attached to an
operator is numbered by the integer ``[x1 .. xN z1 .. zN]``, i.e.
``(xbits << N) | zbits``; for three qubits that gives the ids 1..63.

Per qubit the encoding is

    (x, z) = (0, 0) -> I,  (1, 0) -> X,  (0, 1) -> Z,  (1, 1) -> Y

with ``Y = i X Z``.  Products are tracked exactly as powers of ``i``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import reduce

import numpy as np

SYMBOLS = "IXYZ"
_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_SYMBOL = {bits: s for s, bits in _BITS.items()}
_LABEL_RE = re.compile(r"[+-]?[IXYZ]+")

PHASES = (1, 1j, -1, -1j)

_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class PauliParseError(ValueError):
    """A label could not be read as a signed Pauli string."""

    def __init__(self, label: str, position: int, reason: str):
        self.label = label
        self.position = position
        super().__init__(f"{reason} at position {position} in {label!r}")


class InvalidContextError(ValueError):
    """Three operators do not multiply to a multiple of the identity."""


def _popcount(v: int) -> int:
    return v.bit_count()


@dataclass(frozen=True)
class ProjectivePoint:
    """A nonzero vector of F2^(2N), i.e. a Pauli operator up to phase."""

    width: int
    xbits: int
    zbits: int

    def __post_init__(self):
        full = (1 << self.width) - 1
        if self.width < 1 or self.xbits & ~full or self.zbits & ~full:
            raise ValueError("bit masks do not fit the width")
        if self.xbits == 0 and self.zbits == 0:
            raise ValueError("the zero vector is not a projective point")

    @classmethod
    def from_id(cls, pid: int, width: int) -> ProjectivePoint:
        return cls(width, pid >> width, pid & ((1 << width) - 1))

    @property
    def id(self) -> int:
        return (self.xbits << self.width) | self.zbits

    @property
    def coords(self) -> tuple[int, ...]:
        """``(mu_1, .., mu_N, nu_1, .., nu_N)``."""
        w = self.width
        return tuple((self.xbits >> (w - 1 - k)) & 1 for k in range(w)) + tuple(
            (self.zbits >> (w - 1 - k)) & 1 for k in range(w)
        )


@dataclass(frozen=True)
class PauliOperator:
    """``sign * P_1 (x) ... (x) P_N`` with ``sign`` in {+1, -1}."""

    width: int
    xbits: int
    zbits: int
    sign: int = 1

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("width must be at least 1")
        full = (1 << self.width) - 1
        if self.xbits & ~full or self.zbits & ~full:
            raise ValueError("bit masks do not fit the width")
        if self.sign not in (1, -1):
            raise ValueError(f"observable sign must be +1 or -1, got {self.sign!r}")

    @classmethod
    def from_phase(cls, width: int, xbits: int, zbits: int, power: int) -> PauliOperator:
        """Build ``i**power * P``; only real phases give an observable."""
        power %= 4
        if power % 2:
            raise ValueError("operator with phase +-i is not Hermitian")
        return cls(width, xbits, zbits, 1 if power == 0 else -1)

    @classmethod
    def identity(cls, width: int) -> PauliOperator:
        return cls(width, 0, 0)

    @classmethod
    def from_id(cls, pid: int, width: int) -> PauliOperator:
        return cls(width, pid >> width, pid & ((1 << width) - 1))

    @property
    def symbols(self) -> str:
        w = self.width
        return "".join(
            _SYMBOL[((self.xbits >> (w - 1 - k)) & 1, (self.zbits >> (w - 1 - k)) & 1)]
            for k in range(w)
        )

    @property
    def id(self) -> int:
        return (self.xbits << self.width) | self.zbits

    @property
    def point(self) -> ProjectivePoint:
        return ProjectivePoint(self.width, self.xbits, self.zbits)

    @property
    def is_identity(self) -> bool:
        return self.xbits == 0 and self.zbits == 0

    @property
    def y_count(self) -> int:
        return _popcount(self.xbits & self.zbits)

    @property
    def weight(self) -> int:
        return _popcount(self.xbits | self.zbits)

    def unsigned(self) -> PauliOperator:
        return PauliOperator(self.width, self.xbits, self.zbits)

    def __neg__(self) -> PauliOperator:
        return PauliOperator(self.width, self.xbits, self.zbits, -self.sign)

    def __str__(self) -> str:
        return format_label(self)

    def __repr__(self) -> str:
        return f"PauliOperator({format_label(self)!r})"


def parse(label: str) -> PauliOperator:
    """Read ``[+|-]`` followed by N symbols from ``IXYZ``."""
    text = label.strip()
    if not text:
        raise PauliParseError(label, 0, "empty label")
    sign = 1
    pos = 0
    if text[0] in "+-":
        sign = -1 if text[0] == "-" else 1
        pos = 1
    if pos == len(text):
        raise PauliParseError(label, pos, "missing Pauli symbols")
    x = z = 0
    for k, ch in enumerate(text[pos:], start=pos):
        if ch not in _BITS:
            raise PauliParseError(label, k, f"unexpected character {ch!r}")
        bx, bz = _BITS[ch]
        x = (x << 1) | bx
        z = (z << 1) | bz
    return PauliOperator(len(text) - pos, x, z, sign)


def format_label(op: PauliOperator) -> str:
    return ("-" if op.sign < 0 else "") + op.symbols


def _check_width(a, b) -> None:
    if a.width != b.width:
        raise ValueError(f"width mismatch: {a.width} vs {b.width}")


def multiply(a: PauliOperator, b: PauliOperator) -> tuple[complex, PauliOperator]:
    """Return ``(phase, P)`` with ``a @ b == phase * P`` and ``P`` unsigned.

    ``phase`` is one of 1, 1j, -1, -1j.
    """
    _check_width(a, b)
    x3 = a.xbits ^ b.xbits
    z3 = a.zbits ^ b.zbits
    # per qubit: i^(x1 z1) X^x1 Z^z1 i^(x2 z2) X^x2 Z^z2, then Z^z1 X^x2 = (-1)^(z1 x2) X^x2 Z^z1
    power = (
        _popcount(a.xbits & a.zbits)
        + _popcount(b.xbits & b.zbits)
        + 2 * _popcount(a.zbits & b.xbits)
        - _popcount(x3 & z3)
    )
    if a.sign * b.sign < 0:
        power += 2
    return PHASES[power % 4], PauliOperator(a.width, x3, z3)


def phase_power(phase: complex) -> int:
    return PHASES.index(phase)


def commutes(a, b) -> bool:
    return symplectic_form(a, b) == 0


def symplectic_form(p, q) -> int:
    """``sum_i mu_i nu_i' + nu_i mu_i'`` over F2."""
    _check_width(p, q)
    return _popcount((p.xbits & q.zbits) ^ (p.zbits & q.xbits)) & 1


def q0(p) -> int:
    """1 for skew points (odd number of Y factors), 0 for even ones."""
    return _popcount(p.xbits & p.zbits) & 1


def qq(q, p) -> int:
    """The quadratic form ``Q_q(p) = Q_0(p) + <p, q>`` attached to ``q``."""
    return q0(p) ^ symplectic_form(p, q)


def line_sign(o1: PauliOperator, o2: PauliOperator, o3: PauliOperator) -> int:
    """Return eps with ``o1 o2 o3 = eps * I`` for a commuting triple."""
    ops = (o1, o2, o3)
    for i in range(3):
        for j in range(i + 1, 3):
            _check_width(ops[i], ops[j])
            if not commutes(ops[i], ops[j]):
                raise InvalidContextError(
                    f"{format_label(ops[i])} and {format_label(ops[j])} do not commute"
                )
    ph1, p12 = multiply(o1, o2)
    ph2, p123 = multiply(p12, o3)
    if not p123.is_identity:
        raise InvalidContextError(
            "product of " + ", ".join(map(format_label, ops)) + " is not proportional to I"
        )
    total = ph1 * ph2
    # commuting Hermitian factors give a real product
    return 1 if total == 1 else -1


def tensor(*ops: PauliOperator) -> PauliOperator:
    """Kronecker product, leftmost argument on the leftmost qubits."""

    def _pair(a: PauliOperator, b: PauliOperator) -> PauliOperator:
        return PauliOperator(
            a.width + b.width,
            (a.xbits << b.width) | b.xbits,
            (a.zbits << b.width) | b.zbits,
            a.sign * b.sign,
        )

    return reduce(_pair, ops)


def replicate(op: PauliOperator, copies: int) -> PauliOperator:
    """``op`` tensored with itself ``copies`` times."""
    return tensor(*([op] * copies))


def embed(op: PauliOperator, total_width: int, offset: int) -> PauliOperator:
    """Place ``op`` on qubits ``offset .. offset + width - 1`` of a larger register."""
    if offset < 0 or offset + op.width > total_width:
        raise ValueError("operator does not fit in the register")
    shift = total_width - offset - op.width
    return PauliOperator(total_width, op.xbits << shift, op.zbits << shift, op.sign)


def to_matrix(op: PauliOperator) -> np.ndarray:
    """Dense ``2**N x 2**N`` matrix, leftmost symbol as the slowest index."""
    m = reduce(np.kron, (_MATRICES[s] for s in op.symbols))
    return op.sign * m


def all_points(width: int) -> list[PauliOperator]:
    """Every non-identity unsigned operator, ordered by point id."""
    return [PauliOperator.from_id(pid, width) for pid in range(1, 1 << (2 * width))]
