"""Non-contextual hidden-variable assignments and their violated contexts.

An assignment gives every point a value +1 or -1; it is stored as an
integer whose bit ``k`` is set when point ``k`` (in the geometry's point
order) takes the value -1.  A line is violated when the product of its
three values differs from its sign.

The degree of contextuality is found by an exhaustive walk over all
``2**n`` assignments in binary-reflected Gray-code order, so each step flips
a single point and the violated-line mask is updated with one XOR against
that point's incidence mask.  The walk is split on the top ``shard_bits``
bits; shards are independent and merged deterministically (minimum count,
then smallest witness encoding), so the result does not depend on the
number of worker threads.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import Geometry, gq_order, spread_failure

MAX_POINTS = 30
MAX_LINES = 64
DEFAULT_SHARD_BITS = 6


class SearchTooLargeError(ValueError):
    """The requested exhaustive search is outside the supported size."""


@dataclass(frozen=True)
class Assignment:
    geometry: Geometry
    bits: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.geometry.n_points:
            raise ValueError("assignment has more bits than the geometry has points")

    @classmethod
    def from_values(cls, g: Geometry, values) -> Assignment:
        values = list(values)
        if len(values) != g.n_points or any(v not in (1, -1) for v in values):
            raise ValueError(f"need {g.n_points} values from {{+1, -1}}")
        return cls(g, sum(1 << k for k, v in enumerate(values) if v < 0))

    @classmethod
    def all_plus(cls, g: Geometry) -> Assignment:
        return cls(g, 0)

    @property
    def values(self) -> np.ndarray:
        k = np.arange(self.geometry.n_points)
        return np.where((self.bits >> k) & 1, -1, 1).astype(np.int64)

    def value(self, index: int) -> int:
        return -1 if (self.bits >> index) & 1 else 1

    def flip(self, index: int) -> Assignment:
        return Assignment(self.geometry, self.bits ^ (1 << index))


@dataclass(frozen=True)
class ViolationReport:
    violated: frozenset[int]
    count: int
    chi: int


def violated_lines(g: Geometry, a: Assignment) -> ViolationReport:
    if a.geometry.n_points != g.n_points:
        raise ValueError(f"assignment has {a.geometry.n_points} points, geometry {g.n_points}")
    vals = a.values
    prods = vals[g.line_points].prod(axis=1)
    violated = frozenset(int(k) for k in np.flatnonzero(prods != g.signs))
    return ViolationReport(violated, len(violated), g.n_lines - 2 * len(violated))


def cabello_chi(g: Geometry, a: Assignment) -> int:
    """``sum_lines sign * (product of the values on the line)``."""
    return int((g.signs * a.values[g.line_points].prod(axis=1)).sum())


def violation_counts(g: Geometry, bits: np.ndarray) -> np.ndarray:
    """Vectorised violated-line counts for an array of assignment encodings."""
    bits = np.asarray(bits, dtype=np.uint64)
    masks = _line_point_masks(g)
    neg = (g.signs < 0).astype(np.uint8)
    total = np.zeros(bits.shape, dtype=np.int64)
    for mask, s in zip(masks, neg):
        total += (np.bitwise_count(bits & mask) & 1) != s
    return total


def _line_point_masks(g: Geometry) -> np.ndarray:
    out = np.zeros(g.n_lines, dtype=np.uint64)
    for li, row in enumerate(g.line_points):
        for k in row:
            out[li] |= np.uint64(1) << np.uint64(k)
    return out


def _incidence_masks(g: Geometry) -> np.ndarray:
    out = np.zeros(g.n_points, dtype=np.uint64)
    for k, lines in enumerate(g.incidence):
        for li in lines:
            out[k] |= np.uint64(1) << np.uint64(li)
    return out


def _negative_mask(g: Geometry) -> np.uint64:
    m = np.uint64(0)
    for li in g.negative_lines:
        m |= np.uint64(1) << np.uint64(li)
    return m


@njit(cache=True, nogil=True)
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return np.int64((x * np.uint64(0x0101010101010101)) >> np.uint64(56))


@njit(cache=True, nogil=True)
def _ctz(x):
    return _popcount((x & (~x + np.uint64(1))) - np.uint64(1))


@njit(cache=True, nogil=True)
def _violations_from_scratch(a, line_masks, neg_mask):
    viol = np.uint64(0)
    for j in range(line_masks.shape[0]):
        par = np.uint64(_popcount(a & line_masks[j]) & 1)
        bit = (neg_mask >> np.uint64(j)) & np.uint64(1)
        if par != bit:
            viol |= np.uint64(1) << np.uint64(j)
    return viol


@njit(cache=True, nogil=True)
def _is_spread(viol, count, line_masks, full):
    union = np.uint64(0)
    v = viol
    while v != np.uint64(0):
        j = _ctz(v)
        union |= line_masks[j]
        v &= v - np.uint64(1)
    return count * 3 == _popcount(full) and union == full


@njit(cache=True, nogil=True)
def _scan_shard(inc_masks, line_masks, neg_mask, n, low, prefix):
    """Walk the ``2**low`` assignments whose top bits equal ``prefix``.

    Returns (best count, smallest minimal encoding, number of minimal
    assignments, number of minimal ones whose violated set is not a spread,
    smallest such encoding or -1).
    """
    full = (np.uint64(1) << np.uint64(n)) - np.uint64(1)
    a = np.uint64(prefix) << np.uint64(low)
    viol = _violations_from_scratch(a, line_masks, neg_mask)
    best = np.int64(1 << 62)
    witness = np.int64(-1)
    n_min = np.int64(0)
    n_bad = np.int64(0)
    first_bad = np.int64(-1)
    steps = np.uint64(1) << np.uint64(low)
    i = np.uint64(0)
    while True:
        c = _popcount(viol)
        if c <= best:
            ai = np.int64(a)
            if c < best:
                best = c
                witness = ai
                n_min = 0
                n_bad = 0
                first_bad = -1
            elif ai < witness:
                witness = ai
            n_min += 1
            if not _is_spread(viol, c, line_masks, full):
                n_bad += 1
                if first_bad < 0 or ai < first_bad:
                    first_bad = ai
        i += np.uint64(1)
        if i == steps:
            break
        k = _ctz(i)
        a ^= np.uint64(1) << np.uint64(k)
        viol ^= inc_masks[k]
    return best, witness, n_min, n_bad, first_bad


@njit(cache=True, nogil=True)
def _walk_checkpoints(inc_masks, line_masks, neg_mask, low, prefix, checkpoints):
    """Incremental counts of a Gray walk sampled at sorted step indices."""
    a = np.uint64(prefix) << np.uint64(low)
    viol = _violations_from_scratch(a, line_masks, neg_mask)
    out_a = np.empty(checkpoints.shape[0], dtype=np.int64)
    out_c = np.empty(checkpoints.shape[0], dtype=np.int64)
    j = 0
    i = np.int64(0)
    while j < checkpoints.shape[0]:
        while j < checkpoints.shape[0] and checkpoints[j] == i:
            out_a[j] = np.int64(a)
            out_c[j] = _popcount(viol)
            j += 1
        i += 1
        k = _ctz(np.uint64(i))
        a ^= np.uint64(1) << np.uint64(k)
        viol ^= inc_masks[k]
    return out_a, out_c


def gray_walk_checkpoints(g: Geometry, checkpoints, shard_bits: int = 0, prefix: int = 0):
    """(assignment encodings, incremental counts) at the given walk steps."""
    _check_size(g)
    low = g.n_points - shard_bits
    cps = np.sort(np.asarray(checkpoints, dtype=np.int64))
    if cps.size and (cps[0] < 0 or cps[-1] >= 1 << low):
        raise ValueError("checkpoint outside the walk")
    return _walk_checkpoints(
        _incidence_masks(g), _line_point_masks(g), _negative_mask(g), low, prefix, cps
    )


@dataclass(frozen=True)
class ContextualityResult:
    d: int
    witness: Assignment
    minimal_count: int
    non_spread_count: int
    first_non_spread: Assignment | None
    assignments: int
    elapsed: float

    def __iter__(self):
        yield self.d
        yield self.witness


def _check_size(g: Geometry) -> None:
    if g.n_points > MAX_POINTS:
        raise SearchTooLargeError(
            f"{g.name} has {g.n_points} points; exhaustive search is limited to {MAX_POINTS}"
        )
    if g.n_lines > MAX_LINES:
        raise SearchTooLargeError(
            f"{g.name} has {g.n_lines} lines; the search kernel handles at most {MAX_LINES}"
        )


def degree_of_contextuality(
    g: Geometry, workers: int = 1, shard_bits: int = DEFAULT_SHARD_BITS
) -> ContextualityResult:
    """Minimum number of violated lines over all assignments, by exhaustion."""
    _check_size(g)
    if workers < 1:
        raise ValueError("workers must be positive")
    n = g.n_points
    k = max(0, min(shard_bits, n))
    low = n - k
    inc, lines, neg = _incidence_masks(g), _line_point_masks(g), _negative_mask(g)

    def run(prefix: int):
        return _scan_shard(inc, lines, neg, n, low, prefix)

    t0 = time.perf_counter()
    if workers == 1:
        parts = [run(p) for p in range(1 << k)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(1 << k)))
    elapsed = time.perf_counter() - t0

    best = min(int(p[0]) for p in parts)
    winners = [p for p in parts if int(p[0]) == best]
    witness = min(int(p[1]) for p in winners)
    n_min = sum(int(p[2]) for p in winners)
    n_bad = sum(int(p[3]) for p in winners)
    bad = [int(p[4]) for p in winners if int(p[4]) >= 0]
    return ContextualityResult(
        d=best,
        witness=Assignment(g, witness),
        minimal_count=n_min,
        non_spread_count=n_bad,
        first_non_spread=Assignment(g, min(bad)) if bad else None,
        assignments=1 << n,
        elapsed=elapsed,
    )


def hv_bound(g: Geometry, workers: int = 1) -> int:
    """Largest Cabello chi reachable by a hidden-variable assignment."""
    return g.n_lines - 2 * degree_of_contextuality(g, workers).d


@dataclass(frozen=True)
class SpreadVerdict:
    holds: bool
    d: int
    minimal_count: int
    counterexample: Assignment | None


def verify_minimal_spread_property(g: Geometry, workers: int = 1) -> SpreadVerdict:
    """Check that every minimal assignment of an eloily violates a spread of lines."""
    if g.n_points != 27 or gq_order(g) != (2, 4):
        raise ValueError(f"{g.name} is not a GQ(2,4)")
    res = degree_of_contextuality(g, workers)
    if res.first_non_spread is not None:
        reason = spread_failure(g, violated_lines(g, res.first_non_spread).violated)
        assert reason is not None
    return SpreadVerdict(res.non_spread_count == 0, res.d, res.minimal_count, res.first_non_spread)
