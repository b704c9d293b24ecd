"""Referee protocols and exact classical values of the contextuality games.

Point-line games: the referee picks a point ``p`` uniformly, then an
unordered set of ``players`` distinct lines through ``p`` uniformly; each
player answers a +-1 triple for their line that meets the line's parity.
They win when the product of their answers at ``p`` is +1 (for two players
this is agreement).

Classical strategies are built from a hidden-variable assignment: lines the
assignment satisfies are answered with its values, and each violated line
is answered with the values flipped at one chosen deviation point.  All
probabilities are exact :class:`fractions.Fraction` values.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb
from typing import Protocol, Sequence

import numpy as np

from .contextuality import Assignment, violated_lines
from .geometry import Geometry

Triple = tuple[int, int, int]


@dataclass(frozen=True)
class EvaluationResult:
    value: Fraction
    per_point: tuple[Fraction, ...] = ()
    note: str = ""

    def __post_init__(self):
        if not 0 <= self.value <= 1:
            raise ValueError(f"probability out of range: {self.value}")

    def as_dict(self) -> dict:
        return {
            "rational": f"{self.value.numerator}/{self.value.denominator}",
            "decimal": float(self.value),
        }


def quantum_advantage(classical: Fraction, quantum: Fraction = Fraction(1)) -> Fraction:
    return quantum - classical


# ---------------------------------------------------------------------------
# Mermin-Peres grid game

ROW_TRIPLES = tuple(t for t in itertools.product((1, -1), repeat=3) if np.prod(t) == 1)
COLUMN_TRIPLES = tuple(t for t in itertools.product((1, -1), repeat=3) if np.prod(t) == -1)


@dataclass(frozen=True)
class GridStrategy:
    """Alice answers row ``x`` with ``alice[x]``, Bob column ``y`` with ``bob[y]``."""

    alice: tuple[Triple, Triple, Triple]
    bob: tuple[Triple, Triple, Triple]

    def __post_init__(self):
        for row in self.alice:
            if np.prod(row) != 1:
                raise ValueError(f"Alice's row {row} does not multiply to +1")
        for col in self.bob:
            if np.prod(col) != -1:
                raise ValueError(f"Bob's column {col} does not multiply to -1")


def evaluate_grid_game(s: GridStrategy) -> EvaluationResult:
    """Exact win rate over the nine (row, column) questions."""
    cells = tuple(
        Fraction(int(s.alice[x][y] == s.bob[y][x])) for x in range(3) for y in range(3)
    )
    return EvaluationResult(sum(cells, Fraction(0)) / 9, cells)


def all_grid_strategies():
    for alice in itertools.product(ROW_TRIPLES, repeat=3):
        for bob in itertools.product(COLUMN_TRIPLES, repeat=3):
            yield GridStrategy(alice, bob)


def grid_value_range() -> tuple[Fraction, Fraction, int]:
    """(min, max, number of strategy pairs) over all deterministic tables."""
    values = [evaluate_grid_game(s).value for s in all_grid_strategies()]
    return min(values), max(values), len(values)


def optimal_grid_value() -> EvaluationResult:
    best = max((evaluate_grid_game(s) for s in all_grid_strategies()), key=lambda r: r.value)
    return EvaluationResult(best.value, best.per_point, "exhaustive over 4096 table pairs")


def figure_grid_strategy() -> GridStrategy:
    """Bob answers -1 on the bottom row; Alice matches him everywhere but one cell."""
    plus = (1, 1, 1)
    return GridStrategy((plus, plus, (-1, -1, 1)), ((1, 1, -1),) * 3)


# ---------------------------------------------------------------------------
# point-line games


@dataclass(frozen=True)
class GameSpec:
    geometry: Geometry
    players: int = 2

    def __post_init__(self):
        if self.players not in (2, 4):
            raise ValueError("only 2- and 4-player games are supported")
        short = [k for k, inc in enumerate(self.geometry.incidence) if len(inc) < self.players]
        if short:
            raise ValueError(
                f"point {self.geometry.label(short[0])} lies on fewer than {self.players} lines"
            )

    @cached_property
    def choices(self) -> tuple[tuple[int, tuple[int, ...]], ...]:
        """Every (point index, sorted line tuple) the referee can ask."""
        return tuple(
            (p, combo)
            for p, inc in enumerate(self.geometry.incidence)
            for combo in itertools.combinations(inc, self.players)
        )

    def choice_weight(self, point: int) -> Fraction:
        k = len(self.geometry.incidence[point])
        return Fraction(1, self.geometry.n_points * comb(k, self.players))

    @cached_property
    def _choice_arrays(self):
        g = self.geometry
        lines = np.array([c for _, c in self.choices], dtype=np.int64)
        points = np.array([p for p, _ in self.choices], dtype=np.int64)
        pos = np.argmax(g.line_points[lines] == points[:, None, None], axis=2)
        return points, lines, pos

    @cached_property
    def choices_at(self) -> tuple[tuple[tuple[int, ...], ...], ...]:
        """Line tuples the referee can pair with each point."""
        return tuple(
            tuple(itertools.combinations(inc, self.players)) for inc in self.geometry.incidence
        )

    @cached_property
    def _positions(self) -> dict[tuple[int, int], int]:
        return {
            (li, int(k)): pos
            for li, row in enumerate(self.geometry.line_points)
            for pos, k in enumerate(row)
        }

    def position(self, line: int, point: int) -> int:
        return self._positions[(line, point)]


def wins(responses: Sequence[Triple], positions: Sequence[int]) -> bool:
    """Product of every player's answer at the shared point equals +1."""
    return int(np.prod([r[k] for r, k in zip(responses, positions)])) == 1


class Responder(Protocol):
    def respond(self, spec: GameSpec, point: int, lines: tuple[int, ...], rng) -> list[Triple]:
        ...


@dataclass(frozen=True)
class ClassicalStrategy:
    """One answer triple per line, in the line's point order."""

    geometry: Geometry
    answers: tuple[Triple, ...]

    def __post_init__(self):
        g = self.geometry
        if len(self.answers) != g.n_lines:
            raise ValueError(f"strategy covers {len(self.answers)} of {g.n_lines} lines")
        arr = np.array(self.answers, dtype=np.int64)
        if arr.shape != (g.n_lines, 3) or not np.all(np.abs(arr) == 1):
            raise ValueError("every answer must be a +-1 triple")
        bad = np.flatnonzero(arr.prod(axis=1) != g.signs)
        if bad.size:
            li = int(bad[0])
            raise ValueError(f"answer for line {' '.join(g.line_labels(li))} breaks its parity")
        arr.setflags(write=False)
        object.__setattr__(self, "_array", arr)

    @property
    def array(self) -> np.ndarray:
        return self._array

    def respond(self, spec: GameSpec, point: int, lines: tuple[int, ...], rng=None) -> list[Triple]:
        return [self.answers[li] for li in lines]


def default_deviations(g: Geometry, a: Assignment) -> dict[int, int]:
    """Deviate at the first point of every violated line."""
    return {li: int(g.line_points[li][0]) for li in sorted(violated_lines(g, a).violated)}


def strategy_from_assignment(
    g: Geometry, a: Assignment, deviations: dict[int, int] | None = None
) -> ClassicalStrategy:
    """Answer with ``a``; on each violated line flip the value at its deviation point."""
    violated = violated_lines(g, a).violated
    if deviations is None:
        deviations = default_deviations(g, a)
    if set(deviations) != set(violated):
        raise ValueError("deviations must name exactly the violated lines")
    arr = a.values[g.line_points]
    for li in violated:
        p = deviations[li]
        hit = np.flatnonzero(g.line_points[li] == p)
        if not hit.size:
            raise ValueError(f"deviation point {g.label(p)} is not on line {li}")
        arr[li, hit[0]] *= -1
    return ClassicalStrategy(g, tuple(map(tuple, arr.tolist())))


def evaluate_pointline_game(spec: GameSpec, s: ClassicalStrategy) -> EvaluationResult:
    """Exact win probability over the uniform referee."""
    if s.geometry.lines != spec.geometry.lines:
        raise ValueError("strategy and game use different geometries")
    points, lines, pos = spec._choice_arrays
    won = s.array[lines, pos].prod(axis=1) == 1
    n = spec.geometry.n_points
    wins_at = np.bincount(points, weights=won, minlength=n).astype(np.int64)
    asked_at = np.bincount(points, minlength=n)
    per_point = tuple(Fraction(int(w), int(c)) for w, c in zip(wins_at, asked_at))
    common = int(np.lcm.reduce(asked_at))
    total = int((wins_at * (common // asked_at)).sum())
    return EvaluationResult(Fraction(total, common * n), per_point)


# ---------------------------------------------------------------------------
# optimisation over assignment-derived strategies


def _odd_subset_counts(k: int, r: int) -> list[int]:
    """For m deviating lines among k, the number of r-subsets holding an odd number."""
    return [
        sum(comb(m, j) * comb(k - m, r - j) for j in range(1, r + 1, 2)) for m in range(k + 1)
    ]


@dataclass
class _DeviationSearch:
    """Branch and bound over deviation points for one violated-line set.

    With deviation map ``dev``, the answer of line L at point p is
    ``a(p) * (-1 if dev(L) == p)``, so the win indicator at ``p`` only
    depends on how many of the chosen lines deviate there: the assignment
    itself drops out.
    """

    spec: GameSpec
    scale: int = field(init=False)
    loss_table: list[list[int]] = field(init=False)

    def __post_init__(self):
        g = self.spec.geometry
        sizes = [comb(len(inc), self.spec.players) for inc in g.incidence]
        self.scale = int(np.lcm.reduce(sizes))
        self.loss_table = [
            [c * (self.scale // n) for c in _odd_subset_counts(len(inc), self.spec.players)]
            for inc, n in zip(g.incidence, sizes)
        ]

    def best(self, violated: Sequence[int], bound: int | None = None):
        """Smallest scaled loss and a deviation map achieving it (None if >= bound)."""
        g = self.spec.geometry
        lines = sorted(int(li) for li in violated)
        rows = [tuple(int(x) for x in g.line_points[li]) for li in lines]
        table = self.loss_table
        remaining = [0] * g.n_points
        for row in rows:
            for q in row:
                remaining[q] += 1
        m = [0] * g.n_points
        best_loss = [bound if bound is not None else 1 << 62]
        best_dev: list[dict[int, int] | None] = [None]
        chosen = [0] * len(lines)

        def rec(k: int, closed_loss: int):
            if closed_loss >= best_loss[0]:
                return
            if k == len(lines):
                best_loss[0] = closed_loss
                best_dev[0] = dict(zip(lines, chosen))
                return
            row = rows[k]
            for q in row:
                remaining[q] -= 1
            for p in row:
                m[p] += 1
                chosen[k] = p
                add = 0
                for q in row:
                    if remaining[q] == 0:
                        add += table[q][m[q]]
                rec(k + 1, closed_loss + add)
                m[p] -= 1
            for q in row:
                remaining[q] += 1

        closed = sum(self.loss_table[q][0] for q in range(g.n_points) if remaining[q] == 0)
        rec(0, closed)
        return best_loss[0], best_dev[0]

    def value(self, loss: int) -> Fraction:
        return 1 - Fraction(loss, self.scale * self.spec.geometry.n_points)


def best_strategy_for_assignment(spec: GameSpec, a: Assignment) -> tuple[EvaluationResult, ClassicalStrategy]:
    """Best deviation choice for ``a``'s violated lines, with its strategy."""
    search = _DeviationSearch(spec)
    loss, dev = search.best(violated_lines(spec.geometry, a).violated)
    strategy = strategy_from_assignment(spec.geometry, a, dev)
    result = evaluate_pointline_game(spec, strategy)
    assert result.value == search.value(loss)
    return result, strategy


def best_value_for_assignment(spec: GameSpec, a: Assignment) -> EvaluationResult:
    """Best value over every deviation choice for ``a``'s violated lines."""
    return best_strategy_for_assignment(spec, a)[0]


MAX_SWEEP_POINTS = 20


def optimal_assignment_value(spec: GameSpec) -> tuple[EvaluationResult, Assignment, dict[int, int]]:
    """Maximum over all assignment-derived strategies of the game.

    Sweeps every assignment; assignments sharing a violated-line set give
    the same value, so each distinct set is optimised once.
    """
    g = spec.geometry
    if g.n_points > MAX_SWEEP_POINTS:
        raise ValueError(f"sweep over 2**{g.n_points} assignments is not supported")
    bits = np.arange(1 << g.n_points, dtype=np.int64)
    vals = np.where((bits[:, None] >> np.arange(g.n_points)) & 1, -1, 1)
    viol = vals[:, g.line_points].prod(axis=2) != g.signs
    keys = np.packbits(viol, axis=1)
    _, first = np.unique(keys, axis=0, return_index=True)
    # visit small violated sets first so the bound tightens early
    order = sorted(first, key=lambda i: (int(viol[i].sum()), int(i)))

    search = _DeviationSearch(spec)
    best_loss, best_bits, best_dev = None, None, None
    for i in order:
        loss, dev = search.best(np.flatnonzero(viol[i]), best_loss)
        if dev is not None and (best_loss is None or loss < best_loss):
            best_loss, best_bits, best_dev = loss, int(bits[i]), dev
    a = Assignment(g, best_bits)
    result = evaluate_pointline_game(spec, strategy_from_assignment(g, a, best_dev))
    assert result.value == search.value(best_loss)
    note = (
        f"exhaustive over {1 << g.n_points} assignments ({len(first)} distinct violated-line sets) "
        "and all deviation choices; restricted to assignment-derived strategies"
    )
    return EvaluationResult(result.value, result.per_point, note), a, best_dev


def optimal_doily_value(g: Geometry | None = None) -> EvaluationResult:
    from .geometry import build_doily

    return optimal_assignment_value(GameSpec(g or build_doily(), 2))[0]


# ---------------------------------------------------------------------------
# sampled play


@dataclass(frozen=True)
class Transcript:
    point: int
    lines: tuple[int, ...]
    responses: tuple[Triple, ...]
    win: bool

    def to_record(self, g: Geometry) -> str:
        """Tab-separated ``point  lines  responses  win`` with labels and +/- strings."""
        lines = ";".join("-".join(g.line_labels(li)) for li in self.lines)
        resp = ";".join("".join("+" if v > 0 else "-" for v in t) for t in self.responses)
        return f"{g.label(self.point)}\t{lines}\t{resp}\t{int(self.win)}"


TRANSCRIPT_HEADER = "point\tlines\tresponses\twin"


def play_round(spec: GameSpec, responder: Responder, rng: np.random.Generator) -> Transcript:
    g = spec.geometry
    p = int(rng.integers(g.n_points))
    combos = spec.choices_at[p]
    lines = combos[int(rng.integers(len(combos)))]
    responses = [tuple(int(v) for v in t) for t in responder.respond(spec, p, lines, rng)]
    for li, t in zip(lines, responses):
        if t[0] * t[1] * t[2] != g.lines[li].sign:
            raise ValueError(f"responder broke the parity of line {li}")
    positions = [spec.position(li, p) for li in lines]
    return Transcript(p, tuple(lines), tuple(responses), wins(responses, positions))


def play(spec: GameSpec, responder: Responder, rounds: int, seed: int = 0) -> list[Transcript]:
    rng = np.random.default_rng(seed)
    return [play_round(spec, responder, rng) for _ in range(rounds)]


def within_binomial(wins_: int, rounds: int, p: float, sigmas: float = 3.0) -> bool:
    """Empirical rate within ``sigmas`` standard errors of ``p``."""
    sd = np.sqrt(p * (1 - p) / rounds)
    return bool(abs(wins_ / rounds - p) <= sigmas * sd + 1e-15)
