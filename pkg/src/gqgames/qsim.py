"""Dense statevector simulation of the quantum strategies.

Registers are player-major: with ``r`` players holding ``w`` qubits each,
player ``j`` owns qubits ``j*w .. j*w + w - 1`` and qubit 0 is the most
significant bit of the amplitude index (the leftmost tensor factor).
Delegation qubits are appended after the registers while in use.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .games import GameSpec, Triple
from .geometry import Geometry
from .pauli import PauliOperator, embed, format_label, line_sign, q0, replicate, symplectic_form

MAX_QUBITS = 14
NORM_TOL = 1e-12
BRANCH_TOL = 1e-10


class StateNotFoundError(RuntimeError):
    """No computational-basis seed survives the stabilizer projections."""


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        n = amps.size.bit_length() - 1
        if amps.size != 1 << n or n < 1:
            raise ValueError(f"amplitude count {amps.size} is not a power of two")
        if n > MAX_QUBITS:
            raise ValueError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit limit")
        if abs(np.vdot(amps, amps).real - 1) > NORM_TOL:
            raise ValueError("state is not normalised")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @classmethod
    def from_unnormalised(cls, amps) -> StateVector | None:
        amps = np.asarray(amps, dtype=complex)
        norm = np.linalg.norm(amps)
        return None if norm < BRANCH_TOL else cls(amps / norm)


def basis_state(n: int, index: int = 0) -> StateVector:
    amps = np.zeros(1 << n, dtype=complex)
    amps[index] = 1
    return StateVector(amps)


def kron(*states: StateVector) -> StateVector:
    out = states[0].amplitudes
    for s in states[1:]:
        out = np.kron(out, s.amplitudes)
    return StateVector(out)


def permute_qubits(state: StateVector, order) -> StateVector:
    """New qubit ``k`` is old qubit ``order[k]``."""
    n = state.n
    t = state.amplitudes.reshape((2,) * n).transpose(list(order))
    return StateVector(t.reshape(-1))


def overlap(a: StateVector, b: StateVector) -> float:
    """``|<a|b>|``; equals 1 for states that agree up to global phase."""
    if a.n != b.n:
        raise ValueError("qubit counts differ")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)))


# ---------------------------------------------------------------------------
# Pauli action


@lru_cache(maxsize=4096)
def _pauli_action(n: int, xbits: int, zbits: int, sign: int, y_count: int):
    idx = np.arange(1 << n, dtype=np.int64)
    parity = np.bitwise_count(idx & zbits) & 1
    phase = sign * (1j**y_count) * np.where(parity, -1, 1)
    return idx ^ xbits, phase.astype(complex)


def apply_pauli(amps: np.ndarray, op: PauliOperator) -> np.ndarray:
    """``op @ amps`` without building a matrix.

    ``Y = iXZ`` per qubit, so ``P = sign * i**(#Y) * X^x Z^z`` and
    ``(P psi)[i ^ x] = sign * i**(#Y) * (-1)**|i & z| * psi[i]``.
    """
    n = amps.size.bit_length() - 1
    if op.width != n:
        raise ValueError(f"operator on {op.width} qubits, state on {n}")
    target, phase = _pauli_action(n, op.xbits, op.zbits, op.sign, op.y_count)
    out = np.empty_like(amps)
    out[target] = phase * amps
    return out


def expectation(state: StateVector, op: PauliOperator) -> float:
    val = np.vdot(state.amplitudes, apply_pauli(state.amplitudes, op))
    if abs(val.imag) > NORM_TOL:
        raise ArithmeticError(f"non-real expectation {val}")
    return float(val.real)


def project(state: StateVector, op: PauliOperator, outcome: int) -> tuple[float, StateVector | None]:
    """Born probability of ``outcome`` for ``op`` and the renormalised collapse."""
    amps = state.amplitudes
    branch = (amps + outcome * apply_pauli(amps, op)) / 2
    prob = float(np.vdot(branch, branch).real)
    if prob < BRANCH_TOL**2:
        return prob, None
    return prob, StateVector(branch / np.sqrt(prob))


def stabilizer_project(state: StateVector, op: PauliOperator, players: int) -> StateVector | None:
    """Apply ``(1 + op^(x players)) / 2`` and renormalise; None if annihilated."""
    if state.n != players * op.width:
        raise ValueError(f"state has {state.n} qubits, need {players} x {op.width}")
    amps = state.amplitudes
    out = (amps + apply_pauli(amps, replicate(op, players))) / 2
    return StateVector.from_unnormalised(out)


# ---------------------------------------------------------------------------
# shared states


@dataclass(frozen=True)
class SharedStateSpec:
    players: int
    family: tuple[PauliOperator, ...]

    def __post_init__(self):
        if self.players not in (2, 4):
            raise ValueError("shared states are built for 2 or 4 players")
        if len({op.width for op in self.family}) != 1:
            raise ValueError("family operators must share a width")

    @property
    def width(self) -> int:
        return self.family[0].width

    @property
    def n(self) -> int:
        return self.players * self.width

    @classmethod
    def for_geometry(cls, g: Geometry, players: int) -> SharedStateSpec:
        return cls(players, g.points)


def _scan_seeds(spec: SharedStateSpec) -> tuple[int, StateVector]:
    for seed in range(1 << spec.n):
        state: StateVector | None = basis_state(spec.n, seed)
        for op in spec.family:
            state = stabilizer_project(state, op, spec.players)
            if state is None:
                break
        if state is not None:
            return seed, state
    raise StateNotFoundError("every basis seed was annihilated")


def find_shared_state(spec: SharedStateSpec) -> StateVector:
    """First basis seed, in index order, surviving every replicated projector."""
    state = _scan_seeds(spec)[1]
    if stabilizer_residual(state, spec) > NORM_TOL:
        raise ArithmeticError("constructed state is not stabilized")
    return state


def shared_state_seed(spec: SharedStateSpec) -> int:
    return _scan_seeds(spec)[0]


def stabilizer_residuals(state: StateVector, spec: SharedStateSpec) -> list[float]:
    """``|| O^(x r) psi - psi ||`` for every family member."""
    amps = state.amplitudes
    return [
        float(np.linalg.norm(apply_pauli(amps, replicate(op, spec.players)) - amps))
        for op in spec.family
    ]


def stabilizer_residual(state: StateVector, spec: SharedStateSpec) -> float:
    return max(stabilizer_residuals(state, spec))


def _pair_major_to_player_major(state: StateVector, players: int, width: int) -> StateVector:
    # pair-major qubit (k, j) sits at k * players + j; player-major wants j * width + k
    order = [k * players + j for j in range(players) for k in range(width)]
    return permute_qubits(state, order)


def _two_qubit(a: float, b: float, c: float, d: float) -> StateVector:
    return StateVector(np.array([a, b, c, d], dtype=complex))


def singlet() -> StateVector:
    return _two_qubit(0, 1 / np.sqrt(2), -1 / np.sqrt(2), 0)


def reference_two_player_state() -> StateVector:
    """Two singlets and a negated singlet, one per qubit position."""
    neg = _two_qubit(0, -1 / np.sqrt(2), 1 / np.sqrt(2), 0)
    return _pair_major_to_player_major(kron(singlet(), singlet(), neg), 2, 3)


def ghz(n: int) -> StateVector:
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return StateVector(amps)


def reference_four_player_state() -> StateVector:
    """Three GHZ_4 states, the k-th over every player's qubit k."""
    return _pair_major_to_player_major(kron(ghz(4), ghz(4), ghz(4)), 4, 3)


def corrupted_two_player_state(position: int = 2) -> StateVector:
    """The reference state with the singlet at ``position`` replaced by |00>."""
    parts = [singlet(), singlet(), singlet()]
    parts[position] = basis_state(2, 0)
    return _pair_major_to_player_major(kron(*parts), 2, 3)


def bell_pairs_state(width: int = 2) -> StateVector:
    """``|Phi+>`` between qubit ``k`` of each of two players, for every ``k``."""
    phi = _two_qubit(1 / np.sqrt(2), 0, 0, 1 / np.sqrt(2))
    return _pair_major_to_player_major(kron(*([phi] * width)), 2, width)


# ---------------------------------------------------------------------------
# measurement


def _check_commuting(ops) -> None:
    for a, b in itertools.combinations(ops, 2):
        if symplectic_form(a, b):
            raise ValueError(f"{format_label(a)} and {format_label(b)} do not commute")


def measure_joint(state: StateVector, ops, rng: np.random.Generator):
    """Sequential projective measurement; returns (outcomes, collapsed state)."""
    ops = list(ops)
    _check_commuting(ops)
    amps = state.amplitudes
    outcomes = []
    for op in ops:
        moved = apply_pauli(amps, op)
        plus = (amps + moved) / 2
        p_plus = float(np.vdot(plus, plus).real)
        e = 1 if rng.random() < p_plus else -1
        branch = plus if e > 0 else (amps - moved) / 2
        p = p_plus if e > 0 else 1 - p_plus
        if p < BRANCH_TOL:
            raise ArithmeticError("sampled a zero-probability branch")
        outcomes.append(e)
        amps = branch / np.sqrt(p)
    return outcomes, StateVector(amps)


def branch_distribution(state: StateVector, ops) -> list[tuple[tuple[int, ...], float]]:
    """Every outcome tuple with non-negligible Born probability."""
    ops = list(ops)
    _check_commuting(ops)
    out: list[tuple[tuple[int, ...], float]] = []

    def rec(k: int, amps: np.ndarray, prefix: tuple[int, ...], prob: float):
        if k == len(ops):
            out.append((prefix, prob))
            return
        moved = apply_pauli(amps, ops[k])
        for e in (1, -1):
            branch = (amps + e * moved) / 2
            p = float(np.vdot(branch, branch).real)
            if prob * p > BRANCH_TOL:
                rec(k + 1, branch / np.sqrt(p), prefix + (e,), prob * p)

    rec(0, state.amplitudes, (), 1.0)
    return out


# ---------------------------------------------------------------------------
# responders


@dataclass(eq=False)
class QuantumResponder:
    """Each player measures their line's operators on their own register.

    ``flip_skew`` lists players who negate the outcome of every skew
    operator (odd number of Y factors) before answering; this keeps the
    line parity, since a context always holds an even number of skew points.
    Question distributions are enumerated exactly once and memoised, and
    ``respond`` samples from them.
    """

    state: StateVector
    players: int
    width: int
    flip_skew: frozenset[int] = frozenset()
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.state.n != self.players * self.width:
            raise ValueError("state size does not match the players' registers")

    def player_ops(self, g: Geometry, lines: tuple[int, ...]) -> list[PauliOperator]:
        ops = []
        for j, li in enumerate(lines):
            for k in g.line_points[li]:
                ops.append(embed(g.points[k], self.state.n, j * self.width))
        return ops

    def _flip(self, g: Geometry, lines, j: int) -> np.ndarray:
        if j not in self.flip_skew:
            return np.ones(3, dtype=np.int64)
        return np.array([-1 if q0(g.points[k]) else 1 for k in g.line_points[lines[j]]])

    def distribution(self, spec: GameSpec, lines: tuple[int, ...]):
        """(answers array ``(branches, players, 3)``, probabilities)."""
        key = (id(spec.geometry), tuple(lines))
        if key not in self._cache:
            g = spec.geometry
            if g.width != self.width:
                raise ValueError("geometry width differs from the register width")
            branches = branch_distribution(self.state, self.player_ops(g, lines))
            answers = np.array([b for b, _ in branches], dtype=np.int64).reshape(
                len(branches), len(lines), 3
            )
            flips = np.stack([self._flip(g, lines, j) for j in range(len(lines))])
            probs = np.array([p for _, p in branches])
            probs = probs / probs.sum()
            self._cache[key] = (answers * flips, probs, np.cumsum(probs))
        return self._cache[key][:2]

    def respond(self, spec: GameSpec, point: int, lines: tuple[int, ...], rng) -> list[Triple]:
        answers, probs = self.distribution(spec, lines)
        cum = self._cache[(id(spec.geometry), tuple(lines))][2]
        k = min(int(np.searchsorted(cum, rng.random(), side="right")), len(probs) - 1)
        return [tuple(int(v) for v in t) for t in answers[k]]


def eloily_responder(spec: GameSpec, state: StateVector | None = None) -> QuantumResponder:
    """Shared stabilizer state of the geometry's operators, no flips."""
    if state is None:
        state = find_shared_state(SharedStateSpec.for_geometry(spec.geometry, spec.players))
    return QuantumResponder(state, spec.players, spec.geometry.width)


def skew_flip_responder(spec: GameSpec) -> QuantumResponder:
    """Two-qubit game on Bell pairs; Alice negates her skew outcomes."""
    if spec.players != 2 or spec.geometry.width != 2:
        raise ValueError("the skew-flip rule is for two-player games on two-qubit operators")
    return QuantumResponder(bell_pairs_state(2), 2, 2, frozenset({0}))


def quantum_win_probability(spec: GameSpec, responder: QuantumResponder | None = None) -> float:
    """Exact win probability by enumerating every question and branch."""
    if responder is None:
        responder = eloily_responder(spec)
    g = spec.geometry
    total = 0.0
    for p, lines in spec.choices:
        answers, probs = responder.distribution(spec, lines)
        pos = [spec.position(li, p) for li in lines]
        at_p = answers[:, np.arange(len(lines)), pos]
        won = at_p.prod(axis=1) == 1
        total += float(spec.choice_weight(p)) * float(probs[won].sum())
    return total


def correlation_win_probability(spec: GameSpec, responder: QuantumResponder) -> float:
    """Independent formula: mean over questions of ``(1 + f <O_p x .. x O_p>) / 2``.

    ``f`` is the product of the players' flip signs at ``p``.  Only the
    outcomes at ``p`` matter and their product is the eigenvalue of the
    replicated operator.
    """
    g = spec.geometry
    total = Fraction(0)
    value = 0.0
    for p, lines in spec.choices:
        op = replicate(g.points[p], len(lines))
        f = 1
        for j in range(len(lines)):
            if j in responder.flip_skew and q0(g.points[p]):
                f = -f
        value += float(spec.choice_weight(p)) * (1 + f * expectation(responder.state, op)) / 2
        total += spec.choice_weight(p)
    assert total == 1
    return value


# ---------------------------------------------------------------------------
# gate-level delegation circuit

GATE_KINDS = ("h", "s", "sdg", "cx", "measure")


@dataclass(frozen=True)
class GateOp:
    kind: str
    target: int
    control: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate {self.kind!r}")
        if self.target < 0 or (self.control is not None and self.control < 0):
            raise ValueError("negative qubit index")
        if (self.kind == "cx") != (self.control is not None):
            raise ValueError("only cx takes a control qubit")
        if self.control == self.target:
            raise ValueError("control and target coincide")

    def to_text(self) -> str:
        if self.kind == "cx":
            return f"cx q{self.control} q{self.target}"
        return f"{self.kind} q{self.target}"


def transcript_text(gates, outcomes=()) -> str:
    """One gate per line; measurements are suffixed with their bit when known."""
    bits = iter(outcomes)
    rows = []
    for gate in gates:
        text = gate.to_text()
        if gate.kind == "measure":
            b = next(bits, None)
            if b is not None:
                text += f" -> {b}"
        rows.append(text)
    return "\n".join(rows) + "\n"


_INV_SQRT2 = 1 / np.sqrt(2)


def apply_gate(amps: np.ndarray, gate: GateOp) -> np.ndarray:
    n = amps.size.bit_length() - 1
    if gate.target >= n or (gate.control is not None and gate.control >= n):
        raise ValueError("gate acts outside the register")
    t = gate.target
    view = amps.reshape(1 << t, 2, 1 << (n - t - 1))
    out = view.copy()
    if gate.kind == "h":
        out[:, 0] = (view[:, 0] + view[:, 1]) * _INV_SQRT2
        out[:, 1] = (view[:, 0] - view[:, 1]) * _INV_SQRT2
    elif gate.kind == "s":
        out[:, 1] *= 1j
    elif gate.kind == "sdg":
        out[:, 1] *= -1j
    elif gate.kind == "cx":
        idx = np.arange(amps.size)
        cbit = (idx >> (n - 1 - gate.control)) & 1
        src = idx ^ (cbit << (n - 1 - t))
        return amps[src]
    else:
        raise ValueError("measurement is not a unitary gate")
    return out.reshape(-1)


def basis_change(symbol: str, qubit: int) -> list[GateOp]:
    """Gates rotating the eigenbasis of ``symbol`` onto the computational basis."""
    return {
        "I": [],
        "Z": [],
        "X": [GateOp("h", qubit)],
        "Y": [GateOp("sdg", qubit), GateOp("h", qubit)],
    }[symbol]


def undo_basis_change(symbol: str, qubit: int) -> list[GateOp]:
    return {
        "I": [],
        "Z": [],
        "X": [GateOp("h", qubit)],
        "Y": [GateOp("h", qubit), GateOp("s", qubit)],
    }[symbol]


def _append_zero_qubit(amps: np.ndarray) -> np.ndarray:
    out = np.zeros(amps.size * 2, dtype=complex)
    out[0::2] = amps
    return out


def _drop_last_qubit(amps: np.ndarray, bit: int) -> np.ndarray:
    return amps[bit::2].copy()


@dataclass(frozen=True)
class DelegationResult:
    """Outcome triple, gate list, raw measurement bits and the collapsed register.

    The directly measured qubits are not rotated back, so ``state`` holds
    them in the computational basis they were read out in.
    """

    triple: Triple
    gates: tuple[GateOp, ...]
    bits: tuple[int, ...]
    state: StateVector

    @property
    def transcript(self) -> str:
        return transcript_text(self.gates, self.bits)


class DelegationCircuit:
    """Measure one player's line with a delegation qubit.

    The first operator is rotated to a Z string, its support is fanned into
    a fresh delegation qubit appended after the register, that qubit is
    measured and discarded, and the rotation is undone.  The second
    operator is rotated and its support measured qubit by qubit; the third
    entry follows from the line sign.  With ``three_measurements`` the
    second operator is also delegated and the third is measured directly,
    so the parity can be checked rather than assumed.

    The gates between measurements are deterministic, so the state before
    each measurement is memoised on the bits seen so far.
    """

    def __init__(self, state: StateVector, line, offset: int = 0, three_measurements: bool = False):
        ops = [op.unsigned() for op in line]
        if len(ops) != 3:
            raise ValueError("a line has three operators")
        self.sign = line_sign(*ops)
        self.ops = ops
        if offset < 0 or offset + ops[0].width > state.n:
            raise ValueError("register does not fit in the state")
        self.state = state
        self.offset = offset
        self.three = three_measurements

        plan = [("delegate", ops[0])]
        if three_measurements:
            plan += [("delegate", ops[1]), ("direct", ops[2])]
        else:
            plan.append(("direct", ops[1]))
        gates: list[GateOp] = []
        self._value_of: list[int] = []  # measurement k feeds triple entry value_of[k]
        for v, (kind, op) in enumerate(plan):
            stage = self._delegate(op) if kind == "delegate" else self._direct(op)
            gates += stage
            self._value_of += [v] * sum(g.kind == "measure" for g in stage)
        self.gates = tuple(gates)
        # unitary segments around the measurements
        self._segments: list[list[GateOp]] = [[]]
        self._measured: list[int] = []
        for g in gates:
            if g.kind == "measure":
                self._measured.append(g.target)
                self._segments.append([])
            else:
                self._segments[-1].append(g)
        self._memo: dict = {}

    def _support(self, op: PauliOperator):
        return [(self.offset + k, s) for k, s in enumerate(op.symbols) if s != "I"]

    def _delegate(self, op: PauliOperator) -> list[GateOp]:
        d = self.state.n
        support = self._support(op)
        gates = [g for q, s in support for g in basis_change(s, q)]
        gates += [GateOp("cx", d, q) for q, _ in support]
        gates.append(GateOp("measure", d))
        return gates + [g for q, s in support for g in undo_basis_change(s, q)]

    def _direct(self, op: PauliOperator) -> list[GateOp]:
        support = self._support(op)
        gates = [g for q, s in support for g in basis_change(s, q)]
        return gates + [GateOp("measure", q) for q, _ in support]

    def _unitaries(self, amps: np.ndarray, segment) -> np.ndarray:
        for g in segment:
            n = amps.size.bit_length() - 1
            if max(g.target, g.control if g.control is not None else -1) == n:
                amps = _append_zero_qubit(amps)
            amps = apply_gate(amps, g)
        return amps

    def _after(self, bits: tuple[int, ...]) -> np.ndarray:
        """Register state once ``bits`` have been observed (delegation qubits dropped)."""
        key = ("after", bits)
        if key not in self._memo:
            if not bits:
                amps = self.state.amplitudes
            else:
                k = len(bits) - 1
                before, p1 = self._before(bits[:-1])
                q = self._measured[k]
                n = before.size.bit_length() - 1
                view = before.reshape(1 << q, 2, 1 << (n - q - 1))
                out = np.zeros_like(view)
                out[:, bits[-1]] = view[:, bits[-1]] / np.sqrt(p1 if bits[-1] else 1 - p1)
                amps = out.reshape(-1)
                if q >= self.state.n:
                    amps = _drop_last_qubit(amps, bits[-1])
            self._memo[key] = self._unitaries(amps, self._segments[len(bits)])
        return self._memo[key]

    def _before(self, bits: tuple[int, ...]) -> tuple[np.ndarray, float]:
        """State right before measurement ``len(bits)`` and its chance of reading 1."""
        key = ("before", bits)
        if key not in self._memo:
            amps = self._after(bits)
            q = self._measured[len(bits)]
            n = amps.size.bit_length() - 1
            view = amps.reshape(1 << q, 2, 1 << (n - q - 1))
            self._memo[key] = (amps, float(np.vdot(view[:, 1], view[:, 1]).real))
        return self._memo[key]

    def run(self, rng: np.random.Generator) -> DelegationResult:
        bits: tuple[int, ...] = ()
        for _ in self._measured:
            _, p1 = self._before(bits)
            bit = int(rng.random() < p1)
            if (p1 if bit else 1 - p1) < BRANCH_TOL:
                raise ArithmeticError("sampled a zero-probability branch")
            bits += (bit,)
        parity = [0, 0, 0]
        for v, b in zip(self._value_of, bits):
            parity[v] ^= b
        values = [-1 if x else 1 for x in parity]
        if self.three:
            if values[0] * values[1] * values[2] != self.sign:
                raise ArithmeticError("measured outcomes break the line parity")
        else:
            values[2] = self.sign * values[0] * values[1]
        key = ("state", bits)
        if key not in self._memo:
            self._memo[key] = StateVector(self._after(bits))
        return DelegationResult(tuple(values), self.gates, bits, self._memo[key])


def delegation_protocol(
    state: StateVector, line, rng: np.random.Generator, offset: int = 0, three_measurements: bool = False
) -> DelegationResult:
    return DelegationCircuit(state, line, offset, three_measurements).run(rng)


@dataclass(eq=False)
class DelegationResponder:
    """Players run the delegation circuit one after another on the shared state."""

    state: StateVector
    players: int
    width: int
    three_measurements: bool = False
    _circuits: dict = field(default_factory=dict, repr=False)

    def respond(self, spec: GameSpec, point: int, lines: tuple[int, ...], rng) -> list[Triple]:
        g = spec.geometry
        amps_state = self.state
        history: tuple = ()
        answers = []
        for j, li in enumerate(lines):
            key = (id(g), tuple(lines), j, history)
            if key not in self._circuits:
                line = [g.points[k] for k in g.line_points[li]]
                self._circuits[key] = DelegationCircuit(
                    amps_state, line, j * self.width, self.three_measurements
                )
            res = self._circuits[key].run(rng)
            answers.append(res.triple)
            history += (res.bits,)
            amps_state = res.state
        return answers
