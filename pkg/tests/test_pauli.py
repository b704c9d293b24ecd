import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gqgames.pauli import (
    InvalidContextError,
    PauliOperator,
    PauliParseError,
    all_points,
    commutes,
    embed,
    format_label,
    line_sign,
    multiply,
    parse,
    q0,
    qq,
    replicate,
    symplectic_form,
    tensor,
    to_matrix,
)

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]])
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1, -1])
DENSE = {"I": I2, "X": X, "Y": Y, "Z": Z}


def dense(label: str) -> np.ndarray:
    sign = -1 if label.startswith("-") else 1
    m = np.array([[1]])
    for ch in label.lstrip("+-"):
        m = np.kron(m, DENSE[ch])
    return sign * m


labels = st.integers(1, 3).flatmap(lambda n: st.text("IXYZ", min_size=n, max_size=n))
pair = st.integers(1, 3).flatmap(
    lambda n: st.tuples(st.text("IXYZ", min_size=n, max_size=n), st.text("IXYZ", min_size=n, max_size=n))
)


def test_encoding_puts_first_qubit_in_high_bit():
    op = parse("XIZ")
    assert (op.xbits, op.zbits) == (0b100, 0b001)
    assert op.id == (0b100 << 3) | 0b001


def test_y_is_x_times_z_up_to_i():
    phase, p = multiply(parse("X"), parse("Z"))
    assert format_label(p) == "Y"
    assert np.allclose(phase * dense("Y"), X @ Z)


@given(labels, st.sampled_from(["", "+", "-"]))
def test_parse_format_roundtrip(body, sign):
    op = parse(sign + body)
    assert format_label(op) == ("-" if sign == "-" else "") + body
    assert parse(format_label(op)) == op


@given(labels)
def test_to_matrix_matches_kronecker_product(label):
    assert np.allclose(to_matrix(parse(label)), dense(label))


@given(pair)
def test_multiply_matches_matrix_product(ab):
    a, b = ab
    phase, p = multiply(parse(a), parse(b))
    assert np.allclose(phase * to_matrix(p), dense(a) @ dense(b))


@given(pair)
def test_symplectic_form_is_commutation(ab):
    a, b = ab
    ma, mb = dense(a), dense(b)
    assert commutes(parse(a), parse(b)) == np.allclose(ma @ mb, mb @ ma)
    assert symplectic_form(parse(a), parse(b)) == symplectic_form(parse(b), parse(a))


@given(labels)
def test_q0_counts_y_factors(label):
    assert q0(parse(label)) == label.count("Y") % 2


def test_q0_polarizes_to_the_symplectic_form():
    pts = all_points(2)
    for p, q in itertools.product(pts, pts):
        s = PauliOperator(2, p.xbits ^ q.xbits, p.zbits ^ q.zbits)
        assert q0(s) == q0(p) ^ q0(q) ^ symplectic_form(p, q)


def test_qq_shifts_by_the_form():
    q = parse("YYY")
    for p in all_points(3):
        assert qq(q, p) == q0(p) ^ symplectic_form(p, q)


@pytest.mark.parametrize(
    "labels, sign",
    [(("XX", "ZZ", "YY"), -1), (("XI", "IX", "XX"), 1), (("XYI", "YXI", "ZZI"), 1), (("YYY", "ZZI", "XXY"), None)],
)
def test_line_sign_against_dense_product(labels, sign):
    ops = [parse(s) for s in labels]
    prod = dense(labels[0]) @ dense(labels[1]) @ dense(labels[2])
    want = 1 if np.allclose(prod, np.eye(len(prod))) else -1
    if sign is not None:
        assert want == sign
    assert line_sign(*ops) == want


def test_line_sign_rejects_non_contexts():
    with pytest.raises(InvalidContextError):
        line_sign(parse("XI"), parse("ZI"), parse("YI"))
    with pytest.raises(InvalidContextError):
        line_sign(parse("XI"), parse("IX"), parse("ZZ"))


@pytest.mark.parametrize("text, pos", [("", 0), ("-", 1), ("XQZ", 1), ("+XYA", 3)])
def test_parse_errors_report_position(text, pos):
    with pytest.raises(PauliParseError) as err:
        parse(text)
    assert err.value.position == pos


def test_tensor_replicate_embed():
    a, b = parse("XY"), parse("-Z")
    assert np.allclose(to_matrix(tensor(a, b)), np.kron(dense("XY"), -Z))
    assert format_label(replicate(parse("YZ"), 3)) == "YZYZYZ"
    assert format_label(embed(parse("XZ"), 5, 2)) == "IIXZI"
    with pytest.raises(ValueError):
        embed(parse("XZ"), 3, 2)


def test_all_points_are_the_nonzero_vectors():
    pts = all_points(3)
    assert len(pts) == 63
    assert [p.id for p in pts] == list(range(1, 64))
    assert len({format_label(p) for p in pts}) == 63
