"""Model file grammar and diagnostics."""

from fractions import Fraction

import pytest

from bvjet import psm
from bvjet.algebra import Poly
from bvjet.model_file import ModelError, parse_model, parse_model_text, parse_polynomial, render_model

x1, x2, x3 = (Poly.var(f"x{i}") for i in (1, 2, 3))


@pytest.mark.parametrize("text, want", [
    ("x1*x2", x1 * x2),
    ("-x1 + 3", -x1 + Poly.const(3)),
    ("(x1 + x2)^2", x1 * x1 + Poly.const(2) * x1 * x2 + x2 * x2),
    ("x1/2 - 1/3", x1 * Poly.const(Fraction(1, 2)) - Poly.const(Fraction(1, 3))),
    ("2*x3^0", Poly.const(2)),
    ("--x2", x2),
])
def test_polynomials(text, want):
    assert parse_polynomial(text, 3) == want


@pytest.mark.parametrize("text, col, fragment", [
    ("x1 + ", 5, "end"),
    ("x1 * x4", 6, "out of range"),
    ("x1 / x2", 4, "non-constant"),
    ("x1 / 0", 4, "zero"),
    ("x1 ^ x2", 6, "exponent"),
    ("(x1 + x2", 9, "')'"),
    ("x1 $ 2", 4, "unexpected character"),
    ("", 1, "empty"),
])
def test_polynomial_errors_carry_column(text, col, fragment):
    with pytest.raises(ModelError) as err:
        parse_polynomial(text, 3, line=7, col=1)
    assert err.value.line == 7
    assert err.value.col == col
    assert fragment in err.value.message


def test_model_text():
    t = parse_model_text("# quadratic\nname = Q\ndim = 2\n\nalpha 1 2 = x1*x2  # trailing\n")
    assert t.name == "Q" and t.k == 2
    assert t(1, 2) == x1 * x2 and t(2, 1) == -(x1 * x2)


def test_crlf_accepted():
    t = parse_model_text("dim = 2\r\nalpha 1 2 = 1\r\n")
    assert t(1, 2) == Poly.const(1)


@pytest.mark.parametrize("text, line, fragment", [
    ("alpha 1 2 = 1\n", 1, "missing 'dim"),
    ("dim = 2\ndim = 2\n", 2, "twice"),
    ("dim = 0\n", 1, "positive"),
    ("dim = 2\nalpha 2 1 = 1\n", 2, "i < j"),
    ("dim = 2\nalpha 1 3 = 1\n", 2, "out of range"),
    ("dim = 2\nalpha 1 2 = 1\nalpha 1 2 = x1\n", 3, "twice"),
    ("dim = 2\nbeta 1 2 = 1\n", 2, "expected"),
    ("dim = 2\nalpha 1 2 = x3\n", 2, "out of range"),
])
def test_model_errors(text, line, fragment):
    with pytest.raises(ModelError) as err:
        parse_model_text(text, "m.model")
    assert err.value.line == line
    assert fragment in str(err.value)
    assert str(err.value).startswith(f"m.model:{line}:")


@pytest.mark.parametrize("name", psm.FIXTURES)
def test_round_trip(name):
    t = psm.fixture(name)
    back = parse_model_text(render_model(t))
    assert back.upper() == t.upper()
    assert (back.name, back.description, back.k) == (t.name, t.description, t.k)


def test_file_name_defaults_to_stem(tmp_path):
    p = tmp_path / "mine.model"
    p.write_text("dim = 2\nalpha 1 2 = x1\n")
    assert parse_model(p).name == "mine"


def test_unreadable_files(tmp_path):
    with pytest.raises(ModelError):
        parse_model(tmp_path / "absent.model")
    bad = tmp_path / "bad.model"
    bad.write_bytes(b"dim = 2\nalpha 1 2 = \xff\n")
    with pytest.raises(ModelError, match="UTF-8"):
        parse_model(bad)
