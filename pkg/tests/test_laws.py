"""Randomized law suites; every suite draws at least 500 seeded cases."""

import pytest

from bvjet.algebra import DU1, DU2, Expr, bidegrees, left_partial, mul
from bvjet.bv import antibracket, apply_derivation, bracket_derivation, component_field, equivalent
from bvjet.jet import (
    EvolutionaryVectorField, TotalDifferentialOperator, adjoint_apply, euler_lagrange,
    horizontal_differential as d, is_total_divergence, prolong_apply, top_form, total_derivative,
)
from randexpr import (
    C, U, rand_expr, rand_functional, rand_gen, rand_homogeneous, rand_one_form, rng_for,
    sigma_complex,
)

N = 500


def parity(e: Expr) -> int:
    (p,) = {b.parity for b in bidegrees(e)}
    return p


def sign(n: int) -> int:
    return -1 if n % 2 else 1


def test_graded_commutativity():
    rng = rng_for(100)
    for _ in range(N):
        a, b = rand_homogeneous(rng), rand_homogeneous(rng)
        assert mul(a, b) == mul(b, a).scale(sign(parity(a) * parity(b)))


def test_associativity():
    rng = rng_for(101)
    for _ in range(N):
        a, b, c = rand_expr(rng), rand_expr(rng), rand_expr(rng)
        assert mul(mul(a, b), c) == mul(a, mul(b, c))


def test_distributivity():
    rng = rng_for(102)
    for _ in range(N):
        a, b, c = rand_expr(rng), rand_expr(rng), rand_expr(rng)
        assert mul(a, b + c) == mul(a, b) + mul(a, c)


def form(e: Expr) -> int:
    return max((b.form for b in bidegrees(e)), default=0)


def test_left_partial_leibniz():
    """Checked where the product is not truncated by form degree."""
    rng = rng_for(103)
    done = 0
    while done < N:
        a, b = rand_homogeneous(rng), rand_homogeneous(rng)
        if form(a) + form(b) > 2:
            continue
        done += 1
        g = rand_gen(rng)
        lhs = left_partial(mul(a, b), g)
        rhs = mul(left_partial(a, g), b) + mul(a, left_partial(b, g)).scale(sign(g.parity * parity(a)))
        assert lhs == rhs


def test_total_derivative_is_even_derivation():
    rng = rng_for(104)
    for _ in range(N):
        a, b = rand_expr(rng), rand_expr(rng)
        mu = rng.randint(1, 2)
        assert total_derivative(mul(a, b), mu) == mul(total_derivative(a, mu), b) + mul(a, total_derivative(b, mu))


def test_total_derivatives_commute():
    rng = rng_for(105)
    for _ in range(N):
        a = rand_expr(rng)
        assert total_derivative(total_derivative(a, 1), 2) == total_derivative(total_derivative(a, 2), 1)


def test_dh_squared_zero():
    rng = rng_for(106)
    for _ in range(N):
        assert not d(d(rand_expr(rng)))


def test_euler_annihilates_exact_densities():
    rng = rng_for(107)
    for _ in range(N):
        F = d(rand_one_form(rng))
        for c in F.components():
            assert not euler_lagrange(F, c)
        assert is_total_divergence(F).ok


def rand_operator(rng):
    coeffs = {}
    for _ in range(rng.randint(1, 3)):
        n1 = rng.randint(0, 2)
        coeffs[(n1, rng.randint(0, 2 - n1))] = rand_expr(rng, with_du=False, fields=(U,))
    return TotalDifferentialOperator(coeffs)


def test_adjoint_defect_is_divergence():
    rng = rng_for(108)
    for _ in range(N):
        Z = rand_operator(rng)
        F = rand_homogeneous(rng, with_du=False)
        G = rand_homogeneous(rng, with_du=False)
        defect = mul(F, Z(G)) - mul(adjoint_apply(Z, F), G)
        assert is_total_divergence(top_form(defect)).ok


def test_double_adjoint():
    rng = rng_for(109)
    for _ in range(N):
        Z = rand_operator(rng)
        G = rand_expr(rng, with_du=False)
        assert Z.adjoint().adjoint()(G) == Z(G)


def rand_even_field(rng):
    comps = {}
    for a in (1, 2):
        comps[U.gen(a)] = rand_expr(rng, with_du=False, fields=(U,))
        comps[C.gen(a)] = mul(C(rng.randint(1, 2)), rand_expr(rng, with_du=False, fields=(U,)))
    return EvolutionaryVectorField(comps)


def test_prolongation_commutes_with_total_derivative():
    rng = rng_for(110)
    for _ in range(N):
        Q = rand_even_field(rng)
        f = rand_expr(rng)
        mu = rng.randint(1, 2)
        assert prolong_apply(Q, total_derivative(f, mu)) == total_derivative(prolong_apply(Q, f), mu)


# -- antibracket ----------------------------------------------------------------

@pytest.fixture(scope="module")
def model():
    return sigma_complex().model


def test_antibracket_antisymmetry(model):
    rng = rng_for(120)
    for _ in range(N):
        A, B = rand_functional(rng), rand_functional(rng)
        s = sign((A.parity() + 1) * (B.parity() + 1))
        assert equivalent(antibracket(model, A, B), antibracket(model, B, A).scale(-s))


def rand_factor_pair(rng):
    """Local forms b, c whose product is a top-degree density."""
    P = sigma_complex()
    ones = [P.eta, P.etap, lambda i: d(P.X(i)), lambda i: d(P.gamma(i))]
    twos = [P.Xp, P.gammap, lambda i: d(P.eta(i)), lambda i: d(P.etap(i))]
    zeros = [P.X, P.gamma]
    while True:
        if rng.random() < 0.5:
            b = rng.choice(ones)(rng.randint(1, 2))
            c = rng.choice(ones)(rng.randint(1, 2))
        else:
            b = rng.choice(zeros)(rng.randint(1, 2))
            c = rng.choice(twos)(rng.randint(1, 2))
            if rng.random() < 0.5:
                b, c = c, b
        if rng.random() < 0.5:
            b = mul(b, rng.choice(zeros)(rng.randint(1, 2)))
        if b and c and mul(b, c):
            return b, c


def test_antibracket_leibniz(model):
    """(A, bc) = (A, b) c + (-1)^{(|A|+1)|b|} b (A, c), modulo d_H."""
    rng = rng_for(121)
    for _ in range(N):
        A = rand_functional(rng)
        b, c = rand_factor_pair(rng)
        Q = component_field(bracket_derivation(model, A), (A.parity() + 1) % 2)
        rhs = mul(apply_derivation(Q, b), c) + mul(b, apply_derivation(Q, c)).scale(
            sign((A.parity() + 1) * parity(b)))
        assert equivalent(antibracket(model, A, mul(b, c)), rhs)


def test_antibracket_jacobi(model):
    """(A,(B,C)) = ((A,B),C) + (-1)^{(|A|+1)(|B|+1)} (B,(A,C)), modulo d_H."""
    rng = rng_for(122)
    for _ in range(N):
        A, B, C_ = rand_functional(rng), rand_functional(rng), rand_functional(rng)
        s = sign((A.parity() + 1) * (B.parity() + 1))
        lhs = antibracket(model, A, antibracket(model, B, C_))
        rhs = antibracket(model, antibracket(model, A, B), C_) + antibracket(
            model, B, antibracket(model, A, C_)).scale(s)
        assert equivalent(lhs, rhs)


def test_representative_independence(model):
    rng = rng_for(123)
    P = sigma_complex()
    for _ in range(N):
        A, B = rand_functional(rng), rand_functional(rng)
        zeta = mul(Expr.gen(rng.choice([DU1, DU2])), mul(P.X(rng.randint(1, 2)), P.gamma(rng.randint(1, 2))))
        zeta = zeta + mul(P.etap(1), P.X(2))
        base = antibracket(model, A, B)
        assert equivalent(antibracket(model, A + d(zeta), B), base)
        assert equivalent(antibracket(model, A, B + d(zeta)), base)
