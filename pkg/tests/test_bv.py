import pytest

from bvjet.algebra import DU1, DU2, Expr, mul, prod
from bvjet.bv import (
    BVModel, LocalFunctional, _fparity, _tensor_indices, antibracket, apply_derivation,
    bracket_derivation, component_field, differential_nilpotency_check, equivalent,
    form_generator, generator_action, master_equation_check, variational_derivative,
)
from bvjet.jet import horizontal_differential as d, is_total_divergence
from bvjet.psm import PSMComplex, build_bv_action, fixture
from randexpr import rand_functional, rng_for, sigma_complex


@pytest.fixture(scope="module")
def P():
    return sigma_complex()


def test_model_rejects_bad_pair(P):
    with pytest.raises(ValueError):
        BVModel(((P.Xf, P.etapf),))


def test_local_functional_requires_top_form(P):
    with pytest.raises(ValueError):
        LocalFunctional(P.X(1))
    with pytest.raises(ValueError):
        antibracket(P.model, P.X(1), P.Xp(1))


def test_local_functional_equivalence(P):
    L = LocalFunctional(mul(P.eta(1), d(P.X(2))))
    shifted = L + d(mul(P.X(1), P.eta(2)))
    assert L.equivalent(shifted)
    assert not L.equivalent(L + mul(P.eta(1), d(P.X(1))))


def test_pairing_recovers_conjugate(P):
    A = mul(P.X(1), P.Xp(1))
    assert variational_derivative(A, P.Xpf, (1,)) == P.X(1)
    assert variational_derivative(A, P.Xf, (1,)) == P.Xp(1)
    A = mul(P.eta(2), P.etap(2))
    assert variational_derivative(A, P.etapf, (2,)) in (P.eta(2), -P.eta(2))


def test_smeared_pairing_is_delta(P):
    # (gamma_1 X+_i, X^j gamma+_2) is nonzero exactly when i = j
    for i in (1, 2):
        for j in (1, 2):
            br = antibracket(P.model, mul(P.Xp(i), P.gamma(1)), mul(P.X(j), P.gammap(2)))
            assert bool(br) == (i == j)


def test_derivative_of_exact_density_vanishes(P):
    rng = rng_for(21)
    for _ in range(20):
        zeta = mul(Expr.gen(DU1), prod(P.X(1), P.gamma(2), P.X(2)))
        for fam in P.families():
            for idx in _tensor_indices(fam):
                assert not variational_derivative(d(zeta), fam, idx)


def test_bracket_with_constant(P):
    A = rand_functional(rng_for(1))
    c = Expr.product([DU1, DU2], 3)
    assert not antibracket(P.model, A, c)
    assert not antibracket(P.model, c, A)


def test_generator_action_examples():
    Q = PSMComplex(fixture("F3"))
    act = build_bv_action(Q)
    for i in Q.idx:
        for fam in (Q.Xf, Q.etaf, Q.gammaf):
            assert not generator_action(Q.model, act.S0, fam, (i,))
        want = d(Q.eta(i)) + Q.sum(lambda k, l: prod(Q.da[i, k, l], Q.eta(k), Q.eta(l)), 2).scale(
            __import__("fractions").Fraction(1, 2))
        assert generator_action(Q.model, act.S0, Q.Xpf, (i,)) == want
        assert generator_action(Q.model, act.S1, Q.Xf, (i,)) == Q.sum(lambda j: mul(Q.a[i, j], Q.gamma(j)), 1)


def test_generator_action_needs_even(P):
    odd = rand_functional(rng_for(2), parity=1)
    with pytest.raises(ValueError):
        generator_action(P.model, odd, P.Xf, (1,))


def test_master_equation_on_constant(P):
    assert master_equation_check(P.model, Expr.product([DU1, DU2], 5)).passed


def test_master_failure_reports_witness():
    Q = PSMComplex(fixture("F3"))
    act = build_bv_action(Q)
    chk = master_equation_check(Q.model, act.S0 + act.S1)
    assert not chk.passed and chk.witness


def test_bracket_is_prolonged_derivation(P):
    """(A, B) equals pr(D_A) applied to the density B, up to d_H."""
    rng = rng_for(31)
    for _ in range(60):
        A, B = rand_functional(rng), rand_functional(rng)
        Q = component_field(bracket_derivation(P.model, A), (A.parity() + 1) % 2)
        assert equivalent(antibracket(P.model, A, B), apply_derivation(Q, B))


def test_nilpotency_from_master(P):
    for name in ("F1", "F2", "F3"):
        Q = PSMComplex(fixture(name))
        S = build_bv_action(Q).SBV
        assert master_equation_check(Q.model, S).passed
        assert differential_nilpotency_check(Q.model, S).passed


def _alternative_layout(model, A, B):
    """sum (-1)^{|phi|(|phi|+|A|)} (dA/dphi dB/dphi+ - (-1)^{deg phi+|A|+1} dA/dphi+ dB/dphi)."""
    out = Expr()
    pa = A.parity()
    for phi, anti in model.pairs:
        p = _fparity(phi)
        s = -1 if (p * (p + pa)) % 2 else 1
        t = -1 if (phi.form + pa + 1) % 2 else 1
        for idx in _tensor_indices(phi):
            out = out + (mul(variational_derivative(A, phi, idx), variational_derivative(B, anti, idx))
                         - mul(variational_derivative(A, anti, idx), variational_derivative(B, phi, idx)).scale(t)).scale(s)
    return out


def test_alternative_layout_admits_no_solution():
    """Under the layout with (-1)^{deg phi} in its second term, no choice of
    signs for the antifield terms of the action solves the master equation,
    even for a constant tensor."""
    from itertools import product as iproduct
    from bvjet.psm import ACTION_TERMS, evaluate_term
    Q = PSMComplex(fixture("F1"))
    S0 = sum((evaluate_term(Q, t, None) for t in ACTION_TERMS[0]), Expr())
    rest = [evaluate_term(Q, t, None) for t in ACTION_TERMS[1] + ACTION_TERMS[2]]
    for signs in iproduct((1, -1), repeat=len(rest)):
        S = S0 + sum((t.scale(s) for s, t in zip(signs, rest)), Expr())
        assert not is_total_divergence(_alternative_layout(Q.model, S, S)).ok
