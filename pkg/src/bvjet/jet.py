"""
Total derivatives, the horizontal differential, Euler-Lagrange operators,
formal adjoints, prolongations and the Noether machinery, over the jet
algebra of :mod:`bvjet.algebra`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .algebra import DU1, DU2, Expr, Gen, _key_from_factors, left_partial, mul

__all__ = [
    "MultiIndex", "Verdict", "TotalDifferentialOperator", "EvolutionaryVectorField",
    "GaugeSymmetryFamily", "total_derivative", "apply_multi", "horizontal_differential",
    "euler_lagrange", "is_total_divergence", "adjoint_apply", "prolong_apply",
    "variational_symmetry_check", "noether_from_gauge", "strip_top", "top_form",
]


class MultiIndex(tuple):
    """Symmetric multi-index over {1, 2}, stored as (n1, n2)."""

    def __new__(cls, n1: int = 0, n2: int = 0):
        if n1 < 0 or n2 < 0:
            raise ValueError("multi-index counts must be non-negative")
        return super().__new__(cls, (n1, n2))

    @property
    def n1(self):
        return self[0]

    @property
    def n2(self):
        return self[1]

    @property
    def order(self) -> int:
        return self[0] + self[1]

    def add(self, mu: int) -> "MultiIndex":
        return MultiIndex(self[0] + (mu == 1), self[1] + (mu == 2))

    @classmethod
    def of(cls, *mus: int) -> "MultiIndex":
        return cls(sum(1 for m in mus if m == 1), sum(1 for m in mus if m == 2))


@dataclass(frozen=True)
class Verdict:
    """Boolean outcome with an optional witness expression."""
    ok: bool
    witness: Expr | None = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def total_derivative(f: Expr, mu: int) -> Expr:
    """D_mu: even derivation raising the multi-index of every jet coordinate."""
    if mu not in (1, 2):
        raise ValueError(f"base direction must be 1 or 2, got {mu}")
    acc: dict = {}
    for (odd, even), c in f.terms():
        for p, g in enumerate(odd):
            if g.is_base_form:
                continue
            r = _key_from_factors(odd[:p] + (g.shifted(mu),) + odd[p + 1:]
                                  + tuple(h for h, e in even for _ in range(e)))
            if r is None:
                continue
            s, k = r
            acc[k] = acc.get(k, 0) + s * c
        for p, (g, e) in enumerate(even):
            rest = list(odd) + [h for q, (h, n) in enumerate(even) for _ in range(n if q != p else n - 1)]
            r = _key_from_factors(rest + [g.shifted(mu)])
            if r is None:
                continue
            s, k = r
            acc[k] = acc.get(k, 0) + s * e * c
    return Expr({k: c for k, c in acc.items() if c})


def apply_multi(f: Expr, index) -> Expr:
    """D_I f for a multi-index I = (n1, n2)."""
    n1, n2 = index
    for _ in range(n1):
        f = total_derivative(f, 1)
    for _ in range(n2):
        f = total_derivative(f, 2)
    return f


def horizontal_differential(f: Expr) -> Expr:
    """d_H f = du1 D_1 f + du2 D_2 f, du on the left."""
    return mul(Expr.gen(DU1), total_derivative(f, 1)) + mul(Expr.gen(DU2), total_derivative(f, 2))


def _signed(index) -> int:
    return -1 if (index[0] + index[1]) % 2 else 1


def euler_lagrange(L: Expr, coord: Gen) -> Expr:
    """E_c(L) = sum_I (-D)_I dL/dc_I for the component of `coord`.

    L may be a density (form 2) or a local function; du factors pass through
    the total derivatives untouched.
    """
    base = coord.base()
    out = Expr()
    for g in sorted(g for g in L.generators() if not g.is_base_form and g.same_component(base)):
        part = left_partial(L, g)
        out = out + apply_multi(part, (g.n1, g.n2)).scale(_signed((g.n1, g.n2)))
    return out


def is_total_divergence(F: Expr, coords=None) -> Verdict:
    """Decide d_H-exactness of a top-degree density by Euler annihilation.

    Every component occurring in F is tested (components absent from F have
    zero Euler derivative). `coords` may restrict or order the test.
    """
    bad = [b for b in _key_forms(F) if b != 2]
    if bad:
        raise ValueError(f"density must be of form degree 2, found {sorted(set(bad))}")
    comps = F.components() if coords is None else sorted({c.base() for c in coords})
    for c in comps:
        e = euler_lagrange(F, c)
        if e:
            return Verdict(False, e, f"E[{c.render()}] != 0")
    return Verdict(True)


def _key_forms(F: Expr):
    from .algebra import bidegrees
    return [b.form for b in bidegrees(F)]


def top_form(scalar: Expr) -> Expr:
    """scalar * du1^du2."""
    return mul(scalar, Expr.product([DU1, DU2]))


def strip_top(F: Expr) -> Expr:
    """Coefficient of du1^du2 (monomials carrying it), dropping the rest."""
    return left_partial(left_partial(F, DU1), DU2)


@dataclass(frozen=True)
class TotalDifferentialOperator:
    """Z = sum_I Z^I D_I."""
    coefficients: Mapping = field(default_factory=dict)

    def __post_init__(self):
        coeffs = {MultiIndex(*k): v for k, v in dict(self.coefficients).items() if v}
        object.__setattr__(self, "coefficients", coeffs)

    def __call__(self, G: Expr) -> Expr:
        out = Expr()
        for I, z in self.coefficients.items():
            out = out + mul(z, apply_multi(G, I))
        return out

    def order(self) -> int:
        return max((I.order for I in self.coefficients), default=0)

    def adjoint(self) -> "TotalDifferentialOperator":
        """Coefficients of Z+ as an operator, by expanding (-D)_J(Z^J F)."""
        # (-D)_J (Z^J F) = sum over splittings J = A + B of binom * (-1)^|J| D_A(Z^J) D_B(F)
        from math import comb
        acc: dict = {}
        for J, z in self.coefficients.items():
            for a1 in range(J[0] + 1):
                for a2 in range(J[1] + 1):
                    B = MultiIndex(J[0] - a1, J[1] - a2)
                    c = comb(J[0], a1) * comb(J[1], a2) * _signed(J)
                    term = apply_multi(z, (a1, a2)).scale(c)
                    acc[B] = acc.get(B, Expr()) + term
        return TotalDifferentialOperator(acc)


def adjoint_apply(Z: TotalDifferentialOperator, F: Expr) -> Expr:
    """Z+(F) = sum_J (-D)_J (Z^J F)."""
    out = Expr()
    for J, z in Z.coefficients.items():
        out = out + apply_multi(mul(z, F), J).scale(_signed(J))
    return out


@dataclass(frozen=True)
class EvolutionaryVectorField:
    """Q = Q^a d/du^a, keyed by underived coordinates."""
    components: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "components", {g.base(): q for g, q in dict(self.components).items()})


def prolong_apply(Q: EvolutionaryVectorField, F: Expr) -> Expr:
    """pr(Q)(F) = sum_{a,J} D_J(Q^a) dF/du^a_J (left derivatives)."""
    out = Expr()
    cache: dict = {}
    for g in F.generators():
        if g.is_base_form:
            continue
        q = Q.components.get(g.base())
        if q is None or not q:
            continue
        J = (g.n1, g.n2)
        if (g.base(), J) not in cache:
            cache[(g.base(), J)] = apply_multi(q, J)
        out = out + mul(cache[(g.base(), J)], left_partial(F, g))
    return out


def variational_symmetry_check(Q: EvolutionaryVectorField, L: Expr) -> Verdict:
    """Q is a variational symmetry of L iff sum_a Q^a E_a(L) is a divergence.

    Cross-checked against pr(Q)(L); a disagreement is an engine error.
    """
    total = Expr()
    for c, q in Q.components.items():
        total = total + mul(q, euler_lagrange(L, c))
    first = is_total_divergence(total)
    second = is_total_divergence(prolong_apply(Q, L))
    if first.ok != second.ok:
        raise AssertionError("Q.E(L) and pr(Q)(L) disagree on divergence")
    return first


@dataclass(frozen=True)
class GaugeSymmetryFamily:
    """R^{a,rho}: for each parameter rho and target coordinate a, an operator."""
    entries: Mapping = field(default_factory=dict)

    def vector_field(self, params: Mapping) -> EvolutionaryVectorField:
        """Q^a = sum_rho R^{a,rho}(eps_rho) for parameter expressions eps_rho."""
        comps: dict = {}
        for rho, row in self.entries.items():
            for a, Z in row.items():
                comps[a] = comps.get(a, Expr()) + Z(params[rho])
        return EvolutionaryVectorField(comps)


def noether_from_gauge(R: GaugeSymmetryFamily, L: Expr):
    """N^rho = sum_{a,I} (-1)^|I| D_I(R^{a,rho,I} E_a(L)); returns (dict, all_zero)."""
    euler: dict = {}
    out: dict = {}
    for rho, row in R.entries.items():
        n = Expr()
        for a, Z in row.items():
            if a not in euler:
                euler[a] = euler_lagrange(L, a)
            n = n + adjoint_apply(Z, euler[a])
        out[rho] = n
    return out, all(not v for v in out.values())
