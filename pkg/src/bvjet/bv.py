"""
The antibracket on local functionals and the differential it induces.

Functional derivatives of a local functional A = int L are realized as
Euler-Lagrange derivatives of the density L, assembled into a form W of
complementary degree so that a variation by a test form rho reads
int rho ^ W. For a one-form family phi = du^mu phi_mu this gives
W = (-1)^|phi_mu| sum_mu i_mu E_{phi_mu}(L).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .algebra import DU1, DU2, Expr, Field, bidegrees, interior, mul
from .jet import EvolutionaryVectorField, Verdict, euler_lagrange, is_total_divergence, prolong_apply
from .report import Check

__all__ = [
    "BVModel", "LocalFunctional", "form_generator", "variational_derivative",
    "antibracket", "bracket_derivation", "generator_action", "apply_derivation",
    "master_equation_check", "differential_nilpotency_check", "equivalent",
]


@dataclass(frozen=True)
class BVModel:
    """Fields paired with their antifields.

    Each pair satisfies ghost(phi) + ghost(phi+) = -1 and
    form(phi) + form(phi+) = 2.
    """
    pairs: tuple

    def __post_init__(self):
        for phi, anti in self.pairs:
            if phi.ghost + anti.ghost != -1:
                raise ValueError(f"ghost degrees of {phi.name}, {anti.name} must sum to -1")
            if phi.form + anti.form != 2:
                raise ValueError(f"form degrees of {phi.name}, {anti.name} must sum to 2")
            if phi.shape != anti.shape:
                raise ValueError(f"{phi.name} and {anti.name} must have the same index ranges")

    @property
    def fields(self) -> list:
        return [p for p, _ in self.pairs]

    @property
    def antifields(self) -> list:
        return [a for _, a in self.pairs]

    @property
    def families(self) -> list:
        return self.fields + self.antifields

    def conjugate(self, fam: Field) -> Field:
        for p, a in self.pairs:
            if fam == p:
                return a
            if fam == a:
                return p
        raise KeyError(fam.name)

    def is_antifield(self, fam: Field) -> bool:
        return fam in self.antifields

    def generators(self) -> list:
        """(family, tensor index) for every form-level generator."""
        out = []
        for fam in self.families:
            for idx in _tensor_indices(fam):
                out.append((fam, idx))
        return out


def _tensor_indices(fam: Field) -> list:
    out = [()]
    for n in fam.shape:
        out = [t + (i,) for t in out for i in range(1, n + 1)]
    return out


def _fparity(fam: Field) -> int:
    return (fam.form + fam.ghost) % 2


@dataclass(frozen=True)
class LocalFunctional:
    """int over Sigma of a top-degree density; equality is modulo d_H."""
    density: Expr

    def __post_init__(self):
        _require_top(self.density)

    def __add__(self, other):
        return LocalFunctional(self.density + _density(other))

    def equivalent(self, other) -> bool:
        return equivalent(self.density, _density(other))


def _density(a) -> Expr:
    return a.density if isinstance(a, LocalFunctional) else a


def _require_top(L: Expr):
    forms = {b.form for b in bidegrees(L)}
    if forms - {2}:
        raise ValueError(f"representative must be a top-degree density, found form degrees {sorted(forms)}")


def equivalent(a: Expr, b: Expr) -> bool:
    return is_total_divergence(a - b).ok


def form_generator(fam: Field, idx: tuple = ()) -> Expr:
    """The geometric object: a 0-form, a bundled 2-form, or du^mu phi_mu."""
    if fam.form == 1:
        return (mul(Expr.gen(DU1), fam(*idx, 1)) + mul(Expr.gen(DU2), fam(*idx, 2)))
    return fam(*idx)


def variational_derivative(A, fam: Field, idx: tuple = ()) -> Expr:
    """dA/dphi as a form of degree 2 - form(phi)."""
    L = _density(A)
    if fam.form == 1:
        par = fam.gen(*idx, 1).parity
        w = Expr()
        for mu in (1, 2):
            w = w + interior(euler_lagrange(L, fam.gen(*idx, mu)), mu)
        return -w if par else w
    return euler_lagrange(L, fam.gen(*idx))


def _parity_parts(L: Expr) -> dict:
    return L.split_parity()


def _sign(n: int) -> int:
    return -1 if n % 2 else 1


def antibracket(model: BVModel, A, B) -> Expr:
    """(A, B) as a density, with the sign layout

        sum_a (-1)^{gh phi} ( (-1)^{|A||phi+|} dA/dphi+ ^ dB/dphi
                            + (-1)^{|A||phi|}  dA/dphi  ^ dB/dphi+ ).

    Odd parts of A pick up the parity of the variable they are
    differentiated by; even parts do not.
    """
    A, B = _density(A), _density(B)
    _require_top(A)
    _require_top(B)
    out = Expr()
    for pa, Apart in _parity_parts(A).items():
        for phi, anti in model.pairs:
            g = _sign(phi.ghost)
            s_anti = g * _sign(pa * _fparity(anti))
            s_phi = g * _sign(pa * _fparity(phi))
            for idx in _tensor_indices(phi):
                a_anti = variational_derivative(Apart, anti, idx)
                a_phi = variational_derivative(Apart, phi, idx)
                if a_anti:
                    out = out + mul(a_anti, variational_derivative(B, phi, idx)).scale(s_anti)
                if a_phi:
                    out = out + mul(a_phi, variational_derivative(B, anti, idx)).scale(s_phi)
    return out


def bracket_derivation(model: BVModel, A) -> dict:
    """Form-level images (A, g) for every generator; A of a single parity.

    (A, phi)  = (-1)^{gh phi + |A||phi+|} dA/dphi+
    (A, phi+) = (-1)^{gh phi + |A||phi|}  dA/dphi
    """
    L = _density(A)
    pa = L.parity()
    images = {}
    for phi, anti in model.pairs:
        g = _sign(phi.ghost)
        for idx in _tensor_indices(phi):
            images[(phi, idx)] = variational_derivative(L, anti, idx).scale(g * _sign(pa * _fparity(anti)))
            images[(anti, idx)] = variational_derivative(L, phi, idx).scale(g * _sign(pa * _fparity(phi)))
    return images


def generator_action(model: BVModel, S, fam: Field, idx: tuple = ()) -> Expr:
    """(S, g) for an even functional S."""
    L = _density(S)
    if L.parities() - {0}:
        raise ValueError("generator_action needs an even functional")
    return bracket_derivation(model, L)[(fam, idx)]


def component_field(images: dict, parity: int) -> EvolutionaryVectorField:
    """Component images of a derivation of the given parity from form images.

    D(du^mu phi_mu) = (-1)^p du^mu D(phi_mu), so D(phi_mu) = (-1)^p i_mu D(phi).
    """
    comps = {}
    for (fam, idx), img in images.items():
        if fam.form == 1:
            for mu in (1, 2):
                v = interior(img, mu)
                comps[fam.gen(*idx, mu)] = -v if parity else v
        else:
            comps[fam.gen(*idx)] = img
    return EvolutionaryVectorField(comps)


def apply_derivation(Q: EvolutionaryVectorField, f: Expr) -> Expr:
    return prolong_apply(Q, f)


def master_equation_check(model: BVModel, S, name: str = "master equation") -> Check:
    t0 = time.perf_counter()
    L = _density(S)
    br = antibracket(model, L, L)
    if not br:
        return Check(name, True, "", "(S,S) = 0 exactly", time.perf_counter() - t0)
    comps = br.components()
    witnesses = []
    for c in comps:
        e = euler_lagrange(br, c)
        if e:
            lowest = min(b.ghost for b in bidegrees(e))
            witnesses.append((lowest, c, e))
    dt = time.perf_counter() - t0
    if not witnesses:
        return Check(name, True, "", "(S,S) is d_H-exact", dt)
    witnesses.sort(key=lambda w: (w[0], w[1]))
    _, c, e = witnesses[0]
    return Check(name, False, e.render(), f"(S,S) not d_H-exact; E[{c.render()}] != 0", dt)


def differential_nilpotency_check(model: BVModel, S, name: str = "nilpotency") -> Check:
    """D = (S, .) extended as a derivation; D(D(g)) on every generator."""
    t0 = time.perf_counter()
    L = _density(S)
    images = bracket_derivation(model, L)
    Q = component_field(images, (L.parity() + 1) % 2)
    failing = []
    for fam, idx in model.generators():
        dd = apply_derivation(Q, images[(fam, idx)])
        if dd:
            failing.append((fam, idx, dd))
    dt = time.perf_counter() - t0
    if not failing:
        return Check(name, True, "", f"D^2 = 0 on all {len(images)} generators", dt)
    fam, idx, dd = failing[0]
    label = _label(fam, idx)
    names = ", ".join(_label(f, i) for f, i, _ in failing)
    return Check(name, False, f"D^2({label}) = {dd.render()}", f"D^2 != 0 on {names}", dt)


def _label(fam: Field, idx: tuple) -> str:
    return fam.name + ("[" + ",".join(map(str, idx)) + "]" if idx else "")
