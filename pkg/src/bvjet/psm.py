"""
The Poisson sigma model over R^k: fields X^i, eta_i, ghosts gamma_i and
their antifields, the BV action, and the checks relating gauge symmetry,
Noether identities, the Koszul-Tate and Chevalley-Eilenberg differentials
and the total BV differential.

All alpha-dependent coefficients are stored already composed with X.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product as iproduct

from .algebra import Expr, Field, Poly, bidegrees, mul, prod, substitute
from .bv import (
    BVModel, bracket_derivation, component_field, apply_derivation,
    differential_nilpotency_check, form_generator, master_equation_check,
    variational_derivative, equivalent,
)
from .jet import (
    EvolutionaryVectorField, GaugeSymmetryFamily, TotalDifferentialOperator, Verdict,
    euler_lagrange, horizontal_differential as d, is_total_divergence, noether_from_gauge,
    strip_top, variational_symmetry_check,
)
from .report import Check, CheckReport

HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)


class PreconditionError(ValueError):
    pass


class PoissonTensor:
    """Skew k x k array of polynomials in x1..xk."""

    def __init__(self, k: int, entries: dict, name: str = "", description: str = ""):
        if k < 1:
            raise ValueError("dimension must be positive")
        self.k = k
        self.name = name
        self.description = description
        allowed = {f"x{i}" for i in range(1, k + 1)}
        table: dict = {}
        for (i, j), p in entries.items():
            if not (1 <= i <= k and 1 <= j <= k):
                raise ValueError(f"index ({i},{j}) out of range 1..{k}")
            if not isinstance(p, Poly):
                p = Poly.const(p)
            extra = p.symbols() - allowed
            if extra:
                raise ValueError(f"alpha^{i}{j} uses unknown symbols {sorted(extra)}")
            if i == j:
                if not p.is_zero():
                    raise ValueError(f"diagonal entry alpha^{i}{i} must vanish")
                continue
            for key, val in (((i, j), p), ((j, i), -p)):
                if key in table and table[key] != val:
                    raise ValueError(f"entries ({i},{j}) and ({j},{i}) are not skew")
                table[key] = val
        self._table = table

    def __call__(self, i: int, j: int) -> Poly:
        return self._table.get((i, j), Poly())

    def d(self, l: int, i: int, j: int) -> Poly:
        return self(i, j).diff(f"x{l}")

    def symbols(self) -> list:
        return [f"x{i}" for i in range(1, self.k + 1)]

    def upper(self) -> list:
        return [((i, j), self(i, j)) for i in range(1, self.k + 1)
                for j in range(i + 1, self.k + 1) if not self(i, j).is_zero()]

    def render(self) -> str:
        body = ", ".join(f"alpha^{i}{j} = {p.render()}" for (i, j), p in self.upper())
        return f"k={self.k}; " + (body or "alpha = 0")

    def second_derivatives_vanish(self) -> bool:
        r = range(1, self.k + 1)
        return all(self(i, j).diff(f"x{a}").diff(f"x{b}").is_zero()
                   for i in r for j in r for a in r for b in r)


def jacobi_check(alpha: PoissonTensor) -> Verdict:
    """alpha^{il} d_l alpha^{jk} + cyclic = 0 for every index triple."""
    r = range(1, alpha.k + 1)
    for i, j, k in iproduct(r, r, r):
        total = Poly()
        for l in r:
            total = (total + alpha(i, l) * alpha.d(l, j, k) + alpha(j, l) * alpha.d(l, k, i)
                     + alpha(k, l) * alpha.d(l, i, j))
        if not total.is_zero():
            return Verdict(False, total, f"cyclic sum for (i,j,k)=({i},{j},{k}) is {total.render()}")
    return Verdict(True, None, "cyclic sum vanishes for all index triples")


def fixture(name: str) -> PoissonTensor:
    """Bundled tensors F1-F4."""
    x = [None] + [Poly.var(f"x{i}") for i in range(1, 4)]
    if name == "F1":
        return PoissonTensor(2, {(1, 2): Poly.const(1)}, "F1", "constant symplectic")
    if name == "F2":
        return PoissonTensor(3, {(1, 2): x[3], (1, 3): -x[2], (2, 3): x[1]}, "F2", "linear so(3)")
    if name == "F3":
        return PoissonTensor(2, {(1, 2): x[1] * x[2]}, "F3", "quadratic")
    if name == "F4":
        return PoissonTensor(3, {(1, 2): x[3], (1, 3): x[1], (2, 3): x[2]}, "F4", "non-Poisson control")
    raise KeyError(name)


FIXTURES = ("F1", "F2", "F3", "F4")


class PSMComplex:
    """Generators, alpha expansions and form-level building blocks."""

    def __init__(self, alpha: PoissonTensor):
        self.alpha = alpha
        k = self.k = alpha.k
        sh = (k,)
        self.Xf = Field("X", 0, ghost=0, form=0, shape=sh, conjugate="X+")
        self.etaf = Field("eta", 1, ghost=0, form=1, shape=sh, conjugate="eta+")
        self.gammaf = Field("gamma", 2, ghost=1, form=0, shape=sh, conjugate="gamma+")
        self.Xpf = Field("X+", 3, ghost=-1, form=2, shape=sh, conjugate="X")
        self.etapf = Field("eta+", 4, ghost=-1, form=1, shape=sh, conjugate="eta")
        self.gammapf = Field("gamma+", 5, ghost=-2, form=2, shape=sh, conjugate="gamma")
        self.betaf = Field("beta", 6, ghost=0, form=0, shape=sh)
        self.model = BVModel(((self.Xf, self.Xpf), (self.etaf, self.etapf), (self.gammaf, self.gammapf)))
        self.idx = list(range(1, k + 1))
        sub = {f"x{i}": self.Xf(i) for i in self.idx}
        r = self.idx
        self.a = {(i, j): substitute(alpha(i, j), sub) for i in r for j in r}
        self.da = {(l, i, j): substitute(alpha.d(l, i, j), sub) for l in r for i in r for j in r}
        self.dda = {(l, m, i, j): substitute(alpha.d(l, i, j).diff(f"x{m}"), sub)
                    for l in r for m in r for i in r for j in r}
        self.ddda = {(l, m, n, i, j): substitute(alpha.d(l, i, j).diff(f"x{m}").diff(f"x{n}"), sub)
                     for l in r for m in r for n in r for i in r for j in r}

    # form-level generators
    def X(self, i):
        return self.Xf(i)

    def eta(self, i):
        return form_generator(self.etaf, (i,))

    def gamma(self, i):
        return self.gammaf(i)

    def Xp(self, i):
        return self.Xpf(i)

    def etap(self, i):
        return form_generator(self.etapf, (i,))

    def gammap(self, i):
        return self.gammapf(i)

    def beta(self, i):
        return self.betaf(i)

    def families(self):
        return [self.Xf, self.etaf, self.gammaf, self.Xpf, self.etapf, self.gammapf]

    def family(self, name: str) -> Field:
        for f in self.families():
            if f.name == name:
                return f
        raise KeyError(name)

    def generator(self, fam: Field, i: int) -> Expr:
        return form_generator(fam, (i,))

    # sums over index tuples
    def sum(self, fn, n: int) -> Expr:
        out = Expr()
        for t in iproduct(self.idx, repeat=n):
            out = out + fn(*t)
        return out


# ---------------------------------------------------------------------------
# Displayed formulas as data.
#
# A display term is a rational coefficient times a word of factors. Each
# factor is (token, index letters); the generator's own index is the letter
# "i" and every other letter is summed over 1..k.  Terms are evaluated by
# multiplying the factors in written order inside the engine algebra.

FACTOR_DEGREES = {
    "X": (0, 0), "eta": (1, 0), "gamma": (0, 1),
    "X+": (2, -1), "eta+": (1, -1), "gamma+": (2, -2),
    "dX": (1, 0), "deta": (2, 0), "dgamma": (1, 1), "deta+": (2, -1),
    "a": (0, 0), "da": (0, 0), "dda": (0, 0), "ddda": (0, 0),
}

_COEFF_TEXT = {"a": "alpha^{%s%s}", "da": "d_%s alpha^{%s%s}",
               "dda": "d_%s d_%s alpha^{%s%s}", "ddda": "d_%s d_%s d_%s alpha^{%s%s}"}


@dataclass(frozen=True)
class DisplayTerm:
    coeff: Fraction
    factors: tuple
    s_origin: int | None = None
    kt_origin: str | None = None  # "KT", "CE" or "neither"
    note: str = ""  # typo resolution applied to this term, if any
    flip: bool = False  # sign flipped by a logged resolution

    def letters(self) -> list:
        seen = []
        for _, ix in self.factors:
            for ch in ix:
                if ch != "i" and ch not in seen:
                    seen.append(ch)
        return seen

    def twist(self) -> int:
        """Sign relating a product written in the ghost-graded layout to the
        same product in the total-parity algebra: (-1)^{sum_{a<b} gh_a deg_b}."""
        total = 0
        degs = [FACTOR_DEGREES[t] for t, _ in self.factors]
        for a in range(len(degs)):
            for b in range(a + 1, len(degs)):
                total += degs[a][1] * degs[b][0]
        return -1 if total % 2 else 1

    def render(self) -> str:
        c = self.coeff
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        parts = [] if mag == 1 else [str(mag)]
        for tok, ix in self.factors:
            if tok in _COEFF_TEXT:
                parts.append(_COEFF_TEXT[tok] % tuple(ix))
            elif tok.startswith("d") and tok[1:] in FACTOR_DEGREES:
                parts.append(f"d{tok[1:]}_{ix}")
            else:
                parts.append(f"{tok}_{ix}")
        return f"{sign} " + " ".join(parts)


def T(coeff, *factors, s=None, kt=None, note="", flip=False) -> DisplayTerm:
    fs = tuple((f.split(":")[0], f.split(":")[1]) for f in factors)
    return DisplayTerm(Fraction(coeff), fs, s, kt, note, flip)


ETA_PLUS_SLIP = ("the d alpha eta+ gamma term of the total differential on eta+ is printed "
                 "with a sign that no consistent total differential reproduces; its sign is flipped")

# The total differential on the six generator families, as printed.
TOTAL_DIFFERENTIAL = {
    "X": [T(1, "a:ij", "gamma:j", s=1, kt="CE")],
    "eta+": [
        T(-1, "dX:i", s=0, kt="KT"),
        T(-1, "a:ij", "eta:j", s=0, kt="KT"),
        T(1, "da:kij", "eta+:k", "gamma:j", s=1, kt="CE", note=ETA_PLUS_SLIP, flip=True),
    ],
    "gamma+": [
        T(-1, "deta+:i", s=1, kt="KT"),
        T(-1, "a:ij", "X+:j", s=1, kt="KT"),
        T(HALF, "dda:klij", "eta+:k", "eta+:l", "gamma:j", s=2, kt="neither"),
        T(1, "da:kij", "eta+:k", "eta:j", s=1, kt="KT"),
        T(1, "da:kij", "gamma+:k", "gamma:j", s=1, kt="CE"),
    ],
    "gamma": [T(HALF, "da:ikl", "gamma:k", "gamma:l", s=1, kt="CE")],
    "eta": [
        T(-1, "dgamma:i", s=1, kt="CE"),
        T(-1, "da:ikl", "eta:k", "gamma:l", s=1, kt="CE"),
        T(-HALF, "dda:ijkl", "eta+:j", "gamma:k", "gamma:l", s=2, kt="neither"),
    ],
    "X+": [
        T(1, "deta:i", s=0, kt="KT"),
        T(1, "da:ikl", "X+:k", "gamma:l", s=1, kt="CE"),
        T(-1, "dda:ijkl", "eta+:j", "eta:k", "gamma:l", s=1, kt="neither"),
        T(HALF, "da:ikl", "eta:k", "eta:l", s=0, kt="KT"),
        T(-QUARTER, "ddda:ijpkl", "eta+:j", "eta+:p", "gamma:k", "gamma:l", s=2, kt="neither"),
        T(-HALF, "dda:ijkl", "gamma+:j", "gamma:k", "gamma:l", s=1, kt="neither"),
    ],
}

# Term origins as stated in words next to the total differential.
STATED_S_ORIGINS = {
    "X": [1], "eta+": [0, 0, 1], "gamma+": [1, 1, 2, 1, 1],
    "gamma": [1], "eta": [1, 1, 2], "X+": [0, 1, 1, 0, 2, 1],
}
STATED_KT_ORIGINS = {
    "X": ["CE"], "eta+": ["KT", "KT", "CE"],
    "gamma+": ["KT", "KT", "neither", "KT", "CE"],
    "gamma": ["CE"], "eta": ["CE", "CE", "neither"],
    "X+": ["KT", "CE", "neither", "KT", "neither", "neither"],
}

# The action, as printed (densities; the free letter i is summed too).
ACTION_TERMS = {
    0: [T(1, "eta:i", "dX:i"), T(HALF, "a:ij", "eta:i", "eta:j")],
    1: [T(1, "X+:i", "a:ij", "gamma:j"),
        T(-1, "eta+:i", "dgamma:i"),
        T(-1, "eta+:i", "da:ikl", "eta:k", "gamma:l"),
        T(-HALF, "gamma+:i", "da:ijk", "gamma:j", "gamma:k")],
    2: [T(-QUARTER, "eta+:i", "eta+:j", "dda:ijkl", "gamma:k", "gamma:l")],
}

# (S^0, g) and (S^1, g) as printed, with the three index/parenthesis typos
# already resolved (see the deviation notes).
S0_ACTION = {
    "X": [], "eta": [], "gamma": [], "gamma+": [],
    "X+": [T(1, "deta:i"), T(HALF, "da:ikl", "eta:k", "eta:l",
                             note="(S0, X+_i) ends in eta_j; read as eta_l")],
    "eta+": [T(-1, "dX:i"), T(-1, "a:ij", "eta:j")],
}
S1_ACTION = {
    "X": [T(1, "a:ij", "gamma:j")],
    "eta": [T(-1, "dgamma:i"),
            T(-1, "da:ijk", "eta:j", "gamma:k",
              note="(S1, eta_i) has a misplaced parenthesis; read as -(d gamma_i + d_i alpha^{jk} eta_j gamma_k)")],
    "gamma": [T(HALF, "da:ijk", "gamma:j", "gamma:k")],
    "X+": [T(1, "da:ikl", "X+:k", "gamma:l"),
           T(-1, "dda:ijkl", "eta+:j", "eta:k", "gamma:l"),
           T(-HALF, "dda:ijkl", "gamma+:j", "gamma:k", "gamma:l")],
    "eta+": [T(1, "eta+:k", "da:kij", "gamma:j", note=ETA_PLUS_SLIP, flip=True)],
    "gamma+": [T(-1, "a:ij", "X+:j", note="(S1, gamma+^i) writes alpha^{ij} X+_i; read as X+_j"),
               T(-1, "deta+:i"),
               T(1, "da:kij", "eta+:k", "eta:j"),
               T(1, "da:kij", "gamma+:k", "gamma:j")],
}

FAMILY_ORDER = ("X", "eta+", "gamma+", "gamma", "eta", "X+")
FORM_DEGREE = {"X": 0, "eta": 1, "gamma": 0, "X+": 2, "eta+": 1, "gamma+": 2}


def _evaluate_factor(P: "PSMComplex", tok: str, ix: tuple) -> Expr:
    if tok == "a":
        return P.a[ix]
    if tok == "da":
        return P.da[ix]
    if tok == "dda":
        return P.dda[ix]
    if tok == "ddda":
        return P.ddda[ix]
    gen = {"X": P.X, "eta": P.eta, "gamma": P.gamma, "X+": P.Xp,
           "eta+": P.etap, "gamma+": P.gammap}
    if tok in gen:
        return gen[tok](ix[0])
    if tok.startswith("d") and tok[1:] in gen:
        return d(gen[tok[1:]](ix[0]))
    raise KeyError(tok)


def evaluate_term(P: "PSMComplex", term: DisplayTerm, i: int | None) -> Expr:
    """The term with its printed sign, free index i, dummies summed."""
    letters = term.letters()
    if i is None and any("i" in ix for _, ix in term.factors):
        letters = ["i"] + letters
    out = Expr()
    for values in iproduct(P.idx, repeat=len(letters)):
        env = dict(zip(letters, values))
        if i is not None:
            env["i"] = i
        factors = [_evaluate_factor(P, tok, tuple(env[ch] for ch in ix)) for tok, ix in term.factors]
        p = prod(*factors)
        if p:
            out = out + p
    return out.scale(term.coeff)


def engine_sign(term: DisplayTerm, form_degree: int = 0) -> int:
    """Printed sign -> engine sign: product twist, the (-1)^deg relating the
    two derivation conventions, and any logged resolution."""
    s = term.twist() * (-1 if form_degree % 2 else 1)
    return -s if term.flip else s


# ---------------------------------------------------------------------------
# Action

@dataclass
class BVAction:
    S0: Expr
    S1: Expr
    S2: Expr

    @property
    def SBV(self) -> Expr:
        return self.S0 + self.S1 + self.S2

    def stage(self, name: str) -> Expr:
        stages = {"S0": self.S0, "S0+S1": self.S0 + self.S1, "SBV": self.SBV}
        if name not in stages:
            raise ValueError(f"unknown stage {name!r}; expected one of {sorted(stages)}")
        return stages[name]


def build_bv_action(P: "PSMComplex") -> BVAction:
    """S^0, S^1, S^2 from the printed densities, carried into the engine's
    sign convention term by term."""
    parts = []
    for n in (0, 1, 2):
        dens = Expr()
        for t in ACTION_TERMS[n]:
            dens = dens + evaluate_term(P, t, None).scale(engine_sign(t))
        parts.append(dens)
    return BVAction(*parts)


def antifield_number(P: "PSMComplex", f: Expr) -> set:
    anti = {P.Xpf.name, P.etapf.name, P.gammapf.name}
    out = set()
    for (odd, even), _ in f.terms():
        n = sum(1 for g in odd if g.name in anti) + sum(e for g, e in even if g.name in anti)
        out.add(n)
    return out


def action_report(P: "PSMComplex", act: BVAction | None = None) -> CheckReport:
    act = act or build_bv_action(P)
    rep = CheckReport()
    for n, dens in enumerate((act.S0, act.S1, act.S2)):
        bd = bidegrees(dens)
        ghosts = sorted({b.ghost for b in bd})
        forms = sorted({b.form for b in bd})
        nums = sorted(antifield_number(P, dens))
        ok = (not dens or (ghosts == [0] and forms == [2] and nums == [n])) and dens.parities() <= {0}
        detail = (f"S{n}: {len(dens)} terms, ghost {ghosts or '-'}, form {forms or '-'}, "
                  f"antifield number {nums or '-'}")
        rep.add(Check(f"action S{n} degrees", ok, "", detail))
    second = P.alpha.second_derivatives_vanish()
    rep.add(Check("S2 vanishes iff second derivatives of alpha vanish",
                  (not act.S2) == second, "", f"S2 {'= 0' if not act.S2 else '!= 0'}"))
    rep.deviate("S^0, S^1, S^2 all have ghost degree 0; the superscript counts antifields (0, 1, 2)")
    rep.deviate("printed action terms with an antifield eta+ ahead of a one-form carry the "
                "ghost/form product twist (-1)^{sum gh_a deg_b} in this engine")
    return rep


# ---------------------------------------------------------------------------
# Euler forms

def euler_forms(P: "PSMComplex") -> dict:
    """E_X and E_eta by the printed formulas (route a) and as functional
    derivatives of S^0 (route b)."""
    S0 = build_bv_action(P).S0
    out = {"a": {}, "b": {}}
    for i in P.idx:
        out["a"][("X", i)] = d(P.eta(i)) + HALF * P.sum(lambda j, k: prod(P.da[i, j, k], P.eta(j), P.eta(k)), 2)
        out["a"][("eta", i)] = -d(P.X(i)) - P.sum(lambda j: mul(P.a[i, j], P.eta(j)), 1)
        out["b"][("X", i)] = variational_derivative(S0, P.Xf, (i,))
        out["b"][("eta", i)] = variational_derivative(S0, P.etaf, (i,))
    return out


def _relative_sign(a: Expr, b: Expr):
    if a == b:
        return 1
    if a == -b:
        return -1
    return None


def euler_forms_report(P: "PSMComplex") -> CheckReport:
    ef = euler_forms(P)
    rep = CheckReport()
    for fam in ("X", "eta"):
        signs = {_relative_sign(ef["a"][(fam, i)], ef["b"][(fam, i)]) for i in P.idx}
        ok = len(signs) == 1 and None not in signs
        sign = signs.pop() if ok else None
        witness = ""
        if not ok:
            i = next(i for i in P.idx if _relative_sign(ef["a"][(fam, i)], ef["b"][(fam, i)]) is None)
            witness = f"printed {ef['a'][(fam, i)].render()} vs derived {ef['b'][(fam, i)].render()}"
        rep.add(Check(f"Euler form E_{fam}: printed vs derivative of S0", ok, witness,
                      f"global sign {sign:+d}" if ok else "no common sign"))
    # component reading of E_X: (D_mu eta_{i,nu} + 1/2 d_i alpha^{jk} eta_{j,mu} eta_{k,nu}) eps^{mu nu}
    ok = True
    for i in P.idx:
        e = P.etaf
        comp = (Expr.gen(e.gen(i, 2, n1=1)) - Expr.gen(e.gen(i, 1, n2=1))
                + HALF * P.sum(lambda j, k: prod(P.da[i, j, k], e(j, 1), e(k, 2)) - prod(P.da[i, j, k], e(j, 2), e(k, 1)), 2))
        if strip_top(ef["b"][("X", i)]) != comp:
            ok = False
    rep.add(Check("E_X component form", ok, "", "du1^du2 coefficient matches the eps^{mu nu} expression"
                  if ok else "du1^du2 coefficient differs"))
    rep.deviate("the functional derivative of S^0 in eta equals minus the printed E_eta "
                "(variation paired as rho ^ W); E_X agrees with sign +1")
    return rep


# ---------------------------------------------------------------------------
# Gauge symmetry and Noether identities

def gauge_symmetry(P: "PSMComplex") -> GaugeSymmetryFamily:
    """delta_beta X^i = alpha^{ij} beta_j,
    delta_beta eta_{i,mu} = -D_mu beta_i - d_i alpha^{jk} eta_{j,mu} beta_k."""
    entries: dict = {}
    for j in P.idx:
        rho = P.betaf.gen(j)
        row: dict = {}
        for i in P.idx:
            if P.a[i, j]:
                row[P.Xf.gen(i)] = TotalDifferentialOperator({(0, 0): P.a[i, j]})
            for mu in (1, 2):
                coeffs = {}
                if i == j:
                    coeffs[(1, 0) if mu == 1 else (0, 1)] = Expr.const(-1)
                z = -P.sum(lambda l: mul(P.da[i, l, j], P.etaf(l, mu)), 1)
                if z:
                    coeffs[(0, 0)] = z
                if coeffs:
                    row[P.etaf.gen(i, mu)] = TotalDifferentialOperator(coeffs)
        entries[rho] = row
    return GaugeSymmetryFamily(entries)


def noether_expressions(P: "PSMComplex") -> tuple:
    """(N^j du1^du2 from the adjoint, printed form-language combination) per j.

    The printed combination is
        alpha^{ij} E_{X^i} + d_i alpha^{kj} eta_k ^ E_{eta_i} - d E_{eta_j}
    with the printed E's."""
    S0 = build_bv_action(P).S0
    R = gauge_symmetry(P)
    N, _ = noether_from_gauge(R, S0)
    ef = euler_forms(P)["a"]
    adj, form = {}, {}
    for j in P.idx:
        adj[j] = N[P.betaf.gen(j)]
        form[j] = (P.sum(lambda i: mul(P.a[i, j], ef[("X", i)]), 1)
                   + P.sum(lambda i, k: prod(P.da[i, k, j], P.eta(k), ef[("eta", i)]), 2)
                   - d(ef[("eta", j)]))
    return adj, form


def require_jacobi(alpha: PoissonTensor):
    v = jacobi_check(alpha)
    if not v.ok:
        raise PreconditionError(f"alpha violates the Jacobi identity: {v.detail}")


def noether_identity_check(P: "PSMComplex") -> CheckReport:
    require_jacobi(P.alpha)
    rep = CheckReport()
    t0 = time.perf_counter()
    S0 = build_bv_action(P).S0
    sym = variational_symmetry_check(gauge_symmetry(P).vector_field(
        {P.betaf.gen(j): P.betaf(j) for j in P.idx}), S0)
    rep.add(Check("gauge symmetry is variational", sym.ok,
                  "" if sym.ok else sym.witness.render(), sym.detail or "pr(Q) S0 is a divergence",
                  time.perf_counter() - t0))
    t0 = time.perf_counter()
    adj, form = noether_expressions(P)
    bad = [j for j in P.idx if adj[j]]
    rep.add(Check("Noether identity from adjoint", not bad,
                  adj[bad[0]].render() if bad else "",
                  f"N^{bad[0]} != 0" if bad else f"N^j = 0 for j = 1..{P.k}", time.perf_counter() - t0))
    bad = [j for j in P.idx if form[j]]
    rep.add(Check("Noether identity in form language", not bad,
                  form[bad[0]].render() if bad else "",
                  f"combination {bad[0]} != 0" if bad else "printed combination vanishes"))
    bad = [j for j in P.idx if adj[j] != form[j]]
    rep.add(Check("adjoint and form-language identities agree", not bad,
                  "" if not bad else f"{adj[bad[0]].render()} vs {form[bad[0]].render()}",
                  "N^j du1^du2 equals the printed combination" if not bad else f"differ at j={bad[0]}"))
    return rep


# ---------------------------------------------------------------------------
# Derivation tables

def _table_field(images: dict, parity: int = 1):
    return component_field(images, parity)


def _zero_table(P: "PSMComplex") -> dict:
    return {(fam, (i,)): Expr() for fam in P.families() for i in P.idx}


def kt_table(P: "PSMComplex") -> dict:
    """d_KT: antifields to Euler forms (as derivatives of S^0), antighosts to
    the ghost-degree -1 cocycle, zero on fields and ghosts."""
    ef = euler_forms(P)["b"]
    table = _zero_table(P)
    for i in P.idx:
        table[(P.Xpf, (i,))] = ef[("X", i)]
        table[(P.etapf, (i,))] = ef[("eta", i)]
        table[(P.gammapf, (i,))] = kt_cocycle(P, i)
    return table


def kt_cocycle(P: "PSMComplex", i: int) -> Expr:
    """-alpha^{ij} X+_j - d_k alpha^{ij} eta_j ^ eta+^k - d eta+^i."""
    return (-P.sum(lambda j: mul(P.a[i, j], P.Xp(j)), 1)
            - P.sum(lambda k, j: prod(P.da[k, i, j], P.eta(j), P.etap(k)), 2)
            - d(P.etap(i)))


def noether_layout_cocycle(P: "PSMComplex", j: int) -> Expr:
    """The Noether identity with E_X, E_eta replaced by X+, eta+:
    alpha^{ij} X+_i + d_i alpha^{kj} eta_k ^ eta+^i - d eta+^j."""
    return (P.sum(lambda i: mul(P.a[i, j], P.Xp(i)), 1)
            + P.sum(lambda i, k: prod(P.da[i, k, j], P.eta(k), P.etap(i)), 2)
            - d(P.etap(j)))


def _square_failures(P, table, fams=None):
    Q = _table_field(table)
    fails = []
    for fam in (fams or P.families()):
        for i in P.idx:
            dd = apply_derivation(Q, table[(fam, (i,))])
            if dd:
                fails.append((fam, i, dd))
    return fails


def _ghost_shift_ok(P, table) -> list:
    bad = []
    for (fam, (i,)), img in table.items():
        want = {(fam.form, fam.ghost + 1)}
        got = {(b.form, b.ghost) for b in bidegrees(img)}
        if img and got != want:
            bad.append(f"{fam.name}[{i}]")
    return bad


def kt_differential(P: "PSMComplex") -> tuple:
    require_jacobi(P.alpha)
    rep = CheckReport()
    table = kt_table(P)
    t0 = time.perf_counter()
    fails = _square_failures(P, table)
    rep.add(Check("d_KT^2 = 0", not fails,
                  f"d_KT^2({fails[0][0].name}[{fails[0][1]}]) = {fails[0][2].render()}" if fails else "",
                  "on all generators" if not fails else "fails on " + ", ".join(f"{f.name}[{i}]" for f, i, _ in fails),
                  time.perf_counter() - t0))
    Q = _table_field(table)
    for label, fn in (("printed cocycle", kt_cocycle), ("Noether-layout cocycle", noether_layout_cocycle)):
        bad = [(i, apply_derivation(Q, fn(P, i))) for i in P.idx]
        bad = [(i, e) for i, e in bad if e]
        rep.add(Check(f"d_KT closes the {label}", not bad, bad[0][1].render() if bad else "",
                      "d_KT(c^i) = 0 exactly" if not bad else f"d_KT(c^{bad[0][0]}) != 0"))
    same = all(kt_cocycle(P, i) == noether_layout_cocycle(P, i) for i in P.idx)
    rep.add(Check("cocycle layouts coincide", same, "",
                  "printed cocycle equals the Noether layout with sign +1" if same else "layouts differ"))
    bad = _ghost_shift_ok(P, table)
    rep.add(Check("d_KT raises ghost degree by 1", not bad, ", ".join(bad), "form degree kept, ghost +1"))
    rep.deviate("d_KT eta+ is the functional derivative of S^0, i.e. minus the printed E_eta; "
                "with that convention the printed cocycle is closed as written")
    return table, rep


def ce_table(P: "PSMComplex") -> dict:
    """delta on all six families, carried into the engine convention."""
    table = _zero_table(P)
    for name, terms in CE_DISPLAYS.items():
        fam = P.family(name)
        for i in P.idx:
            table[(fam, (i,))] = sum((evaluate_term(P, t, i).scale(engine_sign(t, FORM_DEGREE[name]))
                                      for t in terms), Expr())
    return table


CE_DISPLAYS = {
    "X": [T(1, "a:ij", "gamma:j")],
    "eta": [T(-1, "dgamma:i"), T(-1, "da:ijk", "eta:j", "gamma:k")],
    "gamma": [T(HALF, "da:ijk", "gamma:j", "gamma:k")],
    "X+": [T(1, "da:ikj", "X+:k", "gamma:j")],
    "eta+": [T(1, "da:kij", "eta+:k", "gamma:j", note=ETA_PLUS_SLIP, flip=True)],
    "gamma+": [T(1, "da:kij", "gamma+:k", "gamma:j")],
}


def ce_delta(P: "PSMComplex") -> tuple:
    rep = CheckReport()
    table = ce_table(P)
    jac = jacobi_check(P.alpha)
    fails = _square_failures(P, table, [P.gammaf])
    note = "Jacobi holds" if jac.ok else "Jacobi fails"
    rep.add(Check("delta^2 gamma = 0", not fails, fails[0][2].render() if fails else "",
                  note if not fails else f"{note}; fails at gamma[{fails[0][1]}]"))
    every = _square_failures(P, table)
    names = ", ".join(f"{f.name}[{i}]" for f, i, _ in every) or "none"
    rep.add(Check("delta^2 survey", True, every[0][2].render() if every else "",
                  f"delta^2 != 0 on: {names}"))
    bad = _ghost_shift_ok(P, table)
    rep.add(Check("delta raises ghost degree by 1", not bad, ", ".join(bad), "form degree kept, ghost +1"))
    rep.deviate(ETA_PLUS_SLIP)
    return table, rep


# ---------------------------------------------------------------------------
# Master equation, nilpotency, and the total differential

def master_report(P: "PSMComplex", stage: str = "SBV") -> CheckReport:
    S = build_bv_action(P).stage(stage)
    rep = CheckReport()
    rep.add(master_equation_check(P.model, S, f"master equation ({stage})"))
    return rep


def differential_report(P: "PSMComplex", stage: str = "SBV") -> CheckReport:
    S = build_bv_action(P).stage(stage)
    rep = CheckReport()
    rep.add(differential_nilpotency_check(P.model, S, f"D^2 = 0 ({stage})"))
    images = bracket_derivation(P.model, S)
    bad = _ghost_shift_ok(P, images)
    rep.add(Check(f"D raises ghost degree by 1 ({stage})", not bad, ", ".join(bad), "form degree kept, ghost +1"))
    return rep


def _dh_equal(a: Expr, b: Expr) -> bool:
    """Equality up to a d_H-exact top form; lower degrees compare exactly."""
    diff = a - b
    if not diff:
        return True
    if {bd.form for bd in bidegrees(diff)} != {2}:
        return False
    return is_total_divergence(diff).ok


def _contained(part: Expr, whole: Expr) -> bool:
    wt = dict(whole.terms())
    return all(wt.get(k) == c for k, c in part.terms())


def _origin_of(piece: Expr, candidates: dict):
    if not piece:
        return None
    hits = [name for name, img in candidates.items() if _contained(piece, img)]
    return hits[0] if len(hits) == 1 else ("ambiguous" if hits else "none")


def _match_family(P, name, terms, target_by_i, modulo_dh: bool):
    """Compare printed terms (engine signs applied) with target images."""
    fam = P.family(name)
    deg = FORM_DEGREE[name]
    per_i = {}
    for i in P.idx:
        pieces = [evaluate_term(P, t, i).scale(engine_sign(t, deg)) for t in terms]
        total = sum(pieces, Expr())
        per_i[i] = (pieces, total, target_by_i[(fam, (i,))])
    exact = all(total == tgt for _, total, tgt in per_i.values())
    return per_i, exact


def staged_action_report(P: "PSMComplex") -> CheckReport:
    """(S^0, g) and (S^1, g) against their printed tables."""
    act = build_bv_action(P)
    rep = CheckReport()
    for label, S, table in (("S0", act.S0, S0_ACTION), ("S1", act.S1, S1_ACTION)):
        images = bracket_derivation(P.model, S)
        for name in FAMILY_ORDER:
            terms = table[name]
            per_i, exact = _match_family(P, name, terms, images, False)
            witness = ""
            if not exact:
                i = next(i for i, (_, tot, tgt) in per_i.items() if tot != tgt)
                witness = f"printed {per_i[i][1].render()} vs engine {per_i[i][2].render()}"
            n_flip = sum(t.flip for t in terms)
            rep.add(Check(f"({label}, {name})", exact, witness,
                          f"{len(terms)} printed terms" + (f", {n_flip} sign resolved" if n_flip else "")))
            for t in terms:
                if t.note:
                    rep.deviate(t.note)
    rep.deviate("the antifield images follow (S, phi+) = (-1)^{gh phi} dS/dphi; the printed rule has "
                "(-1)^{gh phi + deg phi}, which differs for eta")
    return rep


def total_differential_report(P: "PSMComplex", allow_failed_master: bool = False) -> CheckReport:
    """D(g) = (S_BV, g) against the printed total differential, with origins."""
    rep = CheckReport()
    act = build_bv_action(P)
    me = master_equation_check(P.model, act.SBV, "master equation (SBV)")
    if not me.passed and not allow_failed_master:
        raise PreconditionError("the master equation fails for S_BV; " + me.detail)
    full = bracket_derivation(P.model, act.SBV)
    by_stage = {n: bracket_derivation(P.model, S) for n, S in enumerate((act.S0, act.S1, act.S2))}
    kt, ce = kt_table(P), ce_table(P)
    for name in FAMILY_ORDER:
        t0 = time.perf_counter()
        fam = P.family(name)
        terms = TOTAL_DIFFERENTIAL[name]
        per_i, exact = _match_family(P, name, terms, full, False)
        how = "exact"
        if not exact and all(_dh_equal(tot, tgt) for _, tot, tgt in per_i.values()):
            how = "modulo d_H"
        s_ok, kt_ok = True, True
        rows = []
        for n, t in enumerate(terms):
            s_found, k_found = set(), set()
            for i in P.idx:
                piece = per_i[i][0][n]
                so = _origin_of(piece, {m: by_stage[m][(fam, (i,))] for m in by_stage})
                ko = _origin_of(piece, {"KT": kt[(fam, (i,))], "CE": ce[(fam, (i,))]})
                if so is not None:
                    s_found.add(so)
                if piece:
                    k_found.add(ko if ko in ("KT", "CE") else "neither")
            s_claim = STATED_S_ORIGINS[name][n]
            k_claim = STATED_KT_ORIGINS[name][n]
            s_val = s_found.pop() if len(s_found) == 1 else (None if not s_found else "mixed")
            k_val = k_found.pop() if len(k_found) == 1 else (None if not k_found else "mixed")
            if s_val is not None and s_val != s_claim:
                s_ok = False
            if k_val is not None and k_val != k_claim:
                kt_ok = False
            rows.append({
                "generator": name, "term": n + 1, "printed": t.render(),
                "engine_sign": f"{engine_sign(t, FORM_DEGREE[name]):+d}",
                "S_origin": "-" if s_val is None else f"S{s_val}" if isinstance(s_val, int) else s_val,
                "S_stated": f"S{s_claim}",
                "KT_CE_origin": "-" if k_val is None else k_val, "KT_CE_stated": k_claim,
            })
            if t.note:
                rep.deviate(t.note)
        witness = ""
        if not exact:
            i = next(i for i, (_, tot, tgt) in per_i.items() if tot != tgt)
            witness = f"printed {per_i[i][1].render()} vs engine {per_i[i][2].render()}"
        dt = time.perf_counter() - t0
        rep.add(Check(f"total differential on {name}", exact or how == "modulo d_H", witness,
                      f"{len(terms)} terms, {how}" if exact or how != "exact" else "mismatch", dt, rows))
        rep.add(Check(f"S-origins on {name}", s_ok, "",
                      "stated " + ",".join(str(c) for c in STATED_S_ORIGINS[name])
                      + "; found " + ",".join(r["S_origin"].lstrip("S") for r in rows)))
        rep.add(Check(f"KT/CE origins on {name}", kt_ok, "",
                      "stated " + ",".join(STATED_KT_ORIGINS[name])
                      + "; found " + ",".join(r["KT_CE_origin"] for r in rows)))
    rep.deviate("printed total-differential terms are compared after the ghost/form product twist "
                "and the (-1)^deg factor relating the ghost-graded and total-parity derivation conventions")
    rep.deviate("the sentence on X+ speaks of five terms but lists six origins (0,1,1,0,2,1); six printed terms are used")
    rep.deviate("a dash marks a term that vanishes for this alpha, so its origin cannot be observed")
    return rep
