"""
Bigraded commutative algebra over jet coordinates.

Elements are finite sums of monomials with exact rational coefficients.
Generators are the base one-forms du1, du2 and scalar jet coordinates
(field components together with a multi-index of total derivatives).
Commutation signs follow the total degree: parity = (form + ghost) mod 2.

Top-form objects such as the antifield X+ are stored "bundled": the
generator stands for the scalar component times du1^du2 and carries
form degree 2, so a monomial with more than two units of form degree
vanishes.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple

__all__ = [
    "BiDegree", "Field", "Gen", "Expr", "Poly", "UnmappedSymbolError",
    "du", "DU1", "DU2", "mul", "left_partial", "substitute", "bidegrees",
    "interior", "to_fraction",
]

MAX_FORM = 2


def to_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"exact rational expected, got {type(c).__name__}")


class BiDegree(NamedTuple):
    form: int
    ghost: int

    @property
    def parity(self) -> int:
        return (self.form + self.ghost) % 2


class Gen(NamedTuple):
    """A generator: base form du^mu (rank -1) or a jet coordinate.

    Tuple order (rank, name, idx, n1, n2) is the canonical generator order.
    """
    rank: int
    name: str
    idx: tuple
    n1: int = 0
    n2: int = 0
    ghost: int = 0
    form: int = 0

    @property
    def parity(self) -> int:
        return (self.form + self.ghost) % 2

    @property
    def bidegree(self) -> BiDegree:
        return BiDegree(self.form, self.ghost)

    @property
    def is_base_form(self) -> bool:
        return self.rank < 0

    @property
    def order(self) -> int:
        return self.n1 + self.n2

    def base(self) -> "Gen":
        """The underived coordinate of the same component."""
        return self._replace(n1=0, n2=0)

    def same_component(self, other: "Gen") -> bool:
        return self.rank == other.rank and self.name == other.name and self.idx == other.idx

    def shifted(self, mu: int, times: int = 1) -> "Gen":
        if mu == 1:
            return self._replace(n1=self.n1 + times)
        if mu == 2:
            return self._replace(n2=self.n2 + times)
        raise ValueError(f"base direction must be 1 or 2, got {mu}")

    def render(self) -> str:
        if self.is_base_form:
            return f"du{self.idx[0]}"
        s = self.name
        if self.idx:
            s += "[" + ",".join(str(i) for i in self.idx) + "]"
        if self.n1 or self.n2:
            s += "_{(%d,%d)}" % (self.n1, self.n2)
        return s


def du(mu: int) -> Gen:
    if mu not in (1, 2):
        raise ValueError(f"base direction must be 1 or 2, got {mu}")
    return Gen(-1, "du", (mu,), 0, 0, 0, 1)


DU1 = du(1)
DU2 = du(2)


@dataclass(frozen=True)
class Field:
    """Declaration of a component family (ComponentDecl).

    `form` is the form degree of the geometric object. Form-1 objects get
    an extra trailing base index mu in their components; form-2 objects are
    bundled with du1^du2.
    """
    name: str
    rank: int
    ghost: int = 0
    form: int = 0
    shape: tuple = ()
    conjugate: str | None = None

    @property
    def gen_form(self) -> int:
        return 2 if self.form == 2 else 0

    def component_indices(self) -> list[tuple]:
        ranges = [range(1, n + 1) for n in self.shape]
        if self.form == 1:
            ranges.append(range(1, 3))
        out = [()]
        for r in ranges:
            out = [t + (i,) for t in out for i in r]
        return out

    def gen(self, *idx, n1: int = 0, n2: int = 0) -> Gen:
        idx = tuple(idx)
        expected = len(self.shape) + (1 if self.form == 1 else 0)
        if len(idx) != expected:
            raise ValueError(f"{self.name} takes {expected} indices, got {idx}")
        return Gen(self.rank, self.name, idx, n1, n2, self.ghost, self.gen_form)

    def __call__(self, *idx, n1: int = 0, n2: int = 0) -> "Expr":
        return Expr.gen(self.gen(*idx, n1=n1, n2=n2))


# -- monomials ---------------------------------------------------------------
#
# A monomial key is (odd, even): `odd` is a strictly increasing tuple of odd
# generators, `even` a sorted tuple of (generator, exponent) pairs. Even
# generators commute with everything, so all signs come from `odd`.

def _form_of(odd, even) -> int:
    return sum(g.form for g in odd) + sum(g.form * e for g, e in even)


def _sort_odd(seq: Iterable[Gen]):
    """Sort odd generators; return (sign, tuple) or None if one repeats."""
    lst = list(seq)
    sign = 1
    # insertion sort; the lists are short
    for i in range(1, len(lst)):
        j = i
        while j > 0 and lst[j - 1] > lst[j]:
            lst[j - 1], lst[j] = lst[j], lst[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(lst, lst[1:]):
        if a == b:
            return None
    return sign, tuple(lst)


def _merge_odd(a: tuple, b: tuple):
    if not a:
        return 1, b
    if not b:
        return 1, a
    inversions = 0
    for g in b:
        inversions += len(a) - bisect_right(a, g)
    merged = sorted(a + b)
    for x, y in zip(merged, merged[1:]):
        if x == y:
            return None
    return (-1 if inversions % 2 else 1), tuple(merged)


def _merge_even(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for g, e in b:
        d[g] = d.get(g, 0) + e
    return tuple(sorted(d.items()))


def _mono_mul(ka, kb):
    r = _merge_odd(ka[0], kb[0])
    if r is None:
        return None
    sign, odd = r
    even = _merge_even(ka[1], kb[1])
    if _form_of(odd, even) > MAX_FORM:
        return None
    return sign, (odd, even)


def _key_from_factors(factors: Iterable[Gen]):
    """Canonical key of an ordered product of generators, with its sign."""
    odd, even = [], {}
    for g in factors:
        if g.parity:
            odd.append(g)
        else:
            even[g] = even.get(g, 0) + 1
    r = _sort_odd(odd)
    if r is None:
        return None
    sign, odd_t = r
    even_t = tuple(sorted(even.items()))
    if _form_of(odd_t, even_t) > MAX_FORM:
        return None
    return sign, (odd_t, even_t)


def _key_gens(key):
    odd, even = key
    return [g for g in odd] + [g for g, _ in even]


class Expr:
    """Canonical sum of monomials; immutable by convention."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping | None = None):
        # callers pass canonical keys with nonzero Fraction coefficients
        self._terms = dict(terms) if terms else {}
        self._hash = None

    # construction
    @classmethod
    def zero(cls) -> "Expr":
        return cls()

    @classmethod
    def const(cls, c) -> "Expr":
        c = to_fraction(c)
        return cls({((), ()): c}) if c else cls()

    @classmethod
    def one(cls) -> "Expr":
        return cls.const(1)

    @classmethod
    def gen(cls, g: Gen) -> "Expr":
        key = ((g,), ()) if g.parity else ((), ((g, 1),))
        if _form_of(*key) > MAX_FORM:
            return cls()
        return cls({key: Fraction(1)})

    @classmethod
    def product(cls, factors: Iterable[Gen], coeff=1) -> "Expr":
        """Normalize an ordered product of generators."""
        coeff = to_fraction(coeff)
        r = _key_from_factors(factors)
        if r is None or not coeff:
            return cls()
        sign, key = r
        return cls({key: sign * coeff})

    @classmethod
    def from_terms(cls, pairs: Iterable) -> "Expr":
        """Sum (key, coeff) pairs, dropping zeros."""
        acc: dict = {}
        for k, c in pairs:
            if c:
                acc[k] = acc.get(k, 0) + c
        return cls({k: c for k, c in acc.items() if c})

    # access
    def terms(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(sorted(self._terms.items(), key=lambda kc: _sort_key(kc[0])))

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def constant_term(self) -> Fraction:
        return self._terms.get(((), ()), Fraction(0))

    def generators(self) -> set:
        out = set()
        for key in self._terms:
            out.update(_key_gens(key))
        return out

    def components(self) -> list[Gen]:
        """Underived jet coordinates whose jets occur, in canonical order."""
        return sorted({g.base() for g in self.generators() if not g.is_base_form})

    def parities(self) -> set:
        return {b.parity for b in bidegrees(self)}

    def parity(self) -> int:
        ps = self.parities()
        if len(ps) > 1:
            raise ValueError("expression is not parity-homogeneous")
        return ps.pop() if ps else 0

    def split_parity(self) -> dict:
        out: dict = {}
        for k, c in self._terms.items():
            p = _key_bidegree(k).parity
            out.setdefault(p, {})[k] = c
        return {p: Expr(t) for p, t in out.items()}

    # arithmetic
    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not other._terms:
            return self
        if not self._terms:
            return other
        acc = dict(self._terms)
        for k, c in other._terms.items():
            v = acc.get(k, 0) + c
            if v:
                acc[k] = v
            else:
                acc.pop(k, None)
        return Expr(acc)

    __radd__ = __add__

    def __neg__(self):
        return Expr({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "Expr":
        c = to_fraction(c)
        if not c:
            return Expr()
        return Expr({k: v * c for k, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if not isinstance(other, Expr):
            return NotImplemented
        return mul(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def map_keys(self, fn) -> "Expr":
        """Apply fn(key, coeff) -> Expr to each monomial and sum."""
        out = Expr()
        for k, c in self._terms.items():
            out = out + fn(k, c)
        return out

    # rendering
    def render(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for i, (key, c) in enumerate(self):
            sign = "-" if c < 0 else "+"
            a = abs(c)
            body = f"{a.numerator}/{a.denominator}"
            gens = []
            for g in _ordered_factors(key):
                gens.append(g.render())
            factors = []
            for g, e in _group(gens):
                factors.append(g if e == 1 else f"{g}^{e}")
            if factors:
                body += "*" + "*".join(factors)
            if i == 0:
                parts.append(body if sign == "+" else "-" + body)
            else:
                parts.append(f" {sign} {body}")
        return "".join(parts)

    def __str__(self):
        return self.render()

    def __repr__(self):
        return f"Expr({self.render()!r})"


def _coerce(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Expr.const(x)
    return NotImplemented


def _ordered_factors(key) -> list[Gen]:
    """Factors in canonical generator order (odd ones keep their relative order)."""
    odd, even = key
    out = list(odd)
    for g, e in even:
        out.extend([g] * e)
    return sorted(out)


def _group(items):
    out = []
    for x in items:
        if out and out[-1][0] == x:
            out[-1][1] += 1
        else:
            out.append([x, 1])
    return out


def _sort_key(key):
    return (_form_of(*key), sum(e for _, e in key[1]) + len(key[0]), _ordered_factors(key))


def _key_bidegree(key) -> BiDegree:
    odd, even = key
    f = sum(g.form for g in odd) + sum(g.form * e for g, e in even)
    h = sum(g.ghost for g in odd) + sum(g.ghost * e for g, e in even)
    return BiDegree(f, h)


# -- operations ----------------------------------------------------------------

def mul(a: Expr, b: Expr) -> Expr:
    if not a._terms or not b._terms:
        return Expr()
    acc: dict = {}
    for ka, ca in a._terms.items():
        for kb, cb in b._terms.items():
            r = _mono_mul(ka, kb)
            if r is None:
                continue
            sign, k = r
            v = acc.get(k, 0) + sign * ca * cb
            if v:
                acc[k] = v
            else:
                acc.pop(k, None)
    return Expr(acc)


def prod(*factors: Expr) -> Expr:
    out = Expr.one()
    for f in factors:
        out = mul(out, f)
    return out


def left_partial(f: Expr, g: Gen) -> Expr:
    """Graded left derivative by the generator g."""
    acc: dict = {}
    if g.parity:
        for (odd, even), c in f._terms.items():
            try:
                p = odd.index(g)
            except ValueError:
                continue
            sign = -1 if p % 2 else 1
            k = (odd[:p] + odd[p + 1:], even)
            acc[k] = acc.get(k, 0) + sign * c
    else:
        for (odd, even), c in f._terms.items():
            for p, (h, e) in enumerate(even):
                if h == g:
                    rest = even[:p] + (((h, e - 1),) if e > 1 else ()) + even[p + 1:]
                    k = (odd, rest)
                    acc[k] = acc.get(k, 0) + e * c
                    break
    return Expr({k: c for k, c in acc.items() if c})


def bidegrees(f: Expr) -> set:
    return {_key_bidegree(k) for k in f._terms}


def interior(f: Expr, mu: int) -> Expr:
    """Contraction with d/du^mu, an odd derivation with du^nu -> delta."""
    g = du(mu)
    for key in f._terms:
        if any(h.form == 2 for h in _key_gens(key)):
            raise ValueError("cannot contract a bundled top-form generator")
    return left_partial(f, g)


# -- abstract polynomials in x1..xk ------------------------------------------

class UnmappedSymbolError(KeyError):
    def __init__(self, symbol: str):
        super().__init__(symbol)
        self.symbol = symbol

    def __str__(self):
        return f"no substitution given for symbol {self.symbol!r}"


class Poly:
    """Polynomial with rational coefficients in named commuting symbols.

    Kept apart from Expr on purpose: target-space coordinates x^i only enter
    the jet algebra through `substitute`.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping | None = None):
        self._terms = {k: to_fraction(c) for k, c in (terms or {}).items() if c}

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): c})

    @classmethod
    def var(cls, name: str) -> "Poly":
        return cls({((name, 1),): 1})

    def terms(self):
        return self._terms.items()

    def symbols(self) -> set:
        return {s for k in self._terms for s, _ in k}

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        return max((sum(e for _, e in k) for k in self._terms), default=0)

    def __add__(self, other):
        other = _pcoerce(other)
        acc = dict(self._terms)
        for k, c in other._terms.items():
            acc[k] = acc.get(k, 0) + c
        return Poly(acc)

    __radd__ = __add__

    def __neg__(self):
        return Poly({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-_pcoerce(other))

    def __rsub__(self, other):
        return _pcoerce(other) - self

    def __mul__(self, other):
        other = _pcoerce(other)
        acc: dict = {}
        for ka, ca in self._terms.items():
            for kb, cb in other._terms.items():
                d = dict(ka)
                for s, e in kb:
                    d[s] = d.get(s, 0) + e
                k = tuple(sorted(d.items()))
                acc[k] = acc.get(k, 0) + ca * cb
        return Poly(acc)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        out = Poly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def diff(self, symbol: str) -> "Poly":
        acc: dict = {}
        for k, c in self._terms.items():
            d = dict(k)
            e = d.get(symbol, 0)
            if not e:
                continue
            if e == 1:
                del d[symbol]
            else:
                d[symbol] = e - 1
            nk = tuple(sorted(d.items()))
            acc[nk] = acc.get(nk, 0) + c * e
        return Poly(acc)

    def __eq__(self, other):
        other = _pcoerce(other)
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def render(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for i, (k, c) in enumerate(sorted(self._terms.items(), key=lambda kc: (-sum(e for _, e in kc[0]), kc[0]))):
            a = abs(c)
            coef = str(a.numerator) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"
            mono = "*".join(s if e == 1 else f"{s}^{e}" for s, e in k)
            if mono:
                body = mono if a == 1 else f"{coef}*{mono}"
            else:
                body = coef
            if i == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append((" - " if c < 0 else " + ") + body)
        return "".join(parts)

    def __repr__(self):
        return f"Poly({self.render()!r})"


def _pcoerce(x) -> Poly:
    if isinstance(x, Poly):
        return x
    if isinstance(x, (int, Fraction)):
        return Poly.const(x)
    raise TypeError(f"cannot combine Poly with {type(x).__name__}")


def substitute(f: Poly, mapping: Mapping[str, Expr]) -> Expr:
    """Replace each symbol of f by an Expr and normalize."""
    for s in sorted(f.symbols()):
        if s not in mapping:
            raise UnmappedSymbolError(s)
    out = Expr()
    powers: dict = {}
    for k, c in f.terms():
        term = Expr.const(c)
        for s, e in k:
            key = (s, e)
            if key not in powers:
                p = Expr.one()
                for _ in range(e):
                    p = mul(p, mapping[s])
                powers[key] = p
            term = mul(term, powers[key])
        out = out + term
    return out
