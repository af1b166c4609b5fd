"""
Plain-text model files describing a Poisson tensor.

    # comment
    name = F3
    description = quadratic
    dim = 2
    alpha 1 2 = x1*x2

Polynomials use x1..xk, integer or rational literals, + - * ^ and
parentheses. Every diagnostic carries a line and column.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .algebra import Poly
from .psm import PoissonTensor


class ModelError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0, source: str = ""):
        self.message = message
        self.line = line
        self.col = col
        self.source = source
        super().__init__(str(self))

    def __str__(self):
        where = f"{self.source}:" if self.source else ""
        if self.line:
            where += f"{self.line}:{self.col}: "
        return f"{where}{self.message}"


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<var>x\d+)|(?P<op>[-+*/^()]))")


def _tokenize(text: str, line: int, col0: int) -> list:
    toks, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            bad = len(text) - len(text[pos:].lstrip())
            raise ModelError(f"unexpected character {text[bad]!r}", line, col0 + bad)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), col0 + start))
        pos = m.end()
    toks.append(_Tok("end", "", col0 + len(text.rstrip())))
    return toks


class _PolyParser:
    """expr := term (('+'|'-') term)*; term := unary (('*'|'/') unary)*;
    unary := ('+'|'-') unary | power; power := atom ('^' int)?;
    atom := int | x<n> | '(' expr ')'. Division is by nonzero constants only."""

    def __init__(self, text: str, line: int, col0: int, k: int):
        self.toks = _tokenize(text, line, col0)
        self.i = 0
        self.line = line
        self.k = k

    def error(self, msg: str, tok=None):
        tok = tok or self.toks[self.i]
        raise ModelError(msg, self.line, tok.col)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def parse(self) -> Poly:
        if self.peek().kind == "end":
            self.error("empty polynomial")
        p = self.expr()
        if self.peek().kind != "end":
            self.error(f"unexpected {self.peek().text!r}")
        return p

    def expr(self) -> Poly:
        p = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.take().text
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Poly:
        p = self.unary()
        while self.peek().kind == "op" and self.peek().text in ("*", "/"):
            op = self.take()
            q = self.unary()
            if op.text == "*":
                p = p * q
            else:
                if q.degree() > 0:
                    self.error("division by a non-constant", op)
                c = dict(q.terms()).get((), Fraction(0))
                if c == 0:
                    self.error("division by zero", op)
                p = p * Poly.const(1 / Fraction(c))
        return p

    def unary(self) -> Poly:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("+", "-"):
            self.take()
            p = self.unary()
            return -p if tok.text == "-" else p
        return self.power()

    def power(self) -> Poly:
        p = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            tok = self.take()
            if tok.kind != "num":
                self.error("exponent must be a non-negative integer literal", tok)
            p = p ** int(tok.text)
        return p

    def atom(self) -> Poly:
        tok = self.take()
        if tok.kind == "num":
            return Poly.const(int(tok.text))
        if tok.kind == "var":
            n = int(tok.text[1:])
            if not 1 <= n <= self.k:
                self.error(f"variable {tok.text} out of range x1..x{self.k}", tok)
            return Poly.var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            p = self.expr()
            close = self.take()
            if close.text != ")":
                self.error("expected ')'", close)
            return p
        if tok.kind == "end":
            self.error("unexpected end of polynomial", tok)
        self.error(f"unexpected {tok.text!r}", tok)


def parse_polynomial(text: str, k: int, line: int = 1, col: int = 1) -> Poly:
    return _PolyParser(text, line, col, k).parse()


_ALPHA = re.compile(r"alpha\s+(\d+)\s+(\d+)\s*=")
_KEY = re.compile(r"(name|description|dim)\s*=")


def parse_model_text(text: str, source: str = "") -> PoissonTensor:
    meta = {"name": "", "description": ""}
    dim = None
    dim_line = 0
    raw_entries = []
    try:
        for n, raw in enumerate(text.split("\n"), start=1):
            line = raw[:-1] if raw.endswith("\r") else raw
            if "\r" in line:
                raise ModelError("stray carriage return", n, line.index("\r") + 1)
            body = line.split("#", 1)[0]
            stripped = body.strip()
            if not stripped:
                continue
            lead = len(body) - len(body.lstrip())
            m = _ALPHA.match(body, lead)
            if m:
                raw_entries.append((n, m, body))
                continue
            m = _KEY.match(body, lead)
            if not m:
                raise ModelError("expected 'dim = k', 'alpha i j = <poly>', 'name = ...' or 'description = ...'",
                                 n, lead + 1)
            key, value = m.group(1), body[m.end():].strip()
            if key == "dim":
                if dim is not None:
                    raise ModelError(f"dim given twice (first on line {dim_line})", n, lead + 1)
                if not re.fullmatch(r"\d+", value) or int(value) < 1:
                    raise ModelError("dim must be a positive integer", n, m.end() + 1)
                dim, dim_line = int(value), n
            else:
                meta[key] = value
        if dim is None:
            raise ModelError("missing 'dim = k'", 1, 1)
        entries = {}
        seen = {}
        for n, m, body in raw_entries:
            i, j = int(m.group(1)), int(m.group(2))
            for v, g in ((i, 1), (j, 2)):
                if not 1 <= v <= dim:
                    raise ModelError(f"index {v} out of range 1..{dim}", n, m.start(g) + 1)
            if i >= j:
                raise ModelError(f"entries are given as alpha i j with i < j, got ({i},{j})", n, m.start(1) + 1)
            if (i, j) in seen:
                raise ModelError(f"alpha {i} {j} given twice (first on line {seen[(i, j)]})", n, m.start(1) + 1)
            seen[(i, j)] = n
            entries[(i, j)] = parse_polynomial(body[m.end():], dim, n, m.end() + 1)
        return PoissonTensor(dim, entries, meta["name"], meta["description"])
    except ModelError as e:
        e.source = source
        raise


def parse_model(path) -> PoissonTensor:
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as e:
        raise ModelError(f"not valid UTF-8 ({e.reason})", source=str(path)) from None
    except OSError as e:
        raise ModelError(f"cannot read model file: {e.strerror}", source=str(path)) from None
    tensor = parse_model_text(text, str(path))
    if not tensor.name:
        tensor.name = path.stem
    return tensor


def render_model(tensor: PoissonTensor) -> str:
    lines = []
    if tensor.name:
        lines.append(f"name = {tensor.name}")
    if tensor.description:
        lines.append(f"description = {tensor.description}")
    lines.append(f"dim = {tensor.k}")
    for (i, j), p in tensor.upper():
        lines.append(f"alpha {i} {j} = {p.render()}")
    return "\n".join(lines) + "\n"
