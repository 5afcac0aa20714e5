"""Exact symbolic expressions over the rational-function field.

Expressions are sympy objects built from rational numbers, symbols, the four
arithmetic operations, integer powers, and the function atoms sin, cos, exp,
sqrt, ln.  Floats never enter this layer.

The canonical form of an expression is a single fraction p/q with p and q
expanded polynomials over the integers in the atoms that occur (symbols and
whole function applications), with common factors cancelled and function
arguments themselves canonical.  ``canonicalize(a) == canonicalize(b)`` exactly
when a - b vanishes identically over the rational-function field.  Function
atoms are opaque: no trig or exp identities are applied, so sin(x)^2 +
cos(x)^2 - 1 is *not* zero here, by design.  ``render`` writes the canonical
form back out in a fixed deterministic order and round-trips through
``parse_expr``.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import sympy as sp

from .errors import ExprParseError, NonAffineError, UnknownSymbolError

Expr = sp.Expr
Symbol = sp.Symbol

#: Function atoms admitted in expressions, keyed by their surface name.
FUNCTIONS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "exp": sp.exp,
    "sqrt": sp.sqrt,
    "ln": sp.log,
}

ZERO = sp.Integer(0)
ONE = sp.Integer(1)


def sym(name):
    return sp.Symbol(name)


def integer(n):
    return sp.Integer(n)


def rational(p, q=1):
    return sp.Rational(p, q)


def from_fraction(f):
    return sp.Rational(f.numerator, f.denominator)


def as_fraction(e):
    """Return a constant expression as an exact Fraction.

    Raises ValueError if the canonical form is not a rational number.
    """
    e = canonicalize(e)
    if not e.is_Rational:
        raise ValueError(f"not a rational constant: {render(e)}")
    return Fraction(int(e.p), int(e.q))


def free_symbols(e):
    return e.free_symbols


# ---------------------------------------------------------------------------
# canonical form

def _canon_args(e):
    if not e.args:
        return e
    if isinstance(e, sp.Function):
        return e.func(*[canonicalize(a) for a in e.args])
    return e.func(*[_canon_args(a) for a in e.args])


def canonicalize(e):
    """Rewrite e as an expanded, gcd-reduced single fraction (see module doc)."""
    e = sp.sympify(e)
    if e.args:
        e = _canon_args(e)
    return sp.cancel(e)


def equals_zero(e):
    return canonicalize(e) == 0


def equal(a, b):
    return equals_zero(sp.sympify(a) - sp.sympify(b))


def differentiate(e, s):
    return canonicalize(sp.diff(sp.sympify(e), s))


def substitute(e, mapping):
    """Simultaneously replace symbols by expressions, then canonicalize."""
    return canonicalize(sp.sympify(e).xreplace(dict(mapping)))


# ---------------------------------------------------------------------------
# tokenizer (shared with the form parser in cartan)

_OPS = "+-*/^(),"


@dataclass(frozen=True)
class Token:
    kind: str  # "num" | "name" | "op" | "end"
    text: str
    pos: int


def tokenize(text):
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token("name", text[i:j], i))
            i = j
            continue
        if ch == "/" and i + 1 < n and text[i + 1] == "\\":
            toks.append(Token("op", "/\\", i))
            i += 2
            continue
        if ch in _OPS:
            toks.append(Token("op", ch, i))
            i += 1
            continue
        raise ExprParseError(f"unexpected character {ch!r}", i)
    toks.append(Token("end", "", n))
    return toks


class TokenStream:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at_op(self, *texts):
        tok = self.peek()
        return tok.kind == "op" and tok.text in texts

    def expect_op(self, text):
        tok = self.next()
        if tok.kind != "op" or tok.text != text:
            shown = tok.text if tok.kind != "end" else "end of input"
            raise ExprParseError(f"expected '{text}', found {shown!r}", tok.pos)
        return tok


# ---------------------------------------------------------------------------
# parser
#
# Precedence, loosest to tightest:  + -  |  * /  |  unary -  |  ^
# so -x^2 is -(x^2) and 3/4*k is (3/4)*k.  Exponents must be integer
# literals (possibly negated or parenthesized); sqrt is the function.

def _normalize_table(symbols):
    if hasattr(symbols, "items"):
        return dict(symbols)
    return {s.name: s for s in symbols}


class _ExprParser:
    def __init__(self, stream, table):
        self.ts = stream
        self.table = table

    def sum(self):
        e = self.term()
        while self.ts.at_op("+", "-"):
            op = self.ts.next().text
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.factor()
        while self.ts.at_op("*", "/"):
            op = self.ts.next().text
            rhs = self.factor()
            e = e * rhs if op == "*" else e / rhs
        return e

    def factor(self):
        if self.ts.at_op("-"):
            self.ts.next()
            return -self.factor()
        return self.power()

    def power(self):
        base = self.atom()
        if self.ts.at_op("^"):
            self.ts.next()
            tok = self.ts.peek()
            exponent = self.factor()
            exponent = canonicalize(exponent)
            if not exponent.is_Integer:
                raise ExprParseError("exponent must be an integer literal", tok.pos)
            return base ** exponent
        return base

    def atom(self):
        tok = self.ts.next()
        if tok.kind == "num":
            return sp.Integer(int(tok.text))
        if tok.kind == "name":
            if self.ts.at_op("("):
                if tok.text in FUNCTIONS:
                    self.ts.next()
                    arg = self.sum()
                    self.ts.expect_op(")")
                    return FUNCTIONS[tok.text](arg)
                if tok.text in self.table:
                    raise ExprParseError(f"'{tok.text}' is not a function", tok.pos)
                raise UnknownSymbolError(tok.text, tok.pos)
            if tok.text in self.table:
                return self.table[tok.text]
            raise UnknownSymbolError(tok.text, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            e = self.sum()
            self.ts.expect_op(")")
            return e
        shown = tok.text if tok.kind != "end" else "end of input"
        raise ExprParseError(f"expected a value, found {shown!r}", tok.pos)


def parse_expr(text, symbols=()):
    """Parse an expression string against a table of admitted symbols.

    ``symbols`` is a mapping name -> Symbol or an iterable of Symbols.  Any
    other identifier raises UnknownSymbolError naming it; malformed syntax
    raises ExprParseError carrying the byte offset.
    """
    table = _normalize_table(symbols)
    stream = TokenStream(tokenize(text))
    parser = _ExprParser(stream, table)
    e = parser.sum()
    tok = stream.peek()
    if tok.kind != "end":
        raise ExprParseError(f"unexpected trailing input {tok.text!r}", tok.pos)
    return canonicalize(e)


# ---------------------------------------------------------------------------
# deterministic rendering

_FUNCTION_NAMES = {sp.sin: "sin", sp.cos: "cos", sp.exp: "exp", sp.log: "ln"}


def _gen_sort_key(g):
    if g.is_Symbol:
        return (0, g.name)
    return (1, _render_gen(g))


def _collect_gens(p, gens):
    if p.is_Symbol:
        gens.add(p)
        return
    if isinstance(p, sp.Function):
        gens.add(p)
        return
    if p is sp.E:
        gens.add(p)
        return
    if p.is_Pow and not p.exp.is_Integer:
        # fractional powers only arise through sqrt
        if p.exp.is_Rational and p.exp.q == 2:
            gens.add(sp.Pow(p.base, sp.Rational(1, 2)))
            return
        raise ValueError(f"cannot render power with exponent {p.exp}")
    for a in p.args:
        _collect_gens(a, gens)


def _render_gen(g):
    if g.is_Symbol:
        return g.name
    if g is sp.E:
        return "exp(1)"
    if g.is_Pow:
        return f"sqrt({render(g.base)})"
    fname = _FUNCTION_NAMES.get(g.func)
    if fname is None:
        raise ValueError(f"cannot render function {g.func}")
    return f"{fname}({render(g.args[0])})"


def _render_rational(q):
    if q.q == 1:
        return str(q.p)
    return f"{q.p}/{q.q}"


def _render_poly(p):
    if p.is_Rational:
        return _render_rational(p)
    gens = set()
    _collect_gens(p, gens)
    ordered = sorted(gens, key=_gen_sort_key)
    poly = sp.Poly(p, *ordered)
    gen_strs = [_render_gen(g) for g in ordered]
    pieces = []
    for exps, coeff in poly.terms(order="lex"):
        body = "*".join(
            g if e == 1 else f"{g}^{e}"
            for g, e in zip(gen_strs, exps)
            if e > 0
        )
        mag = abs(coeff)
        if not body:
            text = _render_rational(mag)
        elif mag == 1:
            text = body
        else:
            text = f"{_render_rational(mag)}*{body}"
        pieces.append((coeff < 0, text))
    out = []
    for neg, text in pieces:
        if not out:
            out.append(f"-{text}" if neg else text)
        else:
            out.append(f" - {text}" if neg else f" + {text}")
    return "".join(out)


def _is_single_term(p):
    return not p.is_Add


def render(e):
    """Write the canonical form of e as a string that parse_expr reads back.

    Polynomial generators are ordered by name (function atoms after plain
    symbols), monomials lexicographically by exponent vector, descending.
    """
    e = canonicalize(e)
    num, den = sp.fraction(e)
    if den == 1:
        return _render_poly(num)
    if den.is_Rational:
        return _render_poly(num / den)
    num_s = _render_poly(num)
    den_s = _render_poly(den)
    if _is_single_term(num):
        return f"{num_s}/({den_s})"
    return f"({num_s})/({den_s})"


# ---------------------------------------------------------------------------
# affine solving

@dataclass
class LinearSolveResult:
    """Outcome of solve_affine.

    ``solved`` maps unknowns to right-hand sides in solve order; no solved
    unknown occurs in any right-hand side.  ``residual_constraints`` are the
    nonzero equations left after elimination (they involve no solvable
    unknown).  ``free_unknowns`` are the unknowns no pivot was found for.
    """

    solved: dict = field(default_factory=dict)
    residual_constraints: list = field(default_factory=list)
    free_unknowns: list = field(default_factory=list)


def _affine_parts(eq, unknowns, label):
    """Split an equation into (linear coefficients, constant) in the unknowns."""
    e = canonicalize(eq)
    num, den = sp.fraction(e)
    unknown_set = set(unknowns)
    if den.free_symbols & unknown_set:
        raise NonAffineError(
            f"{label} has an unknown in a denominator: {render(eq)}", eq)
    coeffs = {}
    rest = num
    for u in unknowns:
        if u not in num.free_symbols:
            continue
        c = canonicalize(sp.diff(num, u))
        if c.free_symbols & unknown_set:
            raise NonAffineError(f"{label} is not affine in the unknowns: {render(eq)}", eq)
        coeffs[u] = c
        rest = rest - c * u
    rest = canonicalize(rest)
    if rest.free_symbols & unknown_set:
        raise NonAffineError(f"{label} is not affine in the unknowns: {render(eq)}", eq)
    return coeffs, rest


def solve_affine(equations, unknowns):
    """Solve a list of equations (each read as expr = 0) affine in ``unknowns``.

    Deterministic Gaussian elimination over the rational-function field:
    unknowns are eliminated in the order given, each using the earliest
    remaining equation whose coefficient on that unknown is nonzero.
    """
    unknowns = list(unknowns)
    rows = []
    for idx, eq in enumerate(equations):
        coeffs, rest = _affine_parts(eq, unknowns, f"equation {idx}")
        rows.append([coeffs, rest])

    solved = {}
    order = []
    for u in unknowns:
        pivot = None
        for row in rows:
            c = row[0].get(u)
            if c is not None and c != 0:
                pivot = row
                break
        if pivot is None:
            continue
        rows.remove(pivot)
        coeffs, rest = pivot
        others = sum((c * v for v, c in coeffs.items() if v != u), ZERO)
        rhs = canonicalize(-(rest + others) / coeffs[u])
        solved[u] = rhs
        order.append(u)
        # eliminate u from the remaining rows
        for row in rows:
            c = row[0].pop(u, None)
            if c is None or c == 0:
                continue
            expr = row[1] + sum((cv * v for v, cv in row[0].items()), ZERO) + c * rhs
            row[0], row[1] = _affine_parts(expr, unknowns, "equation")

    # triangular back-substitution so solved right-hand sides are closed
    for i in range(len(order) - 1, -1, -1):
        u = order[i]
        later = {v: solved[v] for v in order[i + 1:] if v in solved[u].free_symbols}
        if later:
            solved[u] = substitute(solved[u], later)

    residuals = []
    for coeffs, rest in rows:
        expr = canonicalize(rest + sum((c * v for v, c in coeffs.items()), ZERO))
        if expr != 0:
            residuals.append(expr)

    free = [u for u in unknowns if u not in solved]
    return LinearSolveResult(solved=solved, residual_constraints=residuals, free_unknowns=free)
