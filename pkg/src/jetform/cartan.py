"""Charts, vector fields, and differential forms with exact coefficients.

A Chart is an ordered tuple of coordinate symbols whose leading block spans
the base manifold; everything after it is fiber.  Differential forms are
stored sparsely as {strictly increasing index tuple -> coefficient}, with
coefficients canonical in the sense of ``symexpr`` and zero coefficients
dropped, so two forms are equal exactly when their term dicts are equal.

Sign conventions (fixed once, tested as invariants):

* wedge insertion sorts index tuples, picking up the permutation sign;
* d(c w) = dc ^ w + c dw extends to the graded Leibniz rule;
* the interior product is the degree -1 antiderivation with
  contraction against the first slot, so for X = d/dx,
  interior(X, dx ^ dy) = dy;
* the Lie derivative is defined by the Cartan formula
  L_X = interior(X, d .) + d(interior(X, .)).
"""

from dataclasses import dataclass, field

import sympy as sp

from . import symexpr as se
from .errors import ChartError, ChartMismatchError, ExprParseError, UnknownSymbolError
from .symexpr import TokenStream, canonicalize, differentiate, render, substitute, tokenize


@dataclass(frozen=True)
class Chart:
    """Ordered coordinates, base block first, plus constant parameters."""

    name: str
    coords: tuple
    base_dim: int
    params: tuple = ()
    roles: tuple = ()

    def __post_init__(self):
        coords = tuple(se.sym(c) if isinstance(c, str) else c for c in self.coords)
        params = tuple(se.sym(p) if isinstance(p, str) else p for p in self.params)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "params", params)
        if not 0 <= self.base_dim <= len(coords):
            raise ChartError(f"base_dim {self.base_dim} out of range for {len(coords)} coordinates")
        names = [c.name for c in coords] + [p.name for p in params]
        if len(set(names)) != len(names):
            raise ChartError(f"chart '{self.name}' has duplicate names")
        reserved = set(se.FUNCTIONS) | {"d"}
        taken = reserved.intersection(names)
        if taken:
            raise ChartError(f"reserved names used as coordinates: {sorted(taken)}")
        roles = self.roles
        if not roles:
            roles = tuple("base" if i < self.base_dim else "fiber" for i in range(len(coords)))
        elif len(roles) != len(coords):
            raise ChartError("roles must match coordinates one for one")
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(coords)})

    @property
    def dim(self):
        return len(self.coords)

    @property
    def base_coords(self):
        return self.coords[: self.base_dim]

    @property
    def fiber_coords(self):
        return self.coords[self.base_dim:]

    def index(self, s):
        try:
            return self._index[s]
        except KeyError:
            raise ChartError(f"{s} is not a coordinate of chart '{self.name}'") from None

    def is_base(self, s):
        return self.index(s) < self.base_dim

    def symbol_table(self):
        table = {c.name: c for c in self.coords}
        table.update({p.name: p for p in self.params})
        return table

    def check_expr(self, e):
        """Reject expressions mentioning symbols outside this chart."""
        extra = se.free_symbols(e) - set(self.coords) - set(self.params)
        if extra:
            names = ", ".join(sorted(s.name for s in extra))
            raise ChartError(f"expression uses symbols outside chart '{self.name}': {names}")
        return e


def _same_chart(a, b):
    if a.chart != b.chart:
        raise ChartMismatchError(
            f"objects live on different charts ('{a.chart.name}' vs '{b.chart.name}')")


@dataclass(frozen=True)
class VectorField:
    """Sparse vector field: missing components are zero."""

    chart: Chart
    components: tuple  # tuple of (Symbol, Expr) pairs, chart order
    label: str = ""

    @staticmethod
    def make(chart, components, label=""):
        comps = []
        for s in chart.coords:
            if s in components:
                c = canonicalize(components[s])
                chart.check_expr(c)
                if c != 0:
                    comps.append((s, c))
        return VectorField(chart, tuple(comps), label)

    def component(self, s):
        self.chart.index(s)
        for sym_, c in self.components:
            if sym_ == s:
                return c
        return se.ZERO


def coordinate_field(chart, s):
    return VectorField.make(chart, {s: se.ONE}, label=f"d/d{s.name}")


def _sort_with_sign(idx):
    """Sort an index tuple, returning (sorted tuple, permutation sign) or
    (None, 0) when an index repeats."""
    lst = list(idx)
    sign = 1
    for i in range(1, len(lst)):
        j = i
        while j > 0 and lst[j - 1] > lst[j]:
            lst[j - 1], lst[j] = lst[j], lst[j - 1]
            sign = -sign
            j -= 1
    for i in range(1, len(lst)):
        if lst[i - 1] == lst[i]:
            return None, 0
    return tuple(lst), sign


class DiffForm:
    """Differential form of fixed degree on a chart (see module doc)."""

    __slots__ = ("chart", "degree", "terms")

    def __init__(self, chart, degree, terms):
        # internal constructor: terms must already be normalized
        self.chart = chart
        self.degree = degree
        self.terms = terms

    @staticmethod
    def make(chart, degree, terms):
        acc = {}
        for idx, coeff in terms.items():
            idx = tuple(idx)
            if len(idx) != degree:
                raise ValueError(f"index tuple {idx} does not match degree {degree}")
            for i in idx:
                if not 0 <= i < chart.dim:
                    raise ValueError(f"index {i} out of range for chart '{chart.name}'")
            key, sign = _sort_with_sign(idx)
            if key is None:
                raise ValueError(f"repeated index in {idx}")
            c = canonicalize(coeff)
            chart.check_expr(c)
            acc[key] = canonicalize(acc.get(key, se.ZERO) + sign * c)
        return DiffForm(chart, degree, {k: v for k, v in sorted(acc.items()) if v != 0})

    def is_zero(self):
        return not self.terms

    def items(self):
        return sorted(self.terms.items())

    def coefficient(self, idx):
        key, sign = _sort_with_sign(tuple(idx))
        if key is None:
            return se.ZERO
        return canonicalize(sign * self.terms.get(key, se.ZERO))

    def __eq__(self, other):
        if not isinstance(other, DiffForm):
            return NotImplemented
        return (self.chart == other.chart and self.degree == other.degree
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.chart, self.degree, tuple(sorted(self.terms))))

    def __add__(self, other):
        _same_chart(self, other)
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degree")
        acc = dict(self.terms)
        for idx, c in other.terms.items():
            acc[idx] = canonicalize(acc.get(idx, se.ZERO) + c)
        return DiffForm(self.chart, self.degree,
                        {k: v for k, v in sorted(acc.items()) if v != 0})

    def __neg__(self):
        return self.scaled(-se.ONE)

    def __sub__(self, other):
        return self + (-other)

    def scaled(self, e):
        e = canonicalize(e)
        self.chart.check_expr(e)
        acc = {}
        for idx, c in self.terms.items():
            v = canonicalize(e * c)
            if v != 0:
                acc[idx] = v
        return DiffForm(self.chart, self.degree, dict(sorted(acc.items())))

    def __rmul__(self, e):
        return self.scaled(sp.sympify(e))

    def __repr__(self):
        return f"DiffForm({self.chart.name}, {render_form(self)})"


def zero_form(chart, degree):
    return DiffForm(chart, degree, {})


def scalar_form(chart, e):
    return DiffForm.make(chart, 0, {(): e})


def d_coord(chart, s):
    return DiffForm.make(chart, 1, {(chart.index(s),): se.ONE})


def wedge(a, b):
    _same_chart(a, b)
    acc = {}
    for i1, c1 in a.terms.items():
        for i2, c2 in b.terms.items():
            key, sign = _sort_with_sign(i1 + i2)
            if key is None:
                continue
            v = canonicalize(acc.get(key, se.ZERO) + sign * c1 * c2)
            acc[key] = v
    return DiffForm(a.chart, a.degree + b.degree,
                    {k: v for k, v in sorted(acc.items()) if v != 0})


def wedge_all(forms):
    it = iter(forms)
    out = next(it)
    for f in it:
        out = wedge(out, f)
    return out


def d_of_expr(chart, e):
    """Differential of a scalar as a 1-form."""
    e = canonicalize(e)
    chart.check_expr(e)
    terms = {}
    for i, s in enumerate(chart.coords):
        c = differentiate(e, s)
        if c != 0:
            terms[(i,)] = c
    return DiffForm(chart, 1, terms)


def exterior_derivative(w):
    acc = {}
    chart = w.chart
    for idx, c in w.terms.items():
        for j, s in enumerate(chart.coords):
            dc = differentiate(c, s)
            if dc == 0:
                continue
            key, sign = _sort_with_sign((j,) + idx)
            if key is None:
                continue
            acc[key] = canonicalize(acc.get(key, se.ZERO) + sign * dc)
    return DiffForm(chart, w.degree + 1, {k: v for k, v in sorted(acc.items()) if v != 0})


def interior_product(X, w):
    _same_chart(X, w)
    if w.degree == 0:
        raise ValueError("cannot contract a vector field into a 0-form")
    acc = {}
    comp = {X.chart.index(s): c for s, c in X.components}
    for idx, c in w.terms.items():
        for pos, i in enumerate(idx):
            xi = comp.get(i)
            if xi is None:
                continue
            key = idx[:pos] + idx[pos + 1:]
            sign = -1 if pos % 2 else 1
            acc[key] = canonicalize(acc.get(key, se.ZERO) + sign * xi * c)
    return DiffForm(w.chart, w.degree - 1, {k: v for k, v in sorted(acc.items()) if v != 0})


def lie_derivative(X, w):
    if w.degree == 0:
        return interior_product(X, exterior_derivative(w))
    return interior_product(X, exterior_derivative(w)) + exterior_derivative(interior_product(X, w))


def coefficient_equations(w):
    """The stored coefficients in index order; the form vanishes iff all do."""
    return [c for _, c in w.items()]


def base_volume(chart):
    """eta = dx^1 ^ ... ^ dx^m over the base block."""
    if chart.base_dim == 0:
        raise ChartError("chart has no base coordinates")
    return DiffForm(chart, chart.base_dim, {tuple(range(chart.base_dim)): se.ONE})


def base_volume_contractions(chart):
    """The list eta_i = interior(d/dx^i, eta), one per base coordinate."""
    eta = base_volume(chart)
    return [interior_product(coordinate_field(chart, s), eta) for s in chart.base_coords]


# ---------------------------------------------------------------------------
# chart maps and pullback

@dataclass(frozen=True)
class ChartMap:
    """Smooth map source -> target given by target-coordinate expressions."""

    source: Chart
    target: Chart
    assignment: tuple  # tuple of (target Symbol, Expr over source), target order

    @staticmethod
    def make(source, target, assignment):
        allowed = set(source.coords) | set(source.params) | set(target.params)
        pairs = []
        for t in target.coords:
            if t not in assignment:
                raise ChartError(f"chart map does not assign target coordinate {t}")
            e = canonicalize(assignment[t])
            extra = se.free_symbols(e) - allowed
            if extra:
                names = ", ".join(sorted(s.name for s in extra))
                raise ChartError(f"assignment for {t} uses foreign symbols: {names}")
            pairs.append((t, e))
        return ChartMap(source, target, tuple(pairs))

    def mapping(self):
        return dict(self.assignment)

    def apply(self, e):
        """Pull a scalar on the target back to the source."""
        return substitute(e, self.mapping())


def identity_map(chart):
    return ChartMap.make(chart, chart, {c: c for c in chart.coords})


def projection_map(source, target):
    """Forgetful map when every target coordinate is also a source coordinate."""
    assignment = {}
    for t in target.coords:
        source.index(t)  # raises ChartError when absent
        assignment[t] = t
    return ChartMap.make(source, target, assignment)


def compose(outer, inner):
    """outer o inner, a map inner.source -> outer.target."""
    if inner.target != outer.source:
        raise ChartMismatchError("compose: inner.target must equal outer.source")
    assignment = {t: inner.apply(e) for t, e in outer.assignment}
    return ChartMap.make(inner.source, outer.target, assignment)


def pullback(phi, w):
    """Pull the form w on phi.target back along phi to phi.source."""
    if w.chart != phi.target:
        raise ChartMismatchError("pullback: form does not live on the map's target chart")
    source = phi.source
    mapping = phi.mapping()
    differentials = {}  # target index -> 1-form on source
    out = zero_form(source, w.degree)
    for idx, c in w.terms.items():
        piece = scalar_form(source, substitute(c, mapping))
        for i in idx:
            t = phi.target.coords[i]
            if i not in differentials:
                differentials[i] = d_of_expr(source, mapping[t])
            piece = wedge(piece, differentials[i])
            if piece.is_zero():
                break
        out = out + piece
    return out


# ---------------------------------------------------------------------------
# rendering and parsing of forms

def _coeff_text(c):
    s = render(c)
    num, den = sp.fraction(c)
    if num.is_Add and den.is_Rational and den != 1:
        return f"({s})"
    if num.is_Add and den == 1:
        return f"({s})"
    return s


def render_form(w):
    """Deterministic text for a form; round-trips through parse_form."""
    if w.is_zero():
        return "0"
    out = []
    for idx, c in w.items():
        base = "/\\".join(f"d({w.chart.coords[i].name})" for i in idx)
        if w.degree == 0:
            text = render(c)
        elif c == -se.ONE:
            text = f"-{base}"
        elif c == se.ONE:
            text = base
        else:
            text = f"{_coeff_text(c)}*{base}"
        if not out:
            out.append(text)
        elif text.startswith("-"):
            out.append(f" - {text[1:]}")
        else:
            out.append(f" + {text}")
    return "".join(out)


class _FormParser:
    """Parses the expression grammar extended with d(coord) and the wedge.

    Every value is a DiffForm; scalars are 0-forms.  '*' and '/\\' both mean
    the wedge (identical on scalars), '/' and '^' require scalar operands on
    the right (and left, for '^').
    """

    def __init__(self, stream, chart):
        self.ts = stream
        self.chart = chart
        self.table = chart.symbol_table()

    def _scalar(self, form, tok):
        if form.degree != 0:
            raise ExprParseError("expected a scalar here", tok.pos)
        return form.coefficient(())

    def form(self):
        e = self.fterm()
        while self.ts.at_op("+", "-"):
            tok = self.ts.next()
            rhs = self.fterm()
            if rhs.degree != e.degree:
                raise ExprParseError("added terms have different degrees", tok.pos)
            e = e + rhs if tok.text == "+" else e - rhs
        return e

    def fterm(self):
        e = self.ffactor()
        while self.ts.at_op("*", "/\\", "/"):
            tok = self.ts.next()
            rhs = self.ffactor()
            if tok.text == "/":
                den = self._scalar(rhs, tok)
                if den == 0:
                    raise ExprParseError("division by zero", tok.pos)
                e = e.scaled(1 / den)
            else:
                e = wedge(e, rhs)
        return e

    def ffactor(self):
        if self.ts.at_op("-"):
            self.ts.next()
            return -self.ffactor()
        return self.fpower()

    def fpower(self):
        base = self.fatom()
        if self.ts.at_op("^"):
            op = self.ts.next()
            tok = self.ts.peek()
            exponent = self._scalar(self.ffactor(), tok)
            exponent = canonicalize(exponent)
            if not exponent.is_Integer:
                raise ExprParseError("exponent must be an integer literal", tok.pos)
            b = self._scalar(base, op)
            return scalar_form(self.chart, b ** exponent)
        return base

    def fatom(self):
        tok = self.ts.next()
        if tok.kind == "num":
            return scalar_form(self.chart, sp.Integer(int(tok.text)))
        if tok.kind == "name":
            if tok.text == "d" and self.ts.at_op("("):
                self.ts.next()
                name_tok = self.ts.next()
                if name_tok.kind != "name" or name_tok.text not in self.table:
                    raise ExprParseError("d(...) needs a coordinate name", name_tok.pos)
                s = self.table[name_tok.text]
                if s not in self.chart.coords:
                    raise ExprParseError(f"cannot take d of parameter '{name_tok.text}'",
                                         name_tok.pos)
                self.ts.expect_op(")")
                return d_coord(self.chart, s)
            if self.ts.at_op("("):
                if tok.text in se.FUNCTIONS:
                    self.ts.next()
                    arg_tok = self.ts.peek()
                    arg = self._scalar(self.form(), arg_tok)
                    self.ts.expect_op(")")
                    return scalar_form(self.chart, se.FUNCTIONS[tok.text](arg))
                if tok.text in self.table:
                    raise ExprParseError(f"'{tok.text}' is not a function", tok.pos)
                raise UnknownSymbolError(tok.text, tok.pos)
            if tok.text in self.table:
                return scalar_form(self.chart, self.table[tok.text])
            raise UnknownSymbolError(tok.text, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            e = self.form()
            self.ts.expect_op(")")
            return e
        shown = tok.text if tok.kind != "end" else "end of input"
        raise ExprParseError(f"expected a value, found {shown!r}", tok.pos)


def parse_form(text, chart):
    """Parse a differential-form string over a chart.

    The scalar grammar is that of ``symexpr.parse_expr`` with two additions:
    ``d(name)`` is the coordinate differential and ``/\\`` is the wedge
    product ('*' works as well and is conventional next to scalar factors).
    """
    stream = TokenStream(tokenize(text))
    parser = _FormParser(stream, chart)
    w = parser.form()
    tok = stream.peek()
    if tok.kind != "end":
        raise ExprParseError(f"unexpected trailing input {tok.text!r}", tok.pos)
    return w
