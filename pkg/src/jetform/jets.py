"""Jet charts: derivative coordinates, contact forms, total derivatives.

A multi-index is a sorted tuple of base-direction positions (0-based), so
partial derivatives commute by construction: u_tx and u_xt are the same
coordinate, stored under (0, 1).  Derivative coordinates are named by
appending the base-coordinate letters, u -> u_t -> u_tx, and a chart of
order k carries every derivative coordinate up to and including order k.
"""

from dataclasses import dataclass
from itertools import combinations_with_replacement

import sympy as sp

from . import symexpr as se
from .cartan import Chart, ChartMap, DiffForm, d_coord, pullback
from .errors import ChartError, OrderOverflowError

# ---------------------------------------------------------------------------
# multi-indices

def mi(seq=()):
    return tuple(sorted(seq))


def mi_order(I):
    return len(I)


def mi_plus(I, j):
    return tuple(sorted(I + (j,)))


def mi_minus(I, j):
    lst = list(I)
    lst.remove(j)  # ValueError if j absent
    return tuple(lst)


def mi_multiplicity(I, j):
    return I.count(j)


def mi_splittings(M):
    """Distinct ways to write M as J + 1_j, as (J, j) pairs."""
    out = []
    for j in sorted(set(M)):
        out.append((mi_minus(M, j), j))
    return out


def all_multi_indices(base_dim, max_order):
    """All multi-indices of order 0..max_order, graded then lexicographic."""
    out = []
    for r in range(max_order + 1):
        out.extend(combinations_with_replacement(range(base_dim), r))
    return out


_DEFAULT_BASES = {1: ("t",), 2: ("t", "x"), 3: ("t", "x", "y")}


def default_base_names(base_dim):
    if base_dim in _DEFAULT_BASES:
        return _DEFAULT_BASES[base_dim]
    return tuple(f"x{i}" for i in range(1, base_dim + 1))


def derivative_name(field, I, base_names):
    if not I:
        return field
    return field + "_" + "".join(base_names[j] for j in I)


# ---------------------------------------------------------------------------
# jet charts

@dataclass(frozen=True)
class JetChart:
    """A chart of derivative coordinates over a base block.

    ``entries`` lists (field position, multi-index, coordinate symbol) in
    chart order.  ``identification`` optionally records that this chart was
    carved out of a larger one by expressing some derivative coordinates in
    terms of the others (see ``identify_coordinates``).
    """

    chart: Chart
    fields: tuple
    order: int
    entries: tuple
    identification: tuple = None  # (full JetChart, ChartMap this.chart -> full.chart)

    def __post_init__(self):
        object.__setattr__(self, "_by_key", {(a, I): s for a, I, s in self.entries})
        object.__setattr__(self, "_by_symbol", {s: (a, I) for a, I, s in self.entries})

    @property
    def base_dim(self):
        return self.chart.base_dim

    @property
    def base_names(self):
        return tuple(s.name for s in self.chart.base_coords)

    def coord(self, alpha, I):
        try:
            return self._by_key[(alpha, mi(I))]
        except KeyError:
            raise ChartError(
                f"no derivative coordinate for field {alpha}, multi-index {tuple(I)}") from None

    def info(self, s):
        """(field position, multi-index) for a derivative coordinate, else None."""
        return self._by_symbol.get(s)

    def coords_of_order(self, r):
        return [s for _, I, s in self.entries if len(I) == r]


def build_jet_chart(fields, base_dim, order, params=(), base_names=None, name=None):
    """Construct the order-``order`` jet chart for the given field names.

    Coordinates are ordered base block first, then derivative coordinates
    graded by order, fields in the given order within each grade.
    """
    if base_dim < 1:
        raise ChartError("base_dim must be at least 1")
    if order < 0:
        raise ChartError("order must be nonnegative")
    fields = tuple(fields)
    if not fields:
        raise ChartError("need at least one field")
    base_names = tuple(base_names) if base_names else default_base_names(base_dim)
    if len(base_names) != base_dim:
        raise ChartError("base_names must match base_dim")
    for f in fields:
        if not f.isidentifier() or "_" in f:
            raise ChartError(f"field name {f!r} must be an identifier without underscores")
    base_syms = tuple(se.sym(n) for n in base_names)
    # grade by order, fields major within each grade
    entries = []
    coords = list(base_syms)
    for r in range(order + 1):
        for a, f in enumerate(fields):
            for I in combinations_with_replacement(range(base_dim), r):
                s = se.sym(derivative_name(f, I, base_names))
                entries.append((a, I, s))
                coords.append(s)
    chart = Chart(name or ("jet_" + "_".join(fields)), tuple(coords), base_dim,
                  params=tuple(params))
    return JetChart(chart=chart, fields=fields, order=order, entries=tuple(entries))


def contact_form(jc, alpha, I):
    """theta^alpha_I = du_I - u_{I + 1_j} dx^j, defined for |I| < order."""
    I = mi(I)
    if len(I) >= jc.order:
        raise ChartError(f"contact form needs order {len(I) + 1} coordinates")
    if jc.identification is not None:
        full, emb = jc.identification
        return pullback(emb, contact_form(full, alpha, I))
    chart = jc.chart
    w = d_coord(chart, jc.coord(alpha, I))
    for j in range(jc.base_dim):
        w = w - DiffForm.make(chart, 1, {(j,): jc.coord(alpha, mi_plus(I, j))})
    return w


def contact_forms(jc):
    """All contact forms, graded by |I|, fields major within each grade."""
    out = []
    for r in range(jc.order):
        for a in range(len(jc.fields)):
            for I in combinations_with_replacement(range(jc.base_dim), r):
                out.append(contact_form(jc, a, I))
    return out


def total_derivative(jc, e, i):
    """Formal derivative along base direction i, using the chain rule through
    every derivative coordinate present.

    The expression may involve coordinates of order at most order-1 so the
    result still lives on the chart; otherwise OrderOverflowError.
    """
    e = se.canonicalize(sp.sympify(e))
    chart = jc.chart
    chart.check_expr(e)
    for s in se.free_symbols(e):
        info = jc.info(s)
        if info is not None and len(info[1]) >= jc.order:
            raise OrderOverflowError(
                f"total derivative of an order-{len(info[1])} coordinate {s} needs "
                f"order {len(info[1]) + 1}, but the chart stops at {jc.order}")
        if info is None and s not in chart.base_coords and s not in chart.params:
            raise ChartError(f"{s} is not a jet coordinate of this chart")
    out = se.differentiate(e, chart.base_coords[i])
    for a, I, s in jc.entries:
        if len(I) >= jc.order:
            break
        c = se.differentiate(e, s)
        if c != 0:
            out = out + c * jc.coord(a, mi_plus(I, i))
    return se.canonicalize(out)


def symmetric_part(values, alpha, M):
    """Multiplicity-weighted average of the momenta splitting the index M.

    ``values`` maps (field, J, j) to expressions; the symmetric part of the
    family at M is  sum_j  m_j(M) values[field, M - 1_j, j] / |M|,  which is
    the identity when only one splitting exists.
    """
    M = mi(M)
    if not M:
        raise ValueError("M must have positive order")
    total = se.ZERO
    for J, j in mi_splittings(M):
        total = total + sp.Integer(mi_multiplicity(M, j)) * values[(alpha, J, j)]
    return se.canonicalize(total / sp.Integer(len(M)))


def identify_coordinates(jc, identify):
    """Restrict a jet chart by expressing some derivative coordinates through
    the remaining ones (e.g. u_xx -> u_tt).

    Returns the restricted JetChart; its ``identification`` holds the full
    chart and the embedding map, and its contact forms are the pullbacks of
    the full ones.
    """
    if jc.identification is not None:
        raise ChartError("chart is already a restriction")
    chart = jc.chart
    dropped = []
    for s in identify:
        if jc.info(s) is None:
            raise ChartError(f"{s} is not a derivative coordinate")
        dropped.append(s)
    kept = [c for c in chart.coords if c not in identify]
    sub_chart = Chart(chart.name + "_restricted", tuple(kept), chart.base_dim,
                      params=chart.params)
    for s, e in identify.items():
        sub_chart.check_expr(se.canonicalize(e))
    assignment = {c: identify.get(c, c) for c in chart.coords}
    emb = ChartMap.make(sub_chart, chart, assignment)
    entries = tuple((a, I, s) for a, I, s in jc.entries if s not in identify)
    return JetChart(chart=sub_chart, fields=jc.fields, order=jc.order,
                    entries=entries, identification=(jc, emb))
