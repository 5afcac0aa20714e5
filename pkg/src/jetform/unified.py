"""Builders for unified phase-space forms and their projections.

Each builder extends a chart with momentum or multiplier coordinates, forms
the phase-space m-form Theta, and fixes a coordinate projection that forgets
a block of fiber coordinates (velocities for the classical and Herglotz
constructions, the caller's drop list for general variational problems).

Sign conventions, fixed here and exercised by the worked-problem tests:

* eta is the base volume form dx^1 ^ ... ^ dx^m and eta_i its contraction
  with d/dx^i, so for m = 2, eta_1 = dx and eta_2 = -dt: a degree-1
  generator theta picks up multiplier terms  p theta ^ dx - p' theta ^ dt;
* the classical form is  Theta = L eta + sum p^{I,i} theta_I ^ eta_i;
* the Herglotz form is
  Theta = dz^i ^ eta_i + p^i theta ^ eta_i - mu (dz^i ^ eta_i - L eta),
  the sign on mu being the one that makes the first constraint read
  p^i = mu dL/du_i.
"""

from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement

import sympy as sp

from . import symexpr as se
from .cartan import (Chart, ChartMap, DiffForm, VectorField, base_volume,
                     base_volume_contractions, coordinate_field, d_coord,
                     interior_product, lie_derivative, projection_map, pullback,
                     scalar_form, wedge, zero_form)
from .errors import ChartError
from .jets import JetChart, contact_form, mi_plus, symmetric_part, total_derivative


@dataclass(frozen=True)
class VariationalProblem:
    """A form to extremize, an exterior ideal of admissible-variation
    generators, and the fiber coordinates the momentum projection forgets."""

    chart: Chart
    lagrangian_form: DiffForm
    generators: tuple
    drop: tuple
    label: str = ""
    jet: JetChart = None

    def __post_init__(self):
        m = self.chart.base_dim
        if self.lagrangian_form.degree != m:
            raise ChartError("the Lagrangian form must have base degree")
        if self.lagrangian_form.chart != self.chart:
            raise ChartError("the Lagrangian form lives on the wrong chart")
        for g in self.generators:
            if g.chart != self.chart:
                raise ChartError("generator on the wrong chart")
            if g.degree > m:
                raise ChartError(f"generator degree {g.degree} exceeds base dimension {m}")
        for s in self.drop:
            if self.chart.is_base(s):
                raise ChartError(f"cannot drop base coordinate {s}")


@dataclass(frozen=True)
class UnifiedSpace:
    """An extended chart with the phase-space form and its projection.

    ``dropped`` are the coordinates the projection p forgets (spanning its
    vertical bundle), ``multipliers`` the momentum coordinates the builder
    introduced, and ``solve_unknowns`` the elimination priority the first
    constraint solve uses: dropped coordinates from the last backwards, then
    multipliers from the last backwards.
    """

    kind: str
    chart: Chart
    theta: DiffForm
    reduced_chart: Chart
    projection: ChartMap
    dropped: tuple
    multipliers: tuple
    jet: JetChart = None
    lagrangian: sp.Expr = None
    momentum_entries: tuple = ()  # ((alpha, I, i), Symbol) pairs, chart order
    extras: tuple = ()  # auxiliary (name, Symbol) pairs, e.g. z and mu

    @property
    def base_dim(self):
        return self.chart.base_dim

    @property
    def solve_unknowns(self):
        return tuple(reversed(self.dropped)) + tuple(reversed(self.multipliers))

    @property
    def vertical_fields(self):
        return [coordinate_field(self.chart, s) for s in self.dropped]

    @property
    def base_form(self):
        return base_volume(self.chart)

    def extra(self, name):
        for n, v in self.extras:
            if n == name:
                return v
        raise KeyError(name)


def _extend_chart(chart, new_coords, name):
    return Chart(name, chart.coords + tuple(new_coords), chart.base_dim,
                 params=chart.params)


def _reduced(chart, dropped, name):
    kept = tuple(c for c in chart.coords if c not in dropped)
    reduced = Chart(name, kept, chart.base_dim, params=chart.params)
    return reduced, projection_map(chart, reduced)


# ---------------------------------------------------------------------------
# classical construction

def classical_momentum_entries(jc, k):
    """Momentum keys and symbols p^{I,i}_alpha, 0 <= |I| <= k, chart order."""
    names = jc.base_names
    out = []
    for r in range(k + 1):
        for a, f in enumerate(jc.fields):
            for I in combinations_with_replacement(range(jc.base_dim), r):
                for i in range(jc.base_dim):
                    tail = "_" + "".join(names[j] for j in I) if I else ""
                    s = se.sym(f"p{f}{tail}_{names[i]}")
                    out.append(((a, I, i), s))
    return tuple(out)


def build_classical_unified(jc, L, k):
    """Unified space for an order-(k+1) Lagrangian L on the jet chart jc.

    Theta = L eta + sum p^{I,i}_alpha theta^alpha_I ^ eta_i over 0 <= |I| <= k;
    the projection drops the top-order derivative coordinates.
    """
    if jc.order != k + 1:
        raise ChartError(f"need a jet chart of order {k + 1}, got order {jc.order}")
    L = se.canonicalize(sp.sympify(L))
    jc.chart.check_expr(L)
    entries = classical_momentum_entries(jc, k)
    momenta = tuple(s for _, s in entries)
    chart = _extend_chart(jc.chart, momenta, jc.chart.name + "_unified")
    lift = projection_map(chart, jc.chart)  # forget momenta
    etas = base_volume_contractions(chart)
    theta = wedge(scalar_form(chart, L), base_volume(chart))
    for (a, I, i), p in entries:
        theta = theta + wedge(pullback(lift, contact_form(jc, a, I)), etas[i]).scaled(p)
    dropped = tuple(s for _, I, s in jc.entries if len(I) == k + 1)
    reduced, proj = _reduced(chart, set(dropped), jc.chart.name + "_dual")
    return UnifiedSpace(kind="classical", chart=chart, theta=theta,
                        reduced_chart=reduced, projection=proj, dropped=dropped,
                        multipliers=momenta, jet=jc, lagrangian=L,
                        momentum_entries=entries)


def legendre_components(us):
    """The components of the momentum map: the affine coordinate
    q = L - sum p^{(I,i)} u_{I+1_i} (symmetrized momenta) and the identity on
    the linear coordinates q^{I,i} = p^{I,i}."""
    if us.kind != "classical":
        raise ChartError("legendre_components applies to the classical construction")
    values = {key: sym for key, sym in us.momentum_entries}
    q = us.lagrangian
    for (a, I, i), p in us.momentum_entries:
        M = mi_plus(I, i)
        q = q - symmetric_part(values, a, M) * us.jet.coord(a, M)
    out = {se.sym("q"): se.canonicalize(q)}
    for _, p in us.momentum_entries:
        out[p] = p
    return out


def lift_multipliers(jc, L, k, c=None):
    """Multiplier values lifting an extremal into the unified space.

    Descending recursion on |I|:
        lambda^{I,i} = dL/du_{I+1_i} + c^{I,i}                 (|I| = k)
        lambda^{I,i} = dL/du_{I+1_i} + D_j lambda^{I+1_i, j} + c^{I,i}
    The c-family (keyed (alpha, I, i)) must have zero symmetric part.
    Returns {momentum Symbol -> Expr} using the classical chart's naming.

    The D_j corrections can raise the derivative order above k+1, so the
    chart must be prolonged far enough to hold them (order 2k+1 always
    suffices; order k+1 does whenever L is affine in its top derivatives).
    """
    if jc.order < k + 1:
        raise ChartError(f"need a jet chart of order at least {k + 1}, got order {jc.order}")
    L = se.canonicalize(sp.sympify(L))
    jc.chart.check_expr(L)
    c = dict(c) if c else {}
    entries = classical_momentum_entries(jc, k)
    values = {}
    by_key = {}
    for r in range(k, -1, -1):
        for (a, I, i), p in entries:
            if len(I) != r:
                continue
            lam = se.differentiate(L, jc.coord(a, mi_plus(I, i)))
            if r < k:
                for j in range(jc.base_dim):
                    lam = lam + total_derivative(jc, by_key[(a, mi_plus(I, i), j)], j)
            lam = lam + c.get((a, I, i), se.ZERO)
            lam = se.canonicalize(lam)
            by_key[(a, I, i)] = lam
            values[p] = lam
    # the c-freedom must not move the symmetrized momenta
    if c:
        for r in range(k + 1):
            for a in range(len(jc.fields)):
                for M in combinations_with_replacement(range(jc.base_dim), r + 1):
                    fam = {}
                    for (a2, I, i), _ in entries:
                        if a2 == a and len(I) == r:
                            fam[(a2, I, i)] = c.get((a2, I, i), se.ZERO)
                    if not se.equals_zero(symmetric_part(fam, a, M)):
                        raise ChartError(
                            f"c-family has nonzero symmetric part at multi-index {M}")
    return values


# ---------------------------------------------------------------------------
# general construction

def multiplier_entries(chart, generators):
    """One multiplier per (generator, increasing direction tuple K) with
    |K| = degree, named p<g> or p<g>_<directions>."""
    m = chart.base_dim
    names = tuple(s.name for s in chart.base_coords)
    out = []
    for g, gen in enumerate(generators, start=1):
        for K in combinations(range(m), gen.degree):
            tail = "_" + "".join(names[j] for j in K) if K else ""
            out.append(((g, K), se.sym(f"p{g}{tail}")))
    return tuple(out)


def _eta_contraction(chart, K):
    """eta_K: contract eta with d/dx^j for j in K, ascending."""
    w = base_volume(chart)
    for j in K:
        w = interior_product(coordinate_field(chart, chart.coords[j]), w)
    return w


def build_general_unified(vp):
    """Unified space Theta = lambda + sum (multiplier) generator ^ eta_K."""
    entries = multiplier_entries(vp.chart, vp.generators)
    multipliers = tuple(s for _, s in entries)
    chart = _extend_chart(vp.chart, multipliers, vp.chart.name + "_unified")
    lift = projection_map(chart, vp.chart)
    theta = pullback(lift, vp.lagrangian_form)
    gens_ext = [pullback(lift, g) for g in vp.generators]
    for (g, K), p in entries:
        theta = theta + wedge(gens_ext[g - 1], _eta_contraction(chart, K)).scaled(p)
    dropped = tuple(vp.drop)
    reduced, proj = _reduced(chart, set(dropped), vp.chart.name + "_dual")
    return UnifiedSpace(kind="general", chart=chart, theta=theta,
                        reduced_chart=reduced, projection=proj, dropped=dropped,
                        multipliers=multipliers, jet=vp.jet,
                        lagrangian=None)


# ---------------------------------------------------------------------------
# Herglotz construction

def build_herglotz_unified(jc, L):
    """Unified space for the Herglotz (action-dependent) problem.

    The first-order jet chart is extended with action coordinates z^i, one
    momentum per field and direction, and the scale multiplier mu; the
    projection drops the velocity coordinates.
    """
    if jc.order != 1:
        raise ChartError("the Herglotz construction starts from a first-order jet chart")
    m = jc.base_dim
    names = jc.base_names
    z_syms = (se.sym("z"),) if m == 1 else tuple(se.sym(f"z{i + 1}") for i in range(m))
    entries = classical_momentum_entries(jc, 0)
    momenta = tuple(s for _, s in entries)
    mu = se.sym("mu")
    L = se.canonicalize(sp.sympify(L))
    ext_coords = z_syms + momenta + (mu,)
    chart = _extend_chart(jc.chart, ext_coords, jc.chart.name + "_herglotz")
    chart.check_expr(L)  # L may involve the action coordinates z
    lift = projection_map(chart, jc.chart)
    etas = base_volume_contractions(chart)
    eta = base_volume(chart)
    dz_part = zero_form(chart, m)
    for i, z in enumerate(z_syms):
        dz_part = dz_part + wedge(d_coord(chart, z), etas[i])
    theta = dz_part
    for (a, I, i), p in entries:
        theta = theta + wedge(pullback(lift, contact_form(jc, a, I)), etas[i]).scaled(p)
    theta = theta - (dz_part - wedge(scalar_form(chart, L), eta)).scaled(mu)
    dropped = tuple(s for _, I, s in jc.entries if len(I) == 1)
    reduced, proj = _reduced(chart, set(dropped), jc.chart.name + "_herglotz_dual")
    extras = tuple(("z", z) for z in z_syms) + (("mu", mu),)
    return UnifiedSpace(kind="herglotz", chart=chart, theta=theta,
                        reduced_chart=reduced, projection=proj, dropped=dropped,
                        multipliers=momenta, jet=jc, lagrangian=L,
                        momentum_entries=entries, extras=extras)


# ---------------------------------------------------------------------------
# compatibility

@dataclass
class CompatibilityReport:
    compatible: bool
    witnesses: list = field(default_factory=list)  # (Z, Y or None, DiffForm)


def check_compatibility(us):
    """The two conditions for the projected Hamiltonian picture to exist:
    Theta must not contain differentials of dropped coordinates
    (Z . Theta = 0), and its Lie derivatives along dropped directions must be
    horizontal (Y . (L_Z Theta) = 0 for every fiber direction Y)."""
    witnesses = []
    fiber_fields = [coordinate_field(us.chart, s) for s in us.chart.fiber_coords]
    for Z in us.vertical_fields:
        r1 = interior_product(Z, us.theta)
        if not r1.is_zero():
            witnesses.append((Z, None, r1))
        r2 = lie_derivative(Z, us.theta)
        for Y in fiber_fields:
            ry = interior_product(Y, r2)
            if not ry.is_zero():
                witnesses.append((Z, Y, ry))
    return CompatibilityReport(compatible=not witnesses, witnesses=witnesses)
