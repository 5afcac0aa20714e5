"""The constraint pipeline: first constraint submanifold, factorization of
the phase-space form through the projection, Hamilton equation extraction,
consistency constraints, and the iterative algorithm that restricts until
the equations close.

Submanifolds are kept in solved form: a subset of ambient coordinates is
retained and the rest are expressed as rational functions of them.  All
eliminations are affine; a constraint that is not affine in the available
unknowns aborts with a diagnostic rather than attempting radical solving.

Rank decisions (validity of a complement, greedy complement construction)
are made at a generic point: a fixed-seed random rational substitution,
resampled if it lands on a pole.
"""

import random
from dataclasses import dataclass

import sympy as sp

from . import symexpr as se
from .cartan import (Chart, ChartMap, DiffForm, VectorField, coefficient_equations,
                     coordinate_field, exterior_derivative, interior_product,
                     lie_derivative, pullback)
from .errors import (ChartError, InconsistentError, IncompatibleError,
                     NonAffineError, NotBasicError, SingularSystemError)
from .symexpr import solve_affine
from .unified import check_compatibility


@dataclass(frozen=True)
class SubmanifoldChart:
    """A graph submanifold: retained ambient coordinates plus solved
    expressions (over the retained ones) for the eliminated coordinates."""

    ambient: Chart
    retained: tuple
    solved: tuple  # ((Symbol, Expr) ...), ambient coordinate order
    chart: Chart
    embedding: ChartMap

    @classmethod
    def make(cls, ambient, solved, name):
        solved = dict(solved)
        for s in solved:
            ambient.index(s)
            if ambient.is_base(s):
                raise ChartError(f"cannot solve base coordinate {s}")
        retained = tuple(c for c in ambient.coords if c not in solved)
        kept = set(retained)
        pairs = []
        for c in ambient.coords:
            if c in solved:
                e = se.canonicalize(sp.sympify(solved[c]))
                bad = [s for s in se.free_symbols(e)
                       if s not in kept and s not in ambient.params]
                if bad:
                    raise ChartError(
                        f"solved value for {c} depends on eliminated coordinates {bad}")
                pairs.append((c, e))
        chart = Chart(name, retained, ambient.base_dim, params=ambient.params)
        assignment = {c: c for c in retained}
        assignment.update(pairs)
        emb = ChartMap.make(chart, ambient, assignment)
        return cls(ambient=ambient, retained=retained, solved=tuple(pairs),
                   chart=chart, embedding=emb)

    @property
    def dim(self):
        return len(self.retained)

    def solved_map(self):
        return dict(self.solved)


@dataclass(frozen=True)
class EquationSystem:
    """Residual forms per direction, plus their flattened coefficients."""

    equations: tuple  # ((VectorField, DiffForm) ...)
    scalar_equations: tuple


@dataclass(frozen=True)
class HamiltonianData:
    """The factored form on the projected submanifold C, with the scalar
    Hamiltonian read off the base-volume coefficient of theta_h = -H eta + ..."""

    C: SubmanifoldChart
    theta_h: DiffForm
    hamiltonian: sp.Expr


@dataclass(frozen=True)
class ConstraintLevel:
    P: SubmanifoldChart
    C: SubmanifoldChart
    ham: HamiltonianData
    equations: EquationSystem
    new_constraints: tuple


@dataclass(frozen=True)
class ConstraintReport:
    levels: tuple
    terminated: bool
    final_index: int
    lift_fields: tuple
    lift_forms: tuple

    @property
    def final(self):
        return self.levels[self.final_index]


def constraint_rows(us):
    """The defining equations of the first constraint submanifold: for each
    projection-vertical Z, the coefficients of L_Z Theta and of Z . Theta."""
    rows = []
    for Z in us.vertical_fields:
        rows.extend(coefficient_equations(lie_derivative(Z, us.theta)))
        rows.extend(coefficient_equations(interior_product(Z, us.theta)))
    return rows


def first_constraint_manifold(us):
    """Solve the constraint rows affinely, eliminating dropped coordinates
    first, then multipliers."""
    rows = constraint_rows(us)
    res = solve_affine(rows, list(us.solve_unknowns))
    if res.residual_constraints:
        shown = ", ".join(se.render(r) for r in res.residual_constraints)
        raise InconsistentError(
            f"constraint equations leave unsolvable residuals: {shown}")
    return SubmanifoldChart.make(us.chart, res.solved, us.chart.name + "_P0")


def factor_through_projection(us, P):
    """Push the restricted form down along the projection.

    The pullback of Theta to P must neither contain differentials of the
    coordinates the projection forgets nor depend on them through its
    coefficients or through the solved expressions for projected coordinates;
    any violation raises NotBasicError with the offending item.
    """
    theta0 = pullback(P.embedding, us.theta)
    down = set(us.reduced_chart.coords)
    vertical = [c for c in P.retained if c not in down]
    vset = set(vertical)
    down_solved = []
    for s, e in P.solved:
        if s not in down:
            continue
        bad = vset.intersection(se.free_symbols(e))
        if bad:
            raise NotBasicError(
                f"projected coordinate {s} is solved through {sorted(b.name for b in bad)}")
        down_solved.append((s, e))
    for idx, coeff in theta0.items():
        syms = [P.chart.coords[i] for i in idx]
        hit = [s for s in syms if s in vset]
        if hit:
            raise NotBasicError(f"form contains d({hit[0].name})")
        bad = vset.intersection(se.free_symbols(coeff))
        if bad:
            raise NotBasicError(
                f"coefficient {se.render(coeff)} depends on {sorted(b.name for b in bad)}")
    level = P.chart.name.rsplit("_P", 1)
    cname = us.reduced_chart.name + "_C" + (level[1] if len(level) == 2 else "")
    C = SubmanifoldChart.make(us.reduced_chart, down_solved, cname)
    pos = {c: i for i, c in enumerate(C.chart.coords)}
    terms = {tuple(pos[P.chart.coords[i]] for i in idx): coeff
             for idx, coeff in theta0.items()}
    theta_h = DiffForm.make(C.chart, theta0.degree, terms)
    # the defining identity: theta_h pulls back to the restriction of Theta
    proj = ChartMap.make(P.chart, C.chart, {c: c for c in C.chart.coords})
    if pullback(proj, theta_h) != theta0:
        raise NotBasicError("factored form does not pull back to the restriction")
    m = us.base_dim
    H = se.canonicalize(-theta_h.coefficient(tuple(range(m))))
    return HamiltonianData(C=C, theta_h=theta_h, hamiltonian=H)


def field_equations(theta, C, directions):
    """For each direction X, the residual form X . d(theta); a section solves
    the equations when its pullback annihilates every residual."""
    omega = exterior_derivative(theta)
    eqs = []
    scalars = []
    for X in directions:
        r = interior_product(X, omega)
        eqs.append((X, r))
        scalars.extend(coefficient_equations(r))
    return EquationSystem(equations=tuple(eqs), scalar_equations=tuple(scalars))


def fiber_directions(C):
    return [coordinate_field(C.chart, s) for s in C.chart.fiber_coords]


def _derivative_symbol(chart, s):
    name = "D_" + s.name
    taken = {c.name for c in chart.coords} | {p.name for p in chart.params}
    while name in taken:
        name += "_"
    return se.sym(name)


def derivative_rows(es, C):
    """Read 1-form residuals along a section of a 1-dimensional base: each
    fiber differential d(w) becomes a formal derivative symbol D_w.  Returns
    the scalar rows and the {coordinate -> derivative symbol} table."""
    dsyms = {}
    for w in C.chart.fiber_coords:
        dsyms[w] = _derivative_symbol(C.chart, w)
    rows = []
    for _, r in es.equations:
        if r.is_zero():
            continue
        row = se.ZERO
        for idx, coeff in r.items():
            c = C.chart.coords[idx[0]]
            row = row + (coeff if C.chart.is_base(c) else coeff * dsyms[c])
        rows.append(row)
    return rows, dsyms


def consistency_constraints(es, C):
    """New constraints implied by solvability of the equations.

    For a 1-dimensional base the residual 1-forms are read along a section:
    each fiber differential d(w) becomes a formal derivative symbol, and the
    rows of the resulting affine system that retain no derivative content are
    the new constraints.  For a higher-dimensional base only fully algebraic
    residuals (multiples of the base volume form) are collected.
    """
    m = C.chart.base_dim
    out = []
    if m == 1:
        rows, dsyms = derivative_rows(es, C)
        res = solve_affine(rows, list(dsyms.values()))
        out = list(res.residual_constraints)
    else:
        eta_idx = tuple(range(m))
        for _, r in es.equations:
            terms = list(r.items())
            if len(terms) == 1 and terms[0][0] == eta_idx:
                out.append(terms[0][1])
    return out


# ---------------------------------------------------------------------------
# generic-point rank computations

_SEED = 97211


def _sample_points(chart, tries=3):
    rng = random.Random(_SEED)
    pts = []
    for _ in range(tries):
        pt = {}
        for s in chart.coords + chart.params:
            pt[s] = sp.Rational(rng.randint(11, 397), rng.randint(5, 97))
        pts.append(pt)
    return pts


def _eval_at(e, pt):
    v = sp.cancel(sp.sympify(e)).xreplace(pt)
    v = sp.nsimplify(sp.cancel(v))
    if not v.is_rational:
        raise ZeroDivisionError("sample hit a pole")
    return sp.Rational(v)


def _tangent_rows(P, pt):
    """Rows spanning T P at the sample point, in ambient components."""
    n = P.ambient.dim
    rows = []
    for r in P.retained:
        row = [sp.Integer(0)] * n
        row[P.ambient.index(r)] = sp.Integer(1)
        for s, e in P.solved:
            row[P.ambient.index(s)] = _eval_at(sp.diff(e, r), pt)
        rows.append(row)
    return rows


def _field_row(X, P, pt):
    full = dict(pt)
    for s, e in P.solved:
        full[s] = _eval_at(e, pt)
    n = P.ambient.dim
    row = [sp.Integer(0)] * n
    for s, comp in X.components:
        row[P.ambient.index(s)] = _eval_at(comp, full)
    return row


def _complement_context(us, P):
    """Tangent-plus-kernel rows at a generic sample, resampling on poles."""
    last = None
    for pt in _sample_points(P.chart):
        try:
            rows = _tangent_rows(P, pt)
            for v in us.dropped:
                row = [sp.Integer(0)] * us.chart.dim
                row[us.chart.index(v)] = sp.Integer(1)
                rows.append(row)
            return pt, rows
        except ZeroDivisionError as exc:
            last = exc
    raise SingularSystemError(f"no generic sample point found: {last}")


def admissible_lift_equations(us, P, V):
    """The forms Z . dTheta restricted to P, for Z spanning a complement of
    T P + ker(projection); a lift of a solution must annihilate them."""
    pt, rows = _complement_context(us, P)
    base_rank = sp.Matrix(rows).rank()
    n = us.chart.dim
    if base_rank + len(V) != n:
        raise SingularSystemError(
            f"complement has {len(V)} fields, expected {n - base_rank}")
    full = sp.Matrix(rows + [_field_row(X, P, pt) for X in V])
    if full.rank() != n:
        raise SingularSystemError("fields do not complete the tangent directions")
    omega = exterior_derivative(us.theta)
    return [pullback(P.embedding, interior_product(Z, omega)) for Z in V]


def default_complement(us, P):
    """Greedy complement of T P + ker(projection) among coordinate fields,
    preferring multiplier directions in chart order, then the rest."""
    pt, rows = _complement_context(us, P)
    M = sp.Matrix(rows)
    rank = M.rank()
    n = us.chart.dim
    skip = set(us.dropped)
    candidates = [c for c in us.multipliers if c not in skip]
    candidates += [c for c in us.chart.coords
                   if c not in skip and c not in set(us.multipliers)]
    picked = []
    for c in candidates:
        if rank == n:
            break
        row = [sp.Integer(0)] * n
        row[us.chart.index(c)] = sp.Integer(1)
        trial = M.col_join(sp.Matrix([row]))
        r = trial.rank()
        if r > rank:
            M, rank = trial, r
            picked.append(coordinate_field(us.chart, c))
    if rank != n:
        raise SingularSystemError("coordinate fields do not span a complement")
    return picked


def run_constraint_algorithm(us, max_iter=16):
    """Iterate restriction and consistency until the equation system closes.

    Levels l = 0, 1, ... each record the submanifold pair (P_l, C_l), the
    factored form with its Hamiltonian, the equations, and the constraints
    discovered at that level; the run terminates when a level adds none.
    """
    rep = check_compatibility(us)
    if not rep.compatible:
        raise IncompatibleError("the phase-space form does not factor",
                                witnesses=tuple(rep.witnesses))
    P = first_constraint_manifold(us)
    levels = []
    terminated = False
    while True:
        l = len(levels)
        ham = factor_through_projection(us, P)
        es = field_equations(ham.theta_h, ham.C, fiber_directions(ham.C))
        try:
            cons = consistency_constraints(es, ham.C)
        except NonAffineError as exc:
            raise NonAffineError(f"level {l}: {exc}", equation=exc.equation) from None
        levels.append(ConstraintLevel(P=P, C=ham.C, ham=ham,
                                      equations=es, new_constraints=tuple(cons)))
        if not cons:
            terminated = True
            break
        if l >= max_iter:
            break
        unknowns = [c for c in reversed(P.retained) if not us.chart.is_base(c)]
        try:
            res = solve_affine(cons, unknowns)
        except NonAffineError as exc:
            raise NonAffineError(f"level {l}: {exc}", equation=exc.equation) from None
        if res.residual_constraints:
            shown = ", ".join(se.render(r) for r in res.residual_constraints)
            raise InconsistentError(f"level {l}: unsatisfiable constraints: {shown}")
        new_solved = dict(res.solved)
        combined = dict(new_solved)
        for s, e in P.solved:
            combined[s] = se.substitute(e, new_solved)
        P_next = SubmanifoldChart.make(us.chart, combined,
                                       f"{us.chart.name}_P{l + 1}")
        if P_next.dim >= P.dim:
            raise InconsistentError(f"level {l}: constraints did not cut the level down")
        P = P_next
    final_index = len(levels) - 1
    fields = default_complement(us, levels[final_index].P)
    forms = admissible_lift_equations(us, levels[final_index].P, fields)
    return ConstraintReport(levels=tuple(levels), terminated=terminated,
                            final_index=final_index, lift_fields=tuple(fields),
                            lift_forms=tuple(forms))
