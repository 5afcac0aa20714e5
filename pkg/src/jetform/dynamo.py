"""Numeric back end for 1-dimensional bases: solve the Hamilton equation
residuals for explicit first derivatives, compile the right-hand sides, and
integrate with fixed-step classical Runge-Kutta while monitoring constraint
and energy drift.

Floats appear only here.  Parameters cross the symbolic/numeric boundary as
exact rationals substituted once at compile time; each expression is then
turned into a postfix program evaluated on a small stack.
"""

import math
from dataclasses import dataclass

import sympy as sp

from . import symexpr as se
from .constraint import derivative_rows
from .errors import InconsistentError, NumericError, SingularSystemError
from .symexpr import solve_affine

# postfix opcodes
_CONST, _LOAD, _ADD, _MUL, _NEG, _INV, _POWI, _CALL = range(8)

_CALLS = {sp.sin: math.sin, sp.cos: math.cos, sp.exp: math.exp, sp.log: math.log}


def _compile(e, positions):
    """Flatten a sympy expression into a postfix program over the given
    symbol slots.  Only rational powers with integer or half-integer
    exponents occur in canonical expressions."""
    prog = []

    def emit(x):
        if x.is_Symbol:
            try:
                prog.append((_LOAD, positions[x]))
            except KeyError:
                raise NumericError(f"unbound symbol {x} in compiled expression") from None
        elif x.is_Integer or x.is_Rational:
            prog.append((_CONST, float(x)))
        elif x.is_Add:
            for a in x.args:
                emit(a)
            prog.append((_ADD, len(x.args)))
        elif x.is_Mul:
            for a in x.args:
                emit(a)
            prog.append((_MUL, len(x.args)))
        elif x.is_Pow:
            base, k = x.args
            if k.is_Integer:
                emit(base)
                prog.append((_POWI, int(k)))
            elif k == sp.Rational(1, 2):
                emit(base)
                prog.append((_CALL, math.sqrt))
            elif k == sp.Rational(-1, 2):
                emit(base)
                prog.append((_CALL, math.sqrt))
                prog.append((_INV, 0))
            else:
                raise NumericError(f"cannot compile exponent {k}")
        elif x.func in _CALLS and len(x.args) == 1:
            emit(x.args[0])
            prog.append((_CALL, _CALLS[x.func]))
        elif x is sp.E:
            prog.append((_CONST, math.e))
        else:
            raise NumericError(f"cannot compile expression node {x}")

    emit(sp.sympify(e))
    return tuple(prog)


def _run(prog, values):
    stack = []
    push = stack.append
    pop = stack.pop
    for code, arg in prog:
        if code == _LOAD:
            push(values[arg])
        elif code == _CONST:
            push(arg)
        elif code == _MUL:
            v = pop()
            for _ in range(arg - 1):
                v *= pop()
            push(v)
        elif code == _ADD:
            v = pop()
            for _ in range(arg - 1):
                v += pop()
            push(v)
        elif code == _POWI:
            # float ** raises instead of overflowing to inf; keep the sign
            # so the finiteness guard reports the blow-up direction honestly
            b = pop()
            try:
                push(b ** arg)
            except OverflowError:
                push(math.copysign(math.inf, b if arg % 2 else 1.0))
        elif code == _CALL:
            b = pop()
            try:
                push(arg(b))
            except OverflowError:
                push(math.inf)
            except ValueError:
                push(math.nan)
        elif code == _NEG:
            push(-pop())
        else:
            b = pop()
            push(1.0 / b if b else math.nan)
    return stack[0]


@dataclass(frozen=True)
class OdeSystem:
    """Explicit system dy/dt = f(t, y) with drift monitors.

    ``state`` names the slots of y; values[0] is always the time."""

    time: sp.Symbol
    state: tuple
    rhs: tuple           # ((Symbol, Expr) ...) parameter-substituted, state order
    constraints: tuple
    energy: sp.Expr
    _programs: tuple
    _constraint_programs: tuple
    _energy_program: tuple

    def f(self, t, y):
        values = (t,) + tuple(y)
        return tuple(_run(p, values) for p in self._programs)

    def constraint_values(self, t, y):
        values = (t,) + tuple(y)
        return tuple(_run(p, values) for p in self._constraint_programs)

    def energy_value(self, t, y):
        if self._energy_program is None:
            return 0.0
        return _run(self._energy_program, (t,) + tuple(y))


@dataclass(frozen=True)
class Trajectory:
    h: float
    samples: tuple  # ((t, (y...)) ...) on the uniform grid


def _substituted(e, params, state, time):
    e = se.substitute(e, params)
    bad = [s for s in se.free_symbols(e) if s != time and s not in set(state)]
    if bad:
        raise NumericError(f"unbound parameters in numeric expression: "
                           f"{sorted(s.name for s in bad)}")
    return e


def _finish(time, state, rhs_map, constraints, energy, params):
    params = {se.sym(k) if isinstance(k, str) else k: sp.Rational(v)
              for k, v in dict(params).items()}
    pos = {time: 0}
    for i, s in enumerate(state):
        pos[s] = i + 1
    rhs = []
    for s in state:
        e = _substituted(rhs_map[s], params, state, time)
        rhs.append((s, e))
    cons = tuple(_substituted(c, params, state, time) for c in constraints)
    en = _substituted(energy, params, state, time) if energy is not None else None
    return OdeSystem(
        time=time, state=tuple(state), rhs=tuple(rhs), constraints=cons,
        energy=en,
        _programs=tuple(_compile(e, pos) for _, e in rhs),
        _constraint_programs=tuple(_compile(c, pos) for c in cons),
        _energy_program=None if en is None else _compile(en, pos))


def _solve_derivatives(es, C):
    rows, dsyms = derivative_rows(es, C)
    res = solve_affine(rows, list(dsyms.values()))
    if res.residual_constraints:
        shown = ", ".join(se.render(r) for r in res.residual_constraints)
        raise InconsistentError(
            f"equations leave residual constraints ({shown}); "
            "run the constraint algorithm to completion first")
    missing = [w.name for w, d in dsyms.items() if d in res.free_unknowns]
    if missing:
        raise SingularSystemError(
            f"derivative matrix is singular: no equation determines {missing}")
    return {w: res.solved[d] for w, d in dsyms.items()}


def compile_ode(es, C, params, constraints=(), energy=None):
    """Solve the residual forms of a level for the first derivatives of its
    fiber coordinates and compile the explicit system.

    ``constraints`` and ``energy`` are carried along for monitoring; they are
    not used by the integration itself.
    """
    if C.chart.base_dim != 1:
        raise NumericError("numeric integration requires base dimension 1")
    time = C.chart.base_coords[0]
    rhs_map = _solve_derivatives(es, C)
    return _finish(time, C.chart.fiber_coords, rhs_map, constraints, energy, params)


def compile_report(report, params):
    """Compile the whole constraint run: state is the fiber chart of the
    first projected level, coordinates solved away at deeper levels evolve by
    the chain rule through their solved expressions, every constraint found
    along the way becomes a monitor, and the final Hamiltonian is the energy.
    """
    final = report.final
    C0 = report.levels[0].C
    if C0.chart.base_dim != 1:
        raise NumericError("numeric integration requires base dimension 1")
    time = C0.chart.base_coords[0]
    rhs_map = dict(_solve_derivatives(final.equations, final.C))
    solved_f = final.C.solved_map()
    for s in C0.chart.fiber_coords:
        if s in rhs_map:
            continue
        if s not in solved_f:
            raise SingularSystemError(f"no equation or solved value for {s}")
        e = solved_f[s]
        d = se.differentiate(e, time)
        for w, dw in rhs_map.items():
            d = d + se.differentiate(e, w) * dw
        rhs_map[s] = se.canonicalize(d)
    constraints = []
    for level in report.levels:
        constraints.extend(level.new_constraints)
    return _finish(time, C0.chart.fiber_coords, rhs_map, tuple(constraints),
                   final.ham.hamiltonian, params)


def sample_count(t0, t1, h):
    # a tiny relative guard keeps near-integer ratios exact in floats
    return int(math.floor((t1 - t0) / h + 1e-8)) + 1


def integrate_rk4(sys, y0, t0, t1, h):
    """Classical fixed-step 4th order Runge-Kutta on the uniform grid
    t0, t0+h, ..., with floor((t1-t0)/h)+1 samples including the start."""
    if h <= 0:
        raise NumericError("step size must be positive")
    if len(y0) != len(sys.state):
        raise NumericError(
            f"initial state has {len(y0)} entries, expected {len(sys.state)}")
    y = tuple(float(v) for v in y0)
    for c, v in zip(sys.constraints, sys.constraint_values(t0, y)):
        if abs(v) > 1e-12:
            raise NumericError(
                f"initial state violates constraint {se.render(c)} by {v:.3e}")
    n = sample_count(t0, t1, h) - 1
    f = sys.f
    samples = [(t0, y)]
    for i in range(n):
        t = t0 + i * h
        k1 = f(t, y)
        k2 = f(t + h / 2, tuple(a + h / 2 * b for a, b in zip(y, k1)))
        k3 = f(t + h / 2, tuple(a + h / 2 * b for a, b in zip(y, k2)))
        k4 = f(t + h, tuple(a + h * b for a, b in zip(y, k3)))
        y = tuple(a + h / 6 * (b + 2 * c + 2 * d + e)
                  for a, b, c, d, e in zip(y, k1, k2, k3, k4))
        if not all(math.isfinite(v) for v in y):
            raise NumericError(f"non-finite value at step {i + 1}")
        samples.append((t0 + (i + 1) * h, y))
    return Trajectory(h=h, samples=tuple(samples))


def constraint_drift(traj, sys):
    """Maximum absolute constraint value over the trajectory."""
    worst = 0.0
    for t, y in traj.samples:
        for v in sys.constraint_values(t, y):
            worst = max(worst, abs(v))
    return worst


def energy_drift(traj, sys):
    """Maximum deviation of the energy monitor from its initial value."""
    t0, y0 = traj.samples[0]
    e0 = sys.energy_value(t0, y0)
    worst = 0.0
    for t, y in traj.samples:
        worst = max(worst, abs(sys.energy_value(t, y) - e0))
    return worst


def trajectory_csv(traj, sys):
    """CSV text: header t,<state names>, 17 significant digits, LF endings."""
    lines = ["t," + ",".join(s.name for s in sys.state)]
    for t, y in traj.samples:
        lines.append(",".join("%.17g" % v for v in (t,) + tuple(y)))
    return "\n".join(lines) + "\n"
