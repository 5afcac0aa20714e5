"""Damped oscillator from an action-dependent Lagrangian.

L = u_t^2/2 - u^2/2 - gam z depends on the accumulated action z itself, so
the usual momentum form does not close.  The extended space carries z, the
momentum, and a scale multiplier mu; the derived equations show mu evolving
exponentially and feeding the damping term into the momentum equation.
"""

import jetform.symexpr as se
from jetform.cartan import render_form
from jetform.constraint import run_constraint_algorithm
from jetform.jets import build_jet_chart
from jetform.unified import build_herglotz_unified


def main():
    jc = build_jet_chart(("u",), 1, 1, params=("gam",))
    s = dict(jc.chart.symbol_table())
    s.setdefault("z", se.sym("z"))
    L = se.parse_expr("1/2*u_t^2 - 1/2*u^2 - gam*z", s)
    print("L =", se.render(L))

    us = build_herglotz_unified(jc, L)
    print("extended chart:", ", ".join(c.name for c in us.chart.coords))
    print("Theta =", render_form(us.theta))

    rep = run_constraint_algorithm(us)
    lv = rep.levels[0]
    print()
    print("momenta scale with mu:")
    for c, e in lv.P.solved:
        print(f"  {c.name} = {se.render(e)}")
    print("H =", se.render(lv.ham.hamiltonian))
    print()
    print("equations on the projected space:")
    for X, r in lv.equations.equations:
        print(f"  {X.label}: {render_form(r)} = 0")
    print()
    # d(mu) = gam mu dt along solutions, so mu(t) = exp(gam t); dividing the
    # momentum equation p = mu u_t by it leaves u'' + gam u' + u = 0
    print("terminated at level", rep.final_index,
          "with no secondary constraints" if not lv.new_constraints else "")


if __name__ == "__main__":
    main()
