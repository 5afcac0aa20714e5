"""Two masses? No: one mass hanging from two springs joined in series.

The composite system is degenerate (the Lagrangian sees only x1 + x2), so
the constraint algorithm has actual work to do: it finds the force-balance
condition between the two springs as a secondary constraint, and the final
dynamics is the familiar weighted oscillator.  Walks the whole derivation,
then integrates and checks the invariants numerically.
"""

import jetform.symexpr as se
from jetform.cartan import render_form
from jetform.constraint import run_constraint_algorithm
from jetform.dynamo import (compile_report, constraint_drift, energy_drift,
                            integrate_rk4)
from jetform.jets import build_jet_chart
from jetform.unified import build_classical_unified, check_compatibility

PARAMS = {"m": "1", "k1": "2", "k2": "3", "g": "49/5", "l1": "1", "l2": "1"}


def banner(text):
    print()
    print(text)
    print("-" * len(text))


def main():
    jc = build_jet_chart(("x1", "x2"), 1, 1,
                         params=("m", "g", "k1", "k2", "l1", "l2"))
    s = jc.chart.symbol_table()
    L = se.parse_expr(
        "1/2*m*(x1_t + x2_t)^2 + m*g*(x1 + x2)"
        " - 1/2*k1*(x1 - l1)^2 - 1/2*k2*(x2 - l2)^2", s)

    banner("setup")
    print("chart:", ", ".join(c.name for c in jc.chart.coords))
    print("L =", se.render(L))

    us = build_classical_unified(jc, L, 0)
    banner("unified space")
    print("extra momenta:", ", ".join(p.name for p in us.multipliers))
    print("Theta =", render_form(us.theta))
    print("compatible:", check_compatibility(us).compatible)

    rep = run_constraint_algorithm(us)
    for i, lv in enumerate(rep.levels):
        banner(f"level {i}")
        print("P retained:", ", ".join(c.name for c in lv.P.retained))
        for c, e in lv.P.solved:
            print(f"  {c.name} = {se.render(e)}")
        print("H =", se.render(lv.ham.hamiltonian))
        print("theta_h =", render_form(lv.ham.theta_h))
        for X, r in lv.equations.equations:
            print(f"  {X.label}: {render_form(r)} = 0")
        for c in lv.new_constraints:
            print("new constraint:", se.render(c), "= 0")

    banner("admissible lifts")
    for X, w in zip(rep.lift_fields, rep.lift_forms):
        print(f"  {X.label}: {render_form(w)} = 0")
    print("terminated at level", rep.final_index)

    # the secondary constraint fixes x2 in terms of x1; integrate what is left
    banner("numeric run")
    sys_ = compile_report(rep, PARAMS)
    print("state:", ", ".join(c.name for c in sys_.state))
    y0 = (6.0, 13/3, 0.0)  # on the constraint surface: k1(x1-l1) = k2(x2-l2)
    traj = integrate_rk4(sys_, y0, 0.0, 10.0, 1e-3)
    t_end, y_end = traj.samples[-1]
    print(f"t = {t_end:g}:", ", ".join(f"{v:.9f}" for v in y_end))
    print(f"constraint drift {constraint_drift(traj, sys_):.3e}, "
          f"energy drift {energy_drift(traj, sys_):.3e}")


if __name__ == "__main__":
    main()
