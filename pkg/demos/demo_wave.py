"""The 1+1 wave equation posed as an exterior ideal, not a Lagrangian.

There is no Lagrangian form at all here: the field equation u_tt = u_xx is
imposed by identifying the two second derivatives on the jet chart and
declaring the contact forms as the variation ideal.  The unified space then
carries one multiplier per generator and base direction, and the constraint
algorithm terminates immediately with the wave dynamics in Hamilton form.
"""

import jetform.symexpr as se
from jetform.cartan import render_form, zero_form
from jetform.constraint import run_constraint_algorithm
from jetform.jets import build_jet_chart, contact_form, identify_coordinates
from jetform.unified import (VariationalProblem, build_general_unified,
                             check_compatibility)


def main():
    full = build_jet_chart(("u",), 2, 2)
    # impose u_xx = u_tt before anything variational happens
    jc = identify_coordinates(full, {full.coord(0, (1, 1)): full.coord(0, (0, 0))})
    print("chart:", ", ".join(c.name for c in jc.chart.coords))

    gens = tuple(contact_form(jc, 0, I) for I in ((), (0,), (1,)))
    for g in gens:
        print("generator:", render_form(g))

    vp = VariationalProblem(chart=jc.chart,
                            lagrangian_form=zero_form(jc.chart, 2),
                            generators=gens,
                            drop=(jc.coord(0, (0, 0)), jc.coord(0, (0, 1))),
                            jet=jc, label="wave")
    us = build_general_unified(vp)
    print()
    print("multipliers:", ", ".join(p.name for p in us.multipliers))
    print("Theta =", render_form(us.theta))
    print("compatible:", check_compatibility(us).compatible)

    rep = run_constraint_algorithm(us)
    lv = rep.levels[0]
    print()
    print("first constraints:")
    for c, e in lv.P.solved:
        print(f"  {c.name} = {se.render(e)}")
    print("theta_h =", render_form(lv.ham.theta_h))
    print()
    print("Hamilton equations:")
    for X, r in lv.equations.equations:
        print(f"  {X.label}: {render_form(r)} = 0")
    print()
    print("no secondary constraints:", lv.new_constraints == ())
    print("admissible lifts recover the dropped derivatives:")
    for X, w in zip(rep.lift_fields, rep.lift_forms):
        print(f"  {X.label}: {render_form(w)} = 0")


if __name__ == "__main__":
    main()
