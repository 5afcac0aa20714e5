"""Jet charts, multi-indices, contact forms, total derivatives."""

import pytest
import sympy as sp

import jetform.symexpr as se
from jetform.cartan import d_coord, exterior_derivative, render_form, wedge
from jetform.errors import ChartError, OrderOverflowError
from jetform.jets import (all_multi_indices, build_jet_chart, contact_form,
                          contact_forms, derivative_name, identify_coordinates,
                          mi, mi_multiplicity, mi_order, mi_plus,
                          mi_splittings, symmetric_part, total_derivative)


def test_multi_index_normal_form():
    assert mi((1, 0)) == (0, 1)
    assert mi(()) == ()
    assert mi_order((0, 0, 1)) == 3
    assert mi_plus((0,), 1) == (0, 1)
    assert mi_multiplicity((0, 0, 1), 0) == 2
    assert mi_multiplicity((0, 0, 1), 1) == 1


def test_mi_splittings():
    # ways to write M as I + 1_j
    assert set(mi_splittings((0, 1))) == {((1,), 0), ((0,), 1)}
    assert set(mi_splittings((0, 0))) == {((0,), 0)}


def test_all_multi_indices_counts():
    # base dim 2: orders 0,1,2 give 1 + 2 + 3 index tuples
    idx = all_multi_indices(2, 2)
    assert len(idx) == 6
    assert all(tuple(sorted(I)) == I for I in idx)


def test_derivative_names():
    assert derivative_name("u", (), ("t", "x")) == "u"
    assert derivative_name("u", (0, 1), ("t", "x")) == "u_tx"
    assert derivative_name("u", (1, 1), ("t", "x")) == "u_xx"


def test_default_charts():
    jc = build_jet_chart(("u",), 2, 2)
    assert [s.name for s in jc.chart.coords] == \
        ["t", "x", "u", "u_t", "u_x", "u_tt", "u_tx", "u_xx"]
    assert [s.name for s in jc.coords_of_order(2)] == ["u_tt", "u_tx", "u_xx"]
    assert jc.coord(0, (0, 1)).name == "u_tx"
    assert jc.info(jc.coord(0, ())) == (0, ())


def test_two_fields_one_dim():
    jc = build_jet_chart(("x1", "x2"), 1, 1)
    assert [s.name for s in jc.chart.coords] == ["t", "x1", "x2", "x1_t", "x2_t"]


def test_contact_form_display():
    jc = build_jet_chart(("u",), 2, 2)
    assert render_form(contact_form(jc, 0, ())) == "-u_t*d(t) - u_x*d(x) + d(u)"
    assert render_form(contact_form(jc, 0, (0,))) == \
        "-u_tt*d(t) - u_tx*d(x) + d(u_t)"


def test_contact_forms_cover_all_but_top_order():
    jc = build_jet_chart(("u",), 2, 2)
    assert len(contact_forms(jc)) == 3  # orders 0 and 1 only


def test_total_derivative_basics():
    jc = build_jet_chart(("u",), 1, 2)
    t = jc.chart.coords[0]
    u = jc.coord(0, ())
    ut = jc.coord(0, (0,))
    utt = jc.coord(0, (0, 0))
    assert se.equal(total_derivative(jc, u**2, 0), 2*u*ut)
    assert se.equal(total_derivative(jc, t*ut, 0), ut + t*utt)


def test_total_derivative_overflow():
    jc = build_jet_chart(("u",), 1, 1)
    ut = jc.coord(0, (0,))
    with pytest.raises(OrderOverflowError):
        total_derivative(jc, ut, 0)


def test_total_derivative_commutes_on_scalars():
    # D_t D_x f = D_x D_t f for f on J^1 inside J^3
    jc = build_jet_chart(("u",), 2, 3)
    u = jc.coord(0, ())
    ut = jc.coord(0, (0,))
    f = u**2 * ut
    a = total_derivative(jc, total_derivative(jc, f, 0), 1)
    b = total_derivative(jc, total_derivative(jc, f, 1), 0)
    assert se.equals_zero(se.canonicalize(a - b))


def test_symmetric_part_average():
    # values keyed (alpha, I, i); the (0,1) slot averages the two orderings
    p12, p21 = se.sym("a"), se.sym("b")
    values = {(0, (0,), 1): p12, (0, (1,), 0): p21}
    got = symmetric_part(values, 0, (0, 1))
    assert se.equals_zero(se.canonicalize(got - (p12 + p21)/2))
    # unique splitting is the identity
    values = {(0, (0,), 0): p12}
    assert se.equal(symmetric_part(values, 0, (0, 0)), p12)


def test_structure_equation():
    # d theta^u = dt wedge theta^u_t + dx wedge theta^u_x on J^2
    jc = build_jet_chart(("u",), 2, 2)
    th = contact_form(jc, 0, ())
    dth = exterior_derivative(th)
    dt = d_coord(jc.chart, jc.chart.coords[0])
    dx = d_coord(jc.chart, jc.chart.coords[1])
    rhs = wedge(dt, contact_form(jc, 0, (0,))) + \
        wedge(dx, contact_form(jc, 0, (1,)))
    assert (dth - rhs).is_zero()


def test_identify_coordinates_restricts_chart():
    full = build_jet_chart(("u",), 2, 2)
    uxx = full.coord(0, (1, 1))
    utt = full.coord(0, (0, 0))
    jc = identify_coordinates(full, {uxx: utt})
    assert [s.name for s in jc.chart.coords] == \
        ["t", "x", "u", "u_t", "u_x", "u_tt", "u_tx"]
    fullc, emb = jc.identification
    assert fullc is full
    assert se.equal(emb.mapping()[uxx], utt)


def test_identified_contact_forms_pull_back():
    full = build_jet_chart(("u",), 2, 2)
    uxx = full.coord(0, (1, 1))
    utt = full.coord(0, (0, 0))
    jc = identify_coordinates(full, {uxx: utt})
    # theta_x picks up the identified coefficient
    assert render_form(contact_form(jc, 0, (1,))) == \
        "-u_tx*d(t) - u_tt*d(x) + d(u_x)"


def test_identify_rejects_bad_targets():
    full = build_jet_chart(("u",), 2, 2)
    t = full.chart.coords[0]
    # base coordinates are not derivative coordinates
    with pytest.raises(ChartError):
        identify_coordinates(full, {t: full.coord(0, ())})
    # a target may not mention a coordinate being removed
    uxx = full.coord(0, (1, 1))
    utt = full.coord(0, (0, 0))
    with pytest.raises(ChartError):
        identify_coordinates(full, {uxx: utt, utt: full.coord(0, ())})


def test_identify_rejects_nested():
    full = build_jet_chart(("u",), 2, 2)
    uxx = full.coord(0, (1, 1))
    utt = full.coord(0, (0, 0))
    jc = identify_coordinates(full, {uxx: utt})
    with pytest.raises(ChartError):
        identify_coordinates(jc, {jc.coord(0, (0, 1)): utt})
