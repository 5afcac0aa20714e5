"""Command line front end: problem-file loading, pipeline orchestration, and
deterministic report emission.

Subcommands: ``derive`` runs the compatibility check and the constraint
algorithm and writes a JSON and a text report; ``integrate`` additionally
compiles the final equations and writes a CSV trajectory; ``check`` runs the
compatibility check only.  Exit codes: 0 success, 1 I/O or parse failure,
2 incompatibility, 3 pipeline failure, 4 numeric failure.

Reports depend only on the input bytes: orderings are canonical and seeds
fixed, so two runs on the same file are byte-identical.
"""

import argparse
import json
import sys
from dataclasses import dataclass
from importlib import resources

import jsonschema
import sympy as sp

from . import symexpr as se
from .cartan import parse_form, render_form, zero_form
from .constraint import run_constraint_algorithm
from .dynamo import (compile_report, constraint_drift, energy_drift,
                     integrate_rk4, trajectory_csv)
from .errors import (ExprParseError, IncompatibleError, InconsistentError,
                     JetformError, NonAffineError, NotBasicError, NumericError,
                     ProblemFormatError, SingularSystemError, UnknownSymbolError)
from .jets import build_jet_chart, identify_coordinates
from .unified import (VariationalProblem, build_classical_unified,
                      build_general_unified, build_herglotz_unified,
                      check_compatibility)

CONVENTIONS = {
    "interior_product": "first-slot contraction: (d/dx) . (d(x)/\\d(y)) = d(y)",
    "base_volume": "eta = d(x^1)/\\.../\\d(x^m) in base order; eta_i = (d/dx^i) . eta",
    "classical_form": "Theta = L*eta + sum p^{I,i} theta^alpha_I /\\ eta_i",
    "general_form": "Theta = lambda + sum p_{g,K} g /\\ eta_K, |K| = deg g, K increasing",
    "herglotz_form": "Theta = dz^i/\\eta_i + p^i_alpha theta^alpha/\\eta_i - mu*(dz^i/\\eta_i - L*eta)",
    "hamiltonian": "theta_h = -H*eta + (momentum terms); H is reported with this sign",
    "elimination": "constraints are solved for dropped coordinates first, then multipliers, each block from the last coordinate backwards",
}


@dataclass
class Problem:
    """A loaded problem file plus the chart machinery built from it."""

    kind: str
    label: str
    raw: dict
    jet: object
    order: int
    lagrangian: object
    lagrangian_form: object
    generators: tuple
    drop: tuple
    parameters: dict  # Symbol -> Rational or None
    numeric: dict


def _fail(msg):
    raise ProblemFormatError(msg)


def _schema():
    text = resources.files("jetform.schema").joinpath("problem.schema.json").read_text()
    return json.loads(text)


def _rational(v, where):
    try:
        if isinstance(v, str):
            return sp.Rational(v)
        if isinstance(v, int):
            return sp.Integer(v)
        if isinstance(v, float):
            return sp.Rational(v)
    except (TypeError, ValueError) as exc:
        _fail(f"{where}: not a rational value: {v!r} ({exc})")
    _fail(f"{where}: not a rational value: {v!r}")


def load_problem(path):
    """Parse and validate a problem file; build its jet chart and forms."""
    try:
        with open(path, "rb") as fh:
            data = json.load(fh)
    except OSError as exc:
        _fail(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        _fail(f"{path}: invalid JSON: {exc}")
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "$" + "".join(f"[{p!r}]" for p in e.absolute_path)
        _fail(f"{path}: schema violation at {where}: {e.message}")

    kind = data["kind"]
    base_dim = data["base_dim"]
    fields = tuple(data["fields"])
    params = {}
    for name, value in sorted(data.get("parameters", {}).items()):
        params[se.sym(name)] = None if value is None else _rational(
            value, f"parameters.{name}")
    if kind == "herglotz":
        if data.get("order", 1) != 1:
            _fail("herglotz problems are first order")
        order = 1
        jet_order = 1
    elif kind == "classical":
        order = data["order"]
        jet_order = order + 1
    else:
        order = data["order"]
        jet_order = order
    try:
        jc = build_jet_chart(fields, base_dim, jet_order,
                             params=tuple(params),
                             base_names=tuple(data["base_names"]) if "base_names" in data else None)
    except JetformError as exc:
        _fail(f"{path}: {exc}")

    if "identify" in data:
        if kind != "general":
            _fail("identify is only supported for general problems")
        table = {}
        names = {c.name: c for c in jc.chart.coords}
        for cname, expr in sorted(data["identify"].items()):
            if cname not in names:
                _fail(f"identify: unknown coordinate {cname}")
            try:
                table[names[cname]] = se.parse_expr(expr, jc.chart.symbol_table())
            except ExprParseError as exc:
                _fail(f"identify.{cname}: {exc}")
        try:
            jc = identify_coordinates(jc, table)
        except JetformError as exc:
            _fail(f"identify: {exc}")

    # z coordinates may appear in a Herglotz Lagrangian before the extended
    # chart exists, so parse against an augmented symbol table
    table = jc.chart.symbol_table()
    if kind == "herglotz":
        znames = ("z",) if base_dim == 1 else tuple(f"z{i+1}" for i in range(base_dim))
        for zn in znames:
            table.setdefault(zn, se.sym(zn))

    lagrangian = None
    lagrangian_form = None
    generators = ()
    if kind in ("classical", "herglotz"):
        try:
            lagrangian = se.parse_expr(data["lagrangian"], table)
        except ExprParseError as exc:
            _fail(f"lagrangian: {exc}")
    else:
        lf = data.get("lagrangian_form")
        try:
            lagrangian_form = (zero_form(jc.chart, base_dim) if lf is None
                               else parse_form(lf, jc.chart))
        except ExprParseError as exc:
            _fail(f"lagrangian_form: {exc}")
        gens = []
        for i, g in enumerate(data["generators"]):
            try:
                gens.append(parse_form(g, jc.chart))
            except ExprParseError as exc:
                _fail(f"generators[{i}]: {exc}")
        generators = tuple(gens)

    drop = ()
    if "projection_drop" in data:
        names = {c.name: c for c in jc.chart.coords}
        missing = [n for n in data["projection_drop"] if n not in names]
        if missing:
            _fail(f"projection_drop: unknown coordinates {missing}")
        drop = tuple(names[n] for n in data["projection_drop"])
    elif kind == "general":
        _fail("general problems must specify projection_drop")

    return Problem(kind=kind, label=data.get("label", ""), raw=data, jet=jc,
                   order=order, lagrangian=lagrangian,
                   lagrangian_form=lagrangian_form, generators=generators,
                   drop=drop, parameters=params,
                   numeric=data.get("numeric"))


def serialize_problem(p):
    """Canonical dict for a loaded problem; reloading it rebuilds the same
    chart and the same phase-space form."""
    out = {"schema_version": 1, "kind": p.kind}
    if p.label:
        out["label"] = p.label
    out["base_dim"] = p.jet.base_dim
    out["base_names"] = list(p.jet.base_names)
    out["fields"] = list(p.jet.fields)
    if p.kind != "herglotz":
        out["order"] = p.order
    if p.lagrangian is not None:
        out["lagrangian"] = se.render(p.lagrangian)
    if p.kind == "general":
        if not p.lagrangian_form.is_zero():
            out["lagrangian_form"] = render_form(p.lagrangian_form)
        out["generators"] = [render_form(g) for g in p.generators]
        ident = p.jet.identification
        if ident is not None:
            full, emb = ident
            restricted = set(p.jet.chart.coords)
            out["identify"] = {s.name: se.render(e) for s, e in emb.mapping().items()
                               if s not in restricted}
    if p.drop:
        out["projection_drop"] = [c.name for c in p.drop]
    if p.parameters:
        out["parameters"] = {s.name: (None if v is None else str(v))
                             for s, v in p.parameters.items()}
    if p.numeric:
        out["numeric"] = p.numeric
    return out


def build_unified(p):
    if p.kind == "classical":
        us = build_classical_unified(p.jet, p.lagrangian, p.order)
    elif p.kind == "herglotz":
        us = build_herglotz_unified(p.jet, p.lagrangian)
    else:
        vp = VariationalProblem(chart=p.jet.chart,
                                lagrangian_form=p.lagrangian_form,
                                generators=p.generators, drop=p.drop,
                                label=p.label, jet=p.jet)
        us = build_general_unified(vp)
    if p.drop and p.kind != "general":
        if tuple(p.drop) != tuple(us.dropped):
            _fail("projection_drop must list the top-order derivative coordinates "
                  f"({[c.name for c in us.dropped]}) for kind {p.kind}")
    return us


# ---------------------------------------------------------------------------
# report assembly

def _submanifold_dict(S):
    return {"retained": [c.name for c in S.retained],
            "solved": [[s.name, se.render(e)] for s, e in S.solved]}


def _level_dict(i, lv):
    return {
        "index": i,
        "P": _submanifold_dict(lv.P),
        "C": _submanifold_dict(lv.C),
        "theta_h": render_form(lv.ham.theta_h),
        "hamiltonian": se.render(lv.ham.hamiltonian),
        "equations": [[X.label, render_form(r)] for X, r in lv.equations.equations],
        "new_constraints": [se.render(c) for c in lv.new_constraints],
    }


def derive_report(p, us, rep):
    return {
        "schema_version": 1,
        "tool": "jetform derive",
        "problem": serialize_problem(p),
        "conventions": CONVENTIONS,
        "compatible": True,
        "unified": {
            "chart": [c.name for c in us.chart.coords],
            "base_dim": us.base_dim,
            "theta": render_form(us.theta),
            "dropped": [c.name for c in us.dropped],
            "multipliers": [c.name for c in us.multipliers],
        },
        "levels": [_level_dict(i, lv) for i, lv in enumerate(rep.levels)],
        "terminated": rep.terminated,
        "final_index": rep.final_index,
        "lift": {
            "fields": [X.label for X in rep.lift_fields],
            "forms": [render_form(w) for w in rep.lift_forms],
        },
    }


def _text_submanifold(tag, d, lines):
    lines.append(f"{tag} retained: " + " ".join(d["retained"]))
    if d["solved"]:
        lines.append(f"{tag} solved:")
        for name, expr in d["solved"]:
            lines.append(f"  {name} = {expr}")


def text_report(doc):
    lines = [doc["tool"], "=" * len(doc["tool"]), ""]
    prob = doc["problem"]
    label = prob.get("label", "")
    head = prob["kind"] + (f" ({label})" if label else "")
    lines.append(f"problem: {head}")
    lines.append("conventions:")
    for k, v in doc["conventions"].items():
        lines.append(f"  {k}: {v}")
    lines.append("")
    if not doc["compatible"]:
        lines.append("compatibility: FAILED")
        for w in doc["witnesses"]:
            lines.append("  " + w)
        return "\n".join(lines) + "\n"
    uni = doc["unified"]
    lines.append("unified chart: " + " ".join(uni["chart"]))
    lines.append("dropped by projection: " + " ".join(uni["dropped"]))
    lines.append("theta = " + uni["theta"])
    lines.append("compatibility: ok")
    for lv in doc["levels"]:
        i = lv["index"]
        lines.append("")
        lines.append(f"level {i}")
        lines.append("-" * 8)
        _text_submanifold(f"P{i}", lv["P"], lines)
        _text_submanifold(f"C{i}", lv["C"], lines)
        lines.append(f"theta_h = {lv['theta_h']}")
        lines.append(f"H = {lv['hamiltonian']}")
        lines.append("equations:")
        for label, r in lv["equations"]:
            lines.append(f"  ({label}): {r} = 0")
        if lv["new_constraints"]:
            lines.append("new constraints:")
            for c in lv["new_constraints"]:
                lines.append(f"  {c} = 0")
        else:
            lines.append("new constraints: none")
    lines.append("")
    lines.append(f"terminated: {'yes' if doc['terminated'] else 'no (iteration limit)'}")
    lines.append(f"final level: {doc['final_index']}")
    lines.append("lift complement: " + (" ".join(doc["lift"]["fields"]) or "(empty)"))
    for w in doc["lift"]["forms"]:
        lines.append(f"  lift form: {w} = 0")
    if "numeric" in doc:
        num = doc["numeric"]
        lines.append("")
        lines.append("numeric run")
        lines.append("-" * 11)
        lines.append("state: " + " ".join(num["state"]))
        lines.append(f"samples: {num['samples']}   h = {num['h']:.17g}")
        lines.append(f"constraint drift: {num['constraint_drift']:.17g}")
        lines.append(f"energy drift: {num['energy_drift']:.17g}")
        tail = " ".join("%.17g" % v for v in num["final_state"])
        lines.append(f"final t = {num['final_t']:.17g}   state: {tail}")
    return "\n".join(lines) + "\n"


def incompatible_report(p, us, exc):
    witnesses = []
    for Z, Y, w in exc.witnesses:
        who = Z.label if Y is None else f"{Z.label} against {Y.label}"
        witnesses.append(f"{who}: {render_form(w)}")
    return {
        "schema_version": 1,
        "tool": "jetform derive",
        "problem": serialize_problem(p),
        "conventions": CONVENTIONS,
        "compatible": False,
        "witnesses": witnesses,
    }


def json_text(doc):
    return json.dumps(doc, indent=2, ensure_ascii=True) + "\n"


def _write(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _emit(stem, doc, fmt):
    if fmt in ("json", "both"):
        _write(stem + ".json", json_text(doc))
    if fmt in ("text", "both"):
        _write(stem + ".txt", text_report(doc))


def _stem(args):
    if args.out:
        return args.out
    name = args.problem
    if name.endswith(".json"):
        name = name[:-5]
    return name + "_report"


def cmd_check(args):
    p = load_problem(args.problem)
    us = build_unified(p)
    rep = check_compatibility(us)
    if rep.compatible:
        print("compatible")
        return 0
    print("incompatible:")
    for Z, Y, w in rep.witnesses:
        who = Z.label if Y is None else f"{Z.label} against {Y.label}"
        print(f"  {who}: {render_form(w)}")
    return 2


def _derive(args):
    p = load_problem(args.problem)
    us = build_unified(p)
    comp = check_compatibility(us)
    if not comp.compatible:
        exc = IncompatibleError("incompatible", witnesses=tuple(comp.witnesses))
        doc = incompatible_report(p, us, exc)
        _emit(_stem(args), doc, args.format)
        print(text_report(doc), end="")
        return p, us, None, doc, 2
    rep = run_constraint_algorithm(us, max_iter=args.max_iter)
    doc = derive_report(p, us, rep)
    return p, us, rep, doc, 0


def cmd_derive(args):
    p, us, rep, doc, code = _derive(args)
    if code:
        return code
    _emit(_stem(args), doc, args.format)
    print(text_report(doc), end="")
    return 0


def cmd_integrate(args):
    p, us, rep, doc, code = _derive(args)
    if code:
        return code
    doc["tool"] = "jetform integrate"
    if us.base_dim != 1:
        raise NumericError("numeric integration requires base dimension 1")
    if p.numeric is None:
        _fail("problem file has no numeric block")
    params = {}
    for s, v in p.parameters.items():
        if v is None:
            _fail(f"parameter {s.name} has no value")
        params[s] = v
    sys_ = compile_report(rep, params)
    num = p.numeric
    initial = dict(num["initial"])
    y0 = []
    for s in sys_.state:
        if s.name not in initial:
            _fail(f"numeric.initial is missing {s.name}")
        y0.append(float(sp.Rational(str(initial.pop(s.name)))))
    if initial:
        _fail(f"numeric.initial names unknown coordinates {sorted(initial)}")
    traj = integrate_rk4(sys_, tuple(y0), float(num["t0"]), float(num["t1"]),
                         float(num["h"]))
    tf, yf = traj.samples[-1]
    doc["numeric"] = {
        "state": [s.name for s in sys_.state],
        "h": traj.h,
        "samples": len(traj.samples),
        "constraint_drift": constraint_drift(traj, sys_),
        "energy_drift": energy_drift(traj, sys_),
        "final_t": tf,
        "final_state": list(yf),
    }
    stem = _stem(args)
    _emit(stem, doc, args.format)
    _write(stem + ".csv", trajectory_csv(traj, sys_))
    print(text_report(doc), end="")
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="jetform",
        description="Unified Lagrangian-Hamiltonian derivations on jet bundles.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp_):
        sp_.add_argument("problem", help="problem file (JSON)")

    d = sub.add_parser("derive", help="run the constraint algorithm, write reports")
    common(d)
    d.add_argument("-o", "--out", help="output stem (default: <problem>_report)")
    d.add_argument("--max-iter", type=int, default=16)
    d.add_argument("--format", choices=["json", "text", "both"], default="both")
    d.set_defaults(func=cmd_derive)

    i = sub.add_parser("integrate", help="derive, then integrate the numeric block")
    common(i)
    i.add_argument("-o", "--out", help="output stem (default: <problem>_report)")
    i.add_argument("--max-iter", type=int, default=16)
    i.add_argument("--format", choices=["json", "text", "both"], default="both")
    i.set_defaults(func=cmd_integrate)

    c = sub.add_parser("check", help="compatibility check only")
    common(c)
    c.set_defaults(func=cmd_check)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ProblemFormatError, ExprParseError, UnknownSymbolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IncompatibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NonAffineError, NotBasicError, InconsistentError,
            SingularSystemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
