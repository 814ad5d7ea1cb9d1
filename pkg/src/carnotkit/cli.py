"""Command line entry point: ``carnotkit <command> ...``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on bad input.
"""

from __future__ import annotations

import argparse
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Any, Sequence

from . import jsonio
from .carnot_map import (
    CarnotMapJet,
    NotCarnotMap,
    carnot_differential,
    differential_checks,
    frame_decompose,
    map_osculation_residual,
    pansu_numeric,
)
from .carnot_structure import SingularFrameError, tangent_algebra_at, validate_filtration
from .coords import eps_carnot, exp_coordinates, is_carnot, is_privileged, pushforward_frame
from .fixtures import heatlift
from .groupoid import (
    GroupoidChart,
    OutOfDomain,
    Pair,
    TangentElem,
    TangentGroupoid,
    chart_coords,
    chart_inverse,
    chart_invert,
    chart_mult,
    check_axioms,
    convergence_probe,
    invert_remainder,
    invert_scaling,
    mult_remainder,
    mult_scaling,
    transition,
    transition_remainder,
    transition_scaling,
)
from .jsonio import InputError, dumps, fmt_point, fmt_rat, parse_point
from .nilgroup import NilpotentGroup
from .report import Report
from .wpoly import TruncationError, format_poly

GRID = (Fraction(-2), Fraction(-1), Fraction(0), Fraction(1, 2), Fraction(1), Fraction(2))


class Outcome:
    """Payload plus a pass flag; printed as JSON or as plain lines."""

    def __init__(self, payload: dict, ok: bool = True, lines: Sequence[str] | None = None):
        self.payload = payload
        self.ok = ok
        self.lines = list(lines) if lines is not None else None


def _report_lines(rep: Report) -> list[str]:
    return str(rep).splitlines()


def _group_of(s: jsonio.Structure) -> NilpotentGroup:
    if s.constants is not None:
        return s.group
    return NilpotentGroup(tangent_algebra_at(s.frame))


def _trunc(args, r: int) -> int:
    return args.trunc if args.trunc is not None else 2 * r


def _sample_grid(n: int, count: int, seed: int) -> list[tuple]:
    pts = list(product(GRID, repeat=n))
    if len(pts) <= count:
        return pts
    return random.Random(seed).sample(pts, count)


def _chunks(items: list, k: int) -> list[list]:
    return [items[i::k] for i in range(k)]


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    rep = validate_filtration(s.frame, args.trunc)
    if s.constants is not None and rep.ok:
        lif = s.group.left_invariant_frame()
        if tuple(lif) != tuple(s.frame.fields):
            rep.add("frame-mismatch", "frame is not the left-invariant frame of the declared constants")
    payload = {"name": s.name, "weights": list(s.frame.weights.w), "report": rep.to_json()}
    if rep.ok:
        alg = tangent_algebra_at(s.frame)
        payload["tangent_constants"] = [{"i": i + 1, "j": j + 1, "k": k + 1, "c": c}
                                        for (i, j, k), c in alg.constants.items()]
    return Outcome(payload, rep.ok, _report_lines(rep))


def cmd_group_mul(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    g = _group_of(s)
    x = parse_point(args.x, g.n, "x")
    y = parse_point(args.y, g.n, "y")
    z = g.mul(x, y)
    return Outcome({"x": x, "y": y, "product": z}, True, [fmt_point(z)])


def cmd_group_inv(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    g = _group_of(s)
    x = parse_point(args.x, g.n, "x")
    z = g.inv(x)
    return Outcome({"x": x, "inverse": z}, True, [fmt_point(z)])


def _table_chunk(path: str, points: list[tuple]) -> tuple[list, list[str]]:
    g = _group_of(jsonio.parse_structure(path))
    rows, bad = [], []
    e = g.identity()
    for x, y, z in points:
        xy = g.mul(x, y)
        if g.mul(xy, z) != g.mul(x, g.mul(y, z)):
            bad.append(f"associativity fails at {fmt_point(x)} | {fmt_point(y)} | {fmt_point(z)}")
        if g.mul(x, e) != tuple(x) or g.mul(x, g.inv(x)) != e:
            bad.append(f"unit/inverse fails at {fmt_point(x)}")
        rows.append({"x": x, "y": y, "product": xy})
    return rows, bad


def cmd_group_table(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    n = s.frame.n
    rng = random.Random(args.seed)
    pts = list(product(GRID, repeat=n))
    triples = [(rng.choice(pts), rng.choice(pts), rng.choice(pts)) for _ in range(args.samples)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            parts = list(ex.map(_table_chunk, [args.structure] * args.jobs, _chunks(triples, args.jobs)))
    else:
        parts = [_table_chunk(args.structure, triples)]
    rows = [r for part in parts for r in part[0]]
    rows.sort(key=lambda r: (r["x"], r["y"]))
    rep = Report("group table")
    for part in parts:
        for msg in part[1]:
            rep.add("group-law", msg)
    lines = [f"{fmt_point(r['x'])} * {fmt_point(r['y'])} = {fmt_point(r['product'])}" for r in rows]
    return Outcome({"rows": rows, "report": rep.to_json()}, rep.ok, lines + _report_lines(rep))


def _at(args, s: jsonio.Structure) -> tuple:
    return parse_point(args.at, s.frame.n, "--at") if args.at else s.frame.basepoint


def cmd_coords_eps(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    a = _at(args, s)
    e = eps_carnot(s.frame, a)
    pushed = pushforward_frame(s.frame, e.change)
    rep = is_carnot(pushed)
    data = jsonio.eps_to_json(e)
    lines = [f"eps_{k + 1}(x) = {format_poly(p)}" for k, p in enumerate(e.as_map().components)]
    return Outcome({"eps": data, "report": rep.to_json()}, rep.ok, lines + _report_lines(rep))


def cmd_coords_canonical(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    a = _at(args, s)
    ch = exp_coordinates(s.frame, a, mode=args.mode, trunc=args.trunc)
    pushed = pushforward_frame(s.frame, ch, args.trunc)
    rep = is_carnot(pushed)
    lines = [f"y_{k + 1} = {format_poly(p)}  (in A(x - a))" for k, p in enumerate(ch.forward.components)]
    payload = {
        "basepoint": a,
        "A": [list(r) for r in ch.linear],
        "forward": [jsonio.poly_to_json(p) for p in ch.forward.components],
        "inverse": [jsonio.poly_to_json(p) for p in ch.inverse.components],
        "trunc": ch.trunc,
        "report": rep.to_json(),
    }
    return Outcome(payload, rep.ok, lines + _report_lines(rep))


def cmd_coords_check(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    frame = s.frame
    priv = is_privileged(frame)
    rep = is_carnot(frame) if priv.ok else priv
    return Outcome({"privileged": priv.ok, "carnot": rep.ok, "report": rep.to_json()}, rep.ok,
                   _report_lines(rep))


def _map_jet(path: str) -> CarnotMapJet:
    m = jsonio.parse_map(path)
    return CarnotMapJet(m.phi, m.source.frame, m.target.frame, m.basepoint)


def cmd_diff_compute(args) -> Outcome:
    jet = _map_jet(args.map)
    dec = frame_decompose(jet, args.trunc)
    if not dec.carnot_at_point:
        return Outcome({"report": dec.report.to_json()}, False, _report_lines(dec.report))
    d = carnot_differential(jet, dec)
    lines = [" ".join(fmt_rat(v) for v in row) for row in d.matrix]
    return Outcome({"matrix": [list(r) for r in d.matrix], "carnot_map": dec.is_carnot_map,
                    "report": dec.report.to_json()}, True, lines)


def cmd_diff_check(args) -> Outcome:
    jet = _map_jet(args.map)
    dec = frame_decompose(jet, args.trunc)
    rep = Report("Carnot differential")
    if not dec.carnot_at_point:
        rep.extend(dec.report)
    else:
        d = carnot_differential(jet, dec)
        samples = _sample_grid(jet.source.n, 40, args.seed)
        rep.extend(differential_checks(d, samples))
    # a map that is Carnot only at the point still has a graded differential there
    payload = {"carnot_at_point": dec.carnot_at_point, "carnot_near_point": dec.is_carnot_map,
               "report": rep.to_json()}
    return Outcome(payload, rep.ok, _report_lines(rep))


def cmd_diff_osculate(args) -> Outcome:
    jet = _map_jet(args.map)
    try:
        res = map_osculation_residual(jet)
    except NotCarnotMap as exc:
        lines = str(exc).splitlines()
        return Outcome({"error": lines}, False, lines)
    payload = {"order": res.order, "residual": [jsonio.poly_to_json(c) for c in res.residual.components],
               "report": res.report.to_json()}
    lines = [f"residual weighted order: {res.order if res.order is not None else 'vanishes to truncation'}"]
    return Outcome(payload, res.ok, lines + _report_lines(res.report))


def cmd_pansu(args) -> Outcome:
    m = jsonio.parse_map(args.map)
    if m.source.constants is None or m.target.constants is None:
        raise InputError("pansu needs group structures (with declared constants) on both sides")
    src, tgt = m.source.group, m.target.group
    a = parse_point(args.at, src.n, "--at") if args.at else m.basepoint
    y = parse_point(args.y, src.n, "--y")
    ts = [Fraction(1, 2**k) for k in range(args.kmin, args.kmax + 1)]
    try:
        res = pansu_numeric(m.phi, src, tgt, a, y, ts, exact=args.exact, strict=not args.graded)
    except NotCarnotMap as exc:
        lines = ["map is not Carnot at the basepoint (use --graded to compare anyway)"] + str(exc).splitlines()
        return Outcome({"error": lines}, False, lines)
    rep = Report("Pansu derivative")
    if res.limit_deviation > args.tol:
        rep.add("limit", f"extrapolated limit deviates from D y by {res.limit_deviation:.3e}")
    if not res.exact and (res.slope is None or res.slope < 0.9):
        rep.add("rate", f"fitted convergence slope {res.slope} < 0.9")
    payload = {"prediction": res.prediction, "limit": res.limit, "deviations": list(res.deviations),
               "ts": list(res.ts), "slope": res.slope, "limit_deviation": res.limit_deviation,
               "carnot_at_point": res.carnot_at_point, "report": rep.to_json()}
    lines = [f"D y = {fmt_point(res.prediction)}",
             f"deviation at t = {fmt_rat(res.ts[-1])}: {res.deviations[-1]:.3e}",
             f"extrapolated limit deviation: {res.limit_deviation:.3e}",
             f"slope: {res.slope}"] + _report_lines(rep)
    return Outcome(payload, rep.ok, lines)


# ---------------------------------------------------------------------------
# groupoid


def _chart(ref: str | None, s: jsonio.Structure, name: str) -> GroupoidChart:
    if ref is None or ref == "id":
        return GroupoidChart.identity(s.frame, name)
    m = jsonio.parse_map(ref)
    if m.phi.n_source != s.frame.n:
        raise InputError(f"chart {ref} has the wrong dimension")
    return GroupoidChart(m.phi, s.frame, name=name)


def _ts(args) -> list[Fraction]:
    return [Fraction(1, 2**k) for k in range(args.kmin, args.kmax + 1)]


def cmd_groupoid_transition(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    c1 = _chart(args.chart, s, "chart1")
    c2 = _chart(args.chart2, s, "chart2")
    X = parse_point(args.x, s.frame.n, "--x")
    Y = parse_point(args.y, s.frame.n, "--y")
    rem = transition_remainder(c1, c2, X)
    rep = Report("transition")
    base = transition(c1, c2, (X, Y, 0))
    if tuple(rem.at_t_zero()(Y)) != tuple(base[1]):
        rep.add("t-zero", "remainder at t = 0 differs from the graded differential")
    rows = []
    for t in _ts(args):
        val = transition(c1, c2, (X, Y, t))
        if tuple(val[1]) != tuple(rem.evaluate((), Y, t)):
            rep.add("remainder", f"remainder polynomial disagrees with the chart value at t = {t}")
        rows.append({"t": t, "x": val[0], "y": val[1]})
    sc = transition_scaling(c1, c2, X, Y, _ts(args))
    if not sc.ok():
        rep.add("rate", f"remainder slope {sc.slope} < 0.9")
    theta = rem.first_order()
    payload = {"t0": {"x": base[0], "y": base[1]}, "rows": rows, "slope": sc.slope,
               "theta": [jsonio.poly_to_json(c) for c in theta.components], "report": rep.to_json()}
    lines = [f"t=0: {fmt_point(base[0])} | {fmt_point(base[1])}"]
    lines += [f"t={fmt_rat(r['t'])}: {fmt_point(r['x'])} | {fmt_point(r['y'])}" for r in rows]
    return Outcome(payload, rep.ok, lines + _report_lines(rep))


def cmd_groupoid_mult(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    c = _chart(args.chart, s, "chart")
    n = s.frame.n
    X = parse_point(args.x, n, "--x")
    Y = parse_point(args.y, n, "--y")
    Z = parse_point(args.z, n, "--z")
    rem = mult_remainder(c, X, _trunc(args, s.frame.r))
    rep = Report("chart multiplication")
    base = chart_mult(c, (X, Y, Z, 0))
    if tuple(rem.at_t_zero()(Y + Z)) != tuple(base[1]):
        rep.add("t-zero", "remainder at t = 0 differs from the tangent group law")
    rows = []
    for t in _ts(args):
        val = chart_mult(c, (X, Y, Z, t))
        rows.append({"t": t, "y": val[1], "jet": rem.evaluate((), Y + Z, t)})
    sc = mult_scaling(c, X, Y, Z, _ts(args))
    if not sc.ok():
        rep.add("rate", f"remainder slope {sc.slope} < 0.9")
    payload = {"t0": base[1], "rows": rows, "slope": sc.slope, "jet_trunc": rem.trunc,
               "theta": [jsonio.poly_to_json(p) for p in rem.first_order().components], "report": rep.to_json()}
    lines = [f"t=0: {fmt_point(base[1])}"] + [f"t={fmt_rat(r['t'])}: {fmt_point(r['y'])}" for r in rows]
    return Outcome(payload, rep.ok, lines + _report_lines(rep))


def cmd_groupoid_invert(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    c = _chart(args.chart, s, "chart")
    n = s.frame.n
    X = parse_point(args.x, n, "--x")
    Y = parse_point(args.y, n, "--y")
    rem = invert_remainder(c, X, _trunc(args, s.frame.r))
    rep = Report("chart inversion")
    base = chart_invert(c, (X, Y, 0))
    if tuple(rem.at_t_zero()(Y)) != tuple(base[1]):
        rep.add("t-zero", "remainder at t = 0 differs from -y")
    rows = []
    for t in _ts(args):
        q, val, _ = chart_invert(c, (X, Y, t))
        rows.append({"t": t, "x": q, "y": val, "jet": rem.evaluate((), Y, t)})
    sc = invert_scaling(c, X, Y, _ts(args))
    if not sc.ok():
        rep.add("rate", f"remainder slope {sc.slope} < 0.9")
    payload = {"t0": base[1], "rows": rows, "slope": sc.slope, "jet_trunc": rem.trunc,
               "theta": [jsonio.poly_to_json(p) for p in rem.first_order().components], "report": rep.to_json()}
    lines = [f"t=0: {fmt_point(base[0])} | {fmt_point(base[1])}"]
    lines += [f"t={fmt_rat(r['t'])}: {fmt_point(r['x'])} | {fmt_point(r['y'])}" for r in rows]
    return Outcome(payload, rep.ok, lines + _report_lines(rep))


def _read_sequence(path: str, n: int) -> list[tuple]:
    data = jsonio._load_json(Path(path))
    if not isinstance(data, list):
        raise InputError("a sequence file is an array of {\"x\", \"y\", \"t\"} objects")
    out = []
    for i, e in enumerate(data):
        if not isinstance(e, dict) or set(e) != {"x", "y", "t"}:
            raise InputError("each entry needs the keys x, y, t", f"$[{i}]")

        def val(v, p):
            return float(v) if isinstance(v, float) else jsonio.parse_rat(v, p)

        x = tuple(val(v, f"$[{i}].x") for v in e["x"])
        y = tuple(val(v, f"$[{i}].y") for v in e["y"])
        if len(x) != n or len(y) != n:
            raise InputError(f"points must have {n} coordinates", f"$[{i}]")
        out.append((x, y, val(e["t"], f"$[{i}].t")))
    return out


def cmd_groupoid_probe(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    n = s.frame.n
    c1 = _chart(args.chart, s, "chart1")
    c2 = _chart(args.chart2, s, "chart2")
    if args.sequence:
        seq = _read_sequence(args.sequence, n)
    else:
        if not (args.x and args.xi):
            raise InputError("give --sequence or both --x and --xi")
        x = parse_point(args.x, n, "--x")
        xi = parse_point(args.xi, n, "--xi")
        seq = []
        for t in _ts(args):
            X, Y, _ = chart_coords(c1, TangentElem(x, xi))
            seq.append((x, chart_inverse(c1, (X, Y, t)).y, t))
    r1 = convergence_probe(c1, seq)
    r2 = convergence_probe(c2, seq)
    rep = Report("convergence probe")
    rep.extend(r1.report)
    if r1.converges != r2.converges:
        rep.add("chart-dependence", "the two charts disagree on convergence")
    elif r1.converges:
        d = max(abs(float(a - b)) for a, b in zip(r1.limit.xi, r2.limit.xi))
        if d > 1e-9:
            rep.add("chart-dependence", f"limits differ by {d:.3e} between the charts")
    payload = {"converges": r1.converges, "report": rep.to_json()}
    lines = [f"converges: {r1.converges}"]
    if r1.converges:
        payload["limit"] = {"x": r1.limit.x, "xi": r1.limit.xi}
        payload["limit_chart2"] = {"x": r2.limit.x, "xi": r2.limit.xi}
        lines.append(f"limit: ({fmt_point(r1.limit.x)}; {fmt_point(r1.limit.xi)})")
    # a divergent sequence is a valid answer; only chart disagreement fails the command
    ok = not any(code == "chart-dependence" for code in rep.codes())
    return Outcome(payload, ok, lines + _report_lines(rep))


def cmd_groupoid_axioms(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    n = s.frame.n
    G = TangentGroupoid(s.frame)
    pts = _sample_grid(n, 4, args.seed)
    fibre = _sample_grid(n, 6, args.seed + 1)
    ts = [Fraction(1, 2), Fraction(-3)]
    rep = check_axioms(G, pts, ts, fibre)
    c = _chart(args.chart, s, "chart")
    for x in pts:
        for y in pts:
            for t in ts:
                g = Pair(x, y, t)
                try:
                    if chart_inverse(c, chart_coords(c, g)) != g:
                        rep.add("round-trip", f"chart round trip fails on {g}")
                except (OutOfDomain, SingularFrameError):
                    continue
        for xi in fibre:
            g = TangentElem(x, xi)
            if chart_inverse(c, chart_coords(c, g)) != g:
                rep.add("round-trip", f"chart round trip fails on {g}")
    return Outcome({"report": rep.to_json()}, rep.ok, _report_lines(rep))


def cmd_heatlift(args) -> Outcome:
    s = jsonio.parse_structure(args.structure)
    lifted = jsonio.Structure(args.name or f"{s.name}_heat", heatlift(s.frame), None)
    data = jsonio.structure_to_json(lifted)
    text = dumps(data) + "\n"
    if args.output:
        Path(args.output).write_text(text)
        return Outcome({"written": args.output}, True, [f"wrote {args.output}"])
    return Outcome(data, True, text.splitlines())


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, suppress):
        # subcommands accept the flags too, without overriding values given before the command
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        parser.add_argument("--trunc", type=int, default=d(None), help="truncation order (default 2r)")
        parser.add_argument("--json", action="store_true", default=d(False), help="emit a JSON report")
        parser.add_argument("--seed", type=int, default=d(0), help="seed for sample grids")
        parser.add_argument("--jobs", type=int, default=d(1), help="worker processes for property sweeps")

    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, True)
    p = argparse.ArgumentParser(prog="carnotkit", description="Exact computations on Carnot manifolds.")
    global_flags(p, False)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", parents=[common], help="check a structure file")
    v.add_argument("structure")
    v.set_defaults(func=cmd_validate)

    g = sub.add_parser("group", parents=[common], help="group law of the tangent group")
    gs = g.add_subparsers(dest="action", required=True)
    gm = gs.add_parser("mul", parents=[common])
    gm.add_argument("structure")
    gm.add_argument("x")
    gm.add_argument("y")
    gm.set_defaults(func=cmd_group_mul)
    gi = gs.add_parser("inv", parents=[common])
    gi.add_argument("structure")
    gi.add_argument("x")
    gi.set_defaults(func=cmd_group_inv)
    gt = gs.add_parser("table", parents=[common])
    gt.add_argument("structure")
    gt.add_argument("--samples", type=int, default=50)
    gt.set_defaults(func=cmd_group_table)

    c = sub.add_parser("coords", parents=[common], help="Carnot coordinates")
    cs = c.add_subparsers(dest="action", required=True)
    ce = cs.add_parser("eps", parents=[common])
    ce.add_argument("structure")
    ce.add_argument("--at", default=None)
    ce.set_defaults(func=cmd_coords_eps)
    cc = cs.add_parser("canonical", parents=[common])
    cc.add_argument("structure")
    cc.add_argument("--at", default=None)
    cc.add_argument("--mode", choices=["canonical", "homogeneous-conversion"], default="canonical")
    cc.set_defaults(func=cmd_coords_canonical)
    ck = cs.add_parser("check", parents=[common])
    ck.add_argument("structure")
    ck.set_defaults(func=cmd_coords_check)

    d = sub.add_parser("diff", parents=[common], help="Carnot differentials of maps")
    ds = d.add_subparsers(dest="action", required=True)
    for name, func in (("compute", cmd_diff_compute), ("check", cmd_diff_check), ("osculate", cmd_diff_osculate)):
        dp = ds.add_parser(name, parents=[common])
        dp.add_argument("map")
        dp.set_defaults(func=func)

    pz = sub.add_parser("pansu", parents=[common], help="numerical Pansu derivative between groups")
    pz.add_argument("map")
    pz.add_argument("--y", required=True)
    pz.add_argument("--at", default=None)
    pz.add_argument("--kmin", type=int, default=3)
    pz.add_argument("--kmax", type=int, default=10)
    pz.add_argument("--tol", type=float, default=1e-6)
    pz.add_argument("--exact", action="store_true", help="rational arithmetic instead of floats")
    pz.add_argument("--graded", action="store_true",
                    help="compare with the graded differential even where the map is not Carnot")
    pz.set_defaults(func=cmd_pansu)

    gr = sub.add_parser("groupoid", parents=[common], help="tangent groupoid charts and structure maps")
    grs = gr.add_subparsers(dest="action", required=True)

    def gsub(name, func, points):
        q = grs.add_parser(name, parents=[common])
        q.add_argument("structure")
        q.add_argument("--chart", default=None, help="chart map file (default: identity)")
        for pt in points:
            q.add_argument(f"--{pt}", default=None)
        q.add_argument("--kmin", type=int, default=2)
        q.add_argument("--kmax", type=int, default=8)
        q.set_defaults(func=func)
        return q

    t = gsub("transition", cmd_groupoid_transition, ("x", "y"))
    t.add_argument("--chart2", default=None)
    gsub("mult", cmd_groupoid_mult, ("x", "y", "z"))
    gsub("invert", cmd_groupoid_invert, ("x", "y"))
    pr = gsub("probe", cmd_groupoid_probe, ("x", "xi"))
    pr.add_argument("--chart2", default=None)
    pr.add_argument("--sequence", default=None, help="JSON file of {x, y, t} terms")
    gsub("axioms", cmd_groupoid_axioms, ())

    h = sub.add_parser("heatlift", parents=[common], help="add a weight-2 time direction to a structure")
    h.add_argument("structure")
    h.add_argument("-o", "--output", default=None)
    h.add_argument("--name", default=None)
    h.set_defaults(func=cmd_heatlift)
    return p


_REQUIRED = {
    cmd_groupoid_transition: ("x", "y"),
    cmd_groupoid_mult: ("x", "y", "z"),
    cmd_groupoid_invert: ("x", "y"),
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        for name in _REQUIRED.get(args.func, ()):
            if getattr(args, name) is None:
                raise InputError(f"--{name} is required")
        out = args.func(args)
    except InputError as exc:
        _emit_error(args, "input", str(exc))
        return 2
    except (NotCarnotMap, SingularFrameError, OutOfDomain, TruncationError, ValueError) as exc:
        _emit_error(args, "check", str(exc))
        return 1
    if args.json:
        payload: dict[str, Any] = dict(out.payload)
        payload["ok"] = out.ok
        print(dumps(payload))
    else:
        for line in out.lines if out.lines is not None else dumps(out.payload).splitlines():
            print(line)
    return 0 if out.ok else 1


def _emit_error(args, kind: str, message: str) -> None:
    if getattr(args, "json", False):
        print(dumps({"ok": False, "error": {"kind": kind, "message": message}}))
    else:
        print(f"error: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
