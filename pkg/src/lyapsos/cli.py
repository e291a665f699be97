"""Command-line front end.

Every command prints one JSON report on stdout (and to ``--output`` when
given).  Exit codes: 0 for a definitive answer, 2 when the answer is
unresolved (Indeterminate), 1 for usage and input errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import dynamics, lyapsearch, reductions, sos
from .polycore import Polynomial, VectorField, lie_derivative
from .sdp import verify_farkas_ray
from .textio import ParseError, parse_polynomial, parse_vector_field

EXIT_OK, EXIT_ERROR, EXIT_UNRESOLVED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(message)


def _frac_text(v: Fraction) -> str:
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a rational number: {text!r}") from None


def _read(path: str, inputs: Dict[str, dict], key: str) -> str:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    inputs[key] = {"path": path, "sha256": hashlib.sha256(data).hexdigest()}
    return data.decode("utf-8")


def _parse_params(items: Sequence[str]) -> Dict[str, Fraction]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"parameter {item!r} is not of the form key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = _rational(v.strip())
    return out


def _load_system(source: str, params: Sequence[str], inputs: Dict[str, dict]) -> VectorField:
    if source.startswith("gallery:"):
        name = source.split(":", 1)[1]
        try:
            entry = reductions.gallery(name, **_parse_params(params))
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        inputs["system"] = {"gallery": name, "params": entry.params}
        return entry.field
    text = _read(source, inputs, "system")
    try:
        return parse_vector_field(text)
    except ParseError as exc:
        raise UsageError(f"{source}: {exc}") from None


def _load_poly(path: str, inputs: Dict[str, dict], key: str, nvars: Optional[int] = None) -> Polynomial:
    text = _read(path, inputs, key)
    try:
        return parse_polynomial(text, nvars)
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _load_cnf(path: str, inputs: Dict[str, dict]) -> reductions.CnfInstance:
    text = _read(path, inputs, "cnf")
    try:
        return reductions.parse_cnf(text)
    except reductions.CnfError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


# commands ------------------------------------------------------------------------


def _cmd_check_sos(args, inputs):
    p = _load_poly(args.poly, inputs, "poly")
    zeros = [[_rational(v) for v in z.split(",")] for z in args.zero or ()]
    verdict = sos.check_sos(p, args.mode, zeros=zeros, second_order=args.second_order)
    if verdict.is_sos and not args.no_rationalize:
        exact = sos.rationalize_certificate(p, verdict.certificate)
        if exact.is_sos:
            verdict = sos.SosVerdict(sos.SosStatus.SOS, exact.certificate, None, verdict.solution, verdict.problem,
                                     exact.message)
    res = {"kind": "sos", "polynomial": sos.polynomial_to_dict(p), "polynomial_text": p.to_text()}
    res.update(verdict.to_dict())
    if args.cert_out and (verdict.certificate is not None or verdict.dual is not None):
        _write_text(args.cert_out, json.dumps(res, sort_keys=True, indent=2) + "\n")
        res["certificate_file"] = args.cert_out
    code = EXIT_UNRESOLVED if verdict.status is sos.SosStatus.INDETERMINATE else EXIT_OK
    return res, code


def _problem_dict(prob: lyapsearch.LyapunovProblem) -> dict:
    return {"field": prob.field.to_text(), "degree": prob.degree, "homogeneous": prob.homogeneous,
            "margin": _frac_text(prob.margin), "margin_deriv": _frac_text(prob.margin_deriv)}


def _lyap_report(prob, result: lyapsearch.LyapunovResult) -> dict:
    res = {"kind": "lyapunov", "problem": _problem_dict(prob)}
    res.update(result.to_dict())
    if result.found:
        res["verified"] = result.verify(prob.field)
    return res


def _homogeneous_flag(args, field: VectorField) -> bool:
    if args.homogeneous is None:
        return field.is_homogeneous()
    return args.homogeneous


def _cmd_find_lyapunov(args, inputs):
    field = _load_system(args.system, args.param, inputs)
    if args.power_from:
        V = _load_poly(args.power_from, inputs, "V", field.nvars)
        out = lyapsearch.converse_power_search(V, field, args.k_max, planar=args.planar)
        res = {"kind": "power", "field": field.to_text(), "V": V.to_text(), "planar": args.planar}
        res.update(out.to_dict())
        if out.product is not None:
            res["product"] = out.product.to_text()
        return res, EXIT_UNRESOLVED if out.status is lyapsearch.PowerStatus.NOT_FOUND else EXIT_OK
    if args.degree is None:
        raise UsageError("--degree is required unless --power-from is given")
    try:
        prob = lyapsearch.LyapunovProblem(field, args.degree, _homogeneous_flag(args, field),
                                          args.margin, args.margin_deriv)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = lyapsearch.search_sos_lyapunov(prob)
    res = _lyap_report(prob, result)
    if args.cert_out and result.status is not lyapsearch.LyapunovStatus.INDETERMINATE:
        _write_text(args.cert_out, json.dumps(res, sort_keys=True, indent=2) + "\n")
        res["certificate_file"] = args.cert_out
    code = EXIT_UNRESOLVED if result.status is lyapsearch.LyapunovStatus.INDETERMINATE else EXIT_OK
    return res, code


def _cmd_sweep(args, inputs):
    field = _load_system(args.system, args.param, inputs)
    try:
        degrees = [int(d) for d in args.degrees.split(",")]
    except ValueError:
        raise UsageError(f"bad degree list {args.degrees!r}") from None
    hom = _homogeneous_flag(args, field)
    try:
        sweep = lyapsearch.degree_sweep(field, degrees, hom, args.margin, args.margin_deriv, args.stop_on_found)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = []
    for d, r in sweep:
        rows.append({"degree": d, "status": r.status.value, "exact": r.exact,
                     "V": None if r.V is None else r.V.to_text()})
    res = {"kind": "sweep", "field": field.to_text(), "homogeneous": hom, "margin": _frac_text(args.margin),
           "margin_deriv": _frac_text(args.margin_deriv), "results": rows}
    unresolved = any(r.status is lyapsearch.LyapunovStatus.INDETERMINATE for _, r in sweep)
    return res, EXIT_UNRESOLVED if unresolved else EXIT_OK


def _cmd_reduce(args, inputs):
    inst = _load_cnf(args.cnf, inputs)
    p = reductions.sat_to_quartic(inst)
    ph = reductions.homogenize_quartic(p)
    res = {"kind": "reduction", "nvars": inst.nvars, "clauses": len(inst.clauses),
           "construction": "one-in-three 3SAT -> quartic p -> form p_h -> field -grad p_h"}
    if args.emit == "quartic":
        text = p.to_text()
        res.update({"emitted": "quartic", "degree": p.degree})
    elif args.emit == "form":
        text = ph.to_text()
        res.update({"emitted": "form", "degree": ph.degree, "nvars_out": ph.nvars})
    else:
        f = reductions.quartic_to_gradient_field(ph)
        text = f.to_text()
        res.update({"emitted": "field", "degree": f.degree, "nvars_out": f.nvars})
    if args.output_file:
        _write_text(args.output_file, text + "\n")
        res["file"] = args.output_file
    else:
        res["text"] = text
    return res, EXIT_OK


def _cmd_oracle(args, inputs):
    inst = _load_cnf(args.cnf, inputs)
    try:
        out = reductions.one_in_three_brute_force(inst)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = {"kind": "oracle", "semantics": "one-in-three", "nvars": inst.nvars,
           "satisfiable": out.satisfiable, "assignment": None if out.assignment is None else list(out.assignment)}
    if args.equilibria:
        ph = reductions.homogenize_quartic(reductions.sat_to_quartic(inst))
        eq = dynamics.boolean_equilibria(reductions.quartic_to_gradient_field(ph), augmented=True)
        res["boolean_equilibria"] = [list(e) for e in eq]
        res["chain_consistent"] = bool(eq) == out.satisfiable
    return res, EXIT_OK


def _cmd_simulate(args, inputs):
    field = _load_system(args.system, args.param, inputs)
    cfg = dynamics.SimConfig(t_end=args.t_end, max_steps=args.max_steps)
    starts = [_floats(s) for s in args.x0]
    V = _load_poly(args.lyapunov, inputs, "V", field.nvars) if args.lyapunov else None
    trajs = []
    out = []
    for x0 in starts:
        if len(x0) != field.nvars:
            raise UsageError(f"initial state {x0} has the wrong dimension")
        tr = dynamics.integrate(field, x0, cfg)
        trajs.append(tr)
        row = {"x0": [repr(v) for v in x0], "terminal": tr.terminal.value, "steps": len(tr.times) - 1,
               "t_final": repr(float(tr.times[-1])), "x_final": [repr(float(v)) for v in tr.final]}
        if V is not None:
            mono = dynamics.lyapunov_monotonic(V, tr)
            row["monotone"] = mono.monotone
        out.append(row)
    if args.csv:
        if len(trajs) == 1:
            trajs[0].write_csv(args.csv)
        else:
            for k, tr in enumerate(trajs):
                tr.write_csv(args.csv.replace(".csv", f"_{k}.csv"))
    if args.svg:
        try:
            emit_plot(trajs, V, args.svg)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return {"kind": "simulation", "field": field.to_text(), "trajectories": out}, EXIT_OK


def certify_report(report: dict) -> dict:
    """Re-verify a report written by check-sos or find-lyapunov."""
    res = report.get("results", report)
    kind = res.get("kind")
    if kind == "sos":
        p = sos.polynomial_from_dict(res["polynomial"])
        if res["status"] == "Sos":
            cert = sos.SosCertificate.from_dict(res["certificate"])
            ok = sos.verify_certificate(p, cert)
            return {"claim": "Sos", "exact": cert.exact, "verified": ok}
        if res["status"] == "NotSos":
            dual = sos.DualCertificate.from_dict(res["dual"], p)
            return {"claim": "NotSos", "verified": sos.verify_dual(p, dual)}
    if kind == "lyapunov":
        pd = res["problem"]
        field = parse_vector_field(pd["field"])
        prob = lyapsearch.LyapunovProblem(field, int(pd["degree"]), bool(pd["homogeneous"]),
                                          Fraction(pd["margin"]), Fraction(pd["margin_deriv"]))
        if res["status"] == "Found":
            V = parse_polynomial(res["V"], field.nvars)
            cert_v = sos.SosCertificate.from_dict(res["certificates"]["V"])
            cert_d = sos.SosCertificate.from_dict(res["certificates"]["Vdot"])
            mV = parse_polynomial(res["margins"]["V"], field.nvars)
            mD = parse_polynomial(res["margins"]["Vdot"], field.nvars)
            ok = (V.coefficient((0,) * field.nvars) == 0
                  and sos.verify_certificate(V - mV, cert_v)
                  and sos.verify_certificate(-lie_derivative(V, field) - mD, cert_d))
            return {"claim": "Found", "exact": cert_v.exact and cert_d.exact, "verified": ok}
        if res["status"] == "CertifiedInfeasible":
            lp = lyapsearch.lyapunov_program(prob)
            ray = np.array([float(v) for v in res["ray"]])
            ok = lp is not None and len(ray) == lp.sdp.m and verify_farkas_ray(lp.sdp, ray)
            return {"claim": "CertifiedInfeasible", "verified": ok}
    if kind == "power" and res["status"] == "FoundPower":
        field = parse_vector_field(res["field"])
        W = parse_polynomial(res["W"], field.nvars)
        product = parse_polynomial(res["product"], field.nvars)
        k = int(res["k"])
        cert_w = sos.SosCertificate.from_dict(res["certificates"]["W"])
        cert_d = sos.SosCertificate.from_dict(res["certificates"]["Wdot"])
        ok = (-lie_derivative(W, field) == product * (k + 1)
              and sos.verify_certificate(W, cert_w) and sos.verify_certificate(product, cert_d))
        return {"claim": "FoundPower", "exact": cert_w.exact and cert_d.exact, "verified": ok}
    return {"claim": res.get("status"), "verified": False, "message": "nothing to certify in this report"}


def _cmd_certify(args, inputs):
    text = _read(args.report, inputs, "report")
    try:
        report = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.report}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        res = certify_report(report)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.report}: malformed report ({exc})") from None
    res["kind"] = "certify"
    return res, EXIT_OK if res["verified"] else EXIT_UNRESOLVED


def _cmd_gallery(args, inputs):
    if not args.name:
        return {"kind": "gallery", "names": list(reductions.GALLERY_NAMES)}, EXIT_OK
    try:
        entry = reductions.gallery(args.name, **_parse_params(args.param))
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    res = {"kind": "gallery", "field": entry.field.to_text()}
    res.update(entry.metadata())
    if args.output_file:
        _write_text(args.output_file, entry.field.to_text() + "\n")
        res["file"] = args.output_file
    return res, EXIT_OK


# plotting ------------------------------------------------------------------------

PLOT_GRID = 201  # samples per axis for the level-set grid


def emit_plot(trajectories, V: Optional[Polynomial], out: str, levels: int = 8) -> None:
    """Phase portrait as SVG: trajectories solid, level sets of V dotted.

    Level curves come from matplotlib's marching-squares contouring on a
    PLOT_GRID x PLOT_GRID grid over the trajectories' bounding box (padded by
    10%).  Output is byte-stable: no date stamp and a fixed id salt.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if isinstance(trajectories, dynamics.Trajectory):
        trajectories = [trajectories]
    if any(tr.states.shape[1] != 2 for tr in trajectories) or (V is not None and V.nvars != 2):
        raise ValueError("phase portraits need a planar system")
    pts = np.vstack([tr.states for tr in trajectories])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.1 * np.maximum(hi - lo, 1e-3)
    lo, hi = lo - pad, hi + pad
    with matplotlib.rc_context({"svg.hashsalt": "lyapsos", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 5))
        if V is not None:
            gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], PLOT_GRID), np.linspace(lo[1], hi[1], PLOT_GRID))
            vals = V.evaluate_many(np.column_stack([gx.ravel(), gy.ravel()])).reshape(gx.shape)
            vmax = max(float(V.evaluate_many(tr.states[:1])[0]) for tr in trajectories)
            if vmax > 0:
                ax.contour(gx, gy, vals, levels=np.linspace(vmax / levels, vmax, levels), colors="0.4",
                           linestyles="dotted", linewidths=0.8)
        for tr in trajectories:
            ax.plot(tr.states[:, 0], tr.states[:, 1], "-", color="k", linewidth=1.0)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_xlim(lo[0], hi[0])
        ax.set_ylim(lo[1], hi[1])
        fig.savefig(out, format="svg", metadata={"Date": None})
        plt.close(fig)


# argument parsing ----------------------------------------------------------------


def _add_margins(sp):
    sp.add_argument("--margin", type=_rational, default=lyapsearch.DEFAULT_MARGIN,
                    help="epsilon in V - epsilon sum x_i^d SOS (rational)")
    sp.add_argument("--margin-deriv", type=_rational, default=lyapsearch.DEFAULT_MARGIN_DERIV,
                    help="epsilon' in -V' - epsilon' sum x_i^e SOS (rational; 0 allowed)")
    hom = sp.add_mutually_exclusive_group()
    hom.add_argument("--homogeneous", dest="homogeneous", action="store_true", default=None)
    hom.add_argument("--non-homogeneous", dest="homogeneous", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lyapsos", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with flag defaults")
    parser.add_argument("--output", help="also write the JSON report here")
    parser.add_argument("--timing", action="store_true", help="include wall_time in the report")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("check-sos", help="is a polynomial a sum of squares?")
    sp.add_argument("--poly", required=True, help="polynomial text file")
    sp.add_argument("--mode", choices=["full", "homogeneous", "newton"])
    sp.add_argument("--zero", action="append", help="known real zero, e.g. 1,1 (repeatable)")
    sp.add_argument("--second-order", action="store_true", help="higher-order facial reduction at the zeros")
    sp.add_argument("--no-rationalize", action="store_true")
    sp.add_argument("--cert-out", help="write the certificate report here")

    sp = sub.add_parser("find-lyapunov", help="search for an SOS Lyapunov function")
    sp.add_argument("--system", required=True, help="vector-field file or gallery:NAME")
    sp.add_argument("--param", action="append", help="gallery parameter key=value")
    sp.add_argument("--degree", type=int)
    _add_margins(sp)
    sp.add_argument("--power-from", help="polynomial V for the converse power search")
    sp.add_argument("--planar", action="store_true")
    sp.add_argument("--k-max", type=int, default=10)
    sp.add_argument("--cert-out")

    sp = sub.add_parser("sweep", help="Lyapunov search over several degrees")
    sp.add_argument("--system", required=True)
    sp.add_argument("--param", action="append")
    sp.add_argument("--degrees", default="2,4,6,8")
    sp.add_argument("--stop-on-found", action="store_true")
    _add_margins(sp)

    sp = sub.add_parser("reduce", help="ONE-IN-THREE 3SAT to quartic form / cubic field")
    sp.add_argument("--cnf", required=True)
    sp.add_argument("--emit", choices=["quartic", "form", "field"], default="field")
    sp.add_argument("--output-file", "-o")

    sp = sub.add_parser("oracle", help="brute-force ONE-IN-THREE satisfiability")
    sp.add_argument("--cnf", required=True)
    sp.add_argument("--equilibria", action="store_true", help="also scan boolean equilibria of the reduced field")

    sp = sub.add_parser("simulate", help="integrate trajectories")
    sp.add_argument("--system", required=True)
    sp.add_argument("--param", action="append")
    sp.add_argument("--x0", action="append", required=True, help="initial state, e.g. 2,2 (repeatable)")
    sp.add_argument("--t-end", type=float, default=float("inf"))
    sp.add_argument("--max-steps", type=int, default=100_000)
    sp.add_argument("--lyapunov", help="polynomial V to check for monotone decrease and to contour")
    sp.add_argument("--csv")
    sp.add_argument("--svg")

    sp = sub.add_parser("certify", help="re-verify a report from check-sos or find-lyapunov")
    sp.add_argument("--report", required=True)

    sp = sub.add_parser("gallery", help="list or print named systems")
    sp.add_argument("name", nargs="?")
    sp.add_argument("--param", action="append")
    sp.add_argument("--output-file", "-o")
    return parser


_COMMANDS = {
    "check-sos": _cmd_check_sos,
    "find-lyapunov": _cmd_find_lyapunov,
    "sweep": _cmd_sweep,
    "reduce": _cmd_reduce,
    "oracle": _cmd_oracle,
    "simulate": _cmd_simulate,
    "certify": _cmd_certify,
    "gallery": _cmd_gallery,
}


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {known.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{known.config}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    subs = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in subs.choices.items():
        section = cfg.get(name, {})
        defaults = {k.replace("-", "_"): v for k, v in section.items()}
        for key in ("margin", "margin_deriv"):
            if key in defaults:
                defaults[key] = _rational(str(defaults[key]))
        sp.set_defaults(**defaults)


def run(argv: Sequence[str] | None = None, stdout=None) -> int:
    """Run one command; returns the exit code and prints the JSON report."""
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    parser = build_parser()
    start = time.perf_counter()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required: " + ", ".join(_COMMANDS))
        inputs: Dict[str, dict] = {}
        results, code = _COMMANDS[args.command](args, inputs)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report = {"command": args.command, "inputs": inputs, "results": results, "exit_code": code}
    if code == EXIT_UNRESOLVED:
        report["verdict"] = "unresolved"
    if args.timing:
        report["wall_time"] = time.perf_counter() - start
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    stdout.write(text)
    if args.output:
        try:
            _write_text(args.output, text)
        except UsageError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
