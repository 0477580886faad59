"""Command-line front end: certify, simulate, sweep.

Exit codes are the machine contract for certification outcomes:
0 = certified, 2 = refuted, 3 = inconclusive, 1 = bad configuration or
runtime error.  Reports are JSON with a ``schema_version`` field;
trajectories are CSV with header ``t,x1,x2,x3`` and shortest round-trip
decimal formatting.
"""

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

from . import certify as _certify
from . import models as _models
from . import sim as _sim

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REFUTED = 2
EXIT_INCONCLUSIVE = 3

_CONCLUSION_EXIT = {"certified": EXIT_OK, "refuted": EXIT_REFUTED, "inconclusive": EXIT_INCONCLUSIVE}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for "refuted"
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class CliError(Exception):
    pass


def _add_model_args(p):
    p.add_argument("--model", choices=["goodwin", "field-noyes"], help="built-in model")
    p.add_argument("--model-json", help="path to a generic model configuration (JSON)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--f", type=float)
    p.add_argument("--w", type=float)


def _build_model(args, overrides=None):
    if (args.model is None) == (args.model_json is None):
        raise CliError("exactly one of --model or --model-json is required")
    over = overrides or {}
    if args.model_json:
        with open(args.model_json) as fh:
            cfg = json.load(fh)
        cfg.setdefault("params", {}).update(over)
        return _models.from_config(cfg)
    if args.model == "goodwin":
        vals = {"alpha": args.alpha, "beta": args.beta, "gamma": args.gamma, "m": args.m}
        vals.update(over)
        missing = [k for k, v in vals.items() if v is None]
        if missing:
            raise CliError(f"goodwin needs --{' --'.join(missing)}")
        return _models.goodwin(_models.GoodwinParams(vals["alpha"], vals["beta"], vals["gamma"], int(vals["m"])))
    vals = {"s": args.s, "q": args.q, "f": args.f, "w": args.w}
    vals.update(over)
    missing = [k for k, v in vals.items() if v is None]
    if missing:
        raise CliError(f"field-noyes needs --{' --'.join(missing)}")
    return _models.field_noyes(_models.FieldNoyesParams(vals["s"], vals["q"], vals["f"], vals["w"]))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _report_json(model, report, inv_set, inv_error, timing):
    cert = {
        "conclusion": report.conclusion.kind,
        "reason": report.conclusion.reason,
        "grid_n": report.grid_n,
        "signature": report.signature.tolist(),
        "pattern_ok": report.pattern_ok,
        "pattern_note": report.pattern_note,
        "two_positive": report.two_positive,
        "irreducible_ok": report.irreducible_ok,
        "equilibrium": _jsonable(report.equilibrium),
        "equilibrium_interior": report.equilibrium_interior,
        "unique_in_box": report.unique_in_box,
        "uniqueness_method": report.uniqueness_method,
        "charpoly": None if report.charpoly is None else {
            "c2": report.charpoly.c2, "c1": report.charpoly.c1, "c0": report.charpoly.c0,
        },
        "routh": None if report.routh is None else report.routh.value,
        "det": report.det_j,
        "eigenvalues": None,
        "zeta": None,
        "schur": None,
    }
    if report.spectrum is not None:
        spec = report.spectrum
        eigs = [complex(spec.lambda_real), spec.pair[0], spec.pair[1]]
        cert["eigenvalues"] = [[z.real, z.imag] for z in eigs]
        cert["zeta"] = spec.zeta.tolist()
    if report.schur is not None:
        b = report.schur
        cert["schur"] = {
            "case": b.case.value,
            "lambda3": b.lambda3,
            "u1": b.u1,
            "u2": b.u2,
            "v1": b.v1,
            "v2": b.v2,
            "delta": b.delta,
            "T": b.T.tolist(),
        }
    if inv_set is not None:
        inv = _jsonable(inv_set)
    elif inv_error is not None:
        inv = {"error": inv_error}
    else:
        inv = None
    return {
        "schema_version": SCHEMA_VERSION,
        "model": model.name,
        "params": _jsonable(model.params),
        "certification": cert,
        "invariant_set": inv,
        "timing": timing,
    }


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def cmd_certify(args):
    model = _build_model(args)
    t0 = time.perf_counter()
    report = _certify.certify_model(model, grid_n=args.grid_n)
    t1 = time.perf_counter()
    inv_set = None
    inv_error = None
    if report.certified:
        try:
            inv_set = _certify.construct_invariant_set(
                model, report, grid_n=args.grid_n, eta_fraction=args.eta_fraction
            )
        except (_certify.AngleMarginError, ValueError) as exc:
            inv_error = str(exc)
    t2 = time.perf_counter()
    doc = _report_json(
        model, report, inv_set, inv_error,
        {"certify_s": t1 - t0, "invariant_set_s": t2 - t1},
    )
    fh, close = _open_out(args.out)
    try:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    finally:
        if close:
            fh.close()
    return _CONCLUSION_EXIT[report.conclusion.kind]


def _parse_x0(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise CliError("--x0 needs three comma-separated numbers")
    return np.array(parts)


def cmd_simulate(args):
    model = _build_model(args)
    x0 = _parse_x0(args.x0)
    traj = _sim.integrate(model, x0, args.t_end, rtol=args.rtol, atol=args.atol)
    fh, close = _open_out(args.out)
    try:
        traj.write_csv(fh, resample=args.resample)
    finally:
        if close:
            fh.close()
    if args.detect_orbit:
        opts = _sim.OrbitOptions(horizon=args.horizon, rtol=args.rtol, atol=args.atol)
        est = _sim.detect_orbit(model, x0, opts)
        doc = _jsonable(est)
        fh, close = _open_out(args.orbit_out)
        try:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        finally:
            if close:
                fh.close()
    return EXIT_OK


def cmd_sweep(args):
    if args.sweep_steps < 1:
        raise CliError("--sweep-steps must be >= 1")
    values = np.linspace(args.sweep_start, args.sweep_stop, args.sweep_steps)
    if args.sweep_param == "m":
        values = np.unique(np.round(values).astype(int))
    fh, close = _open_out(args.out)
    try:
        fh.write("value,certified,period\n")
        for v in values:
            val = v.item()
            period = ""
            try:
                model = _build_model(args, overrides={args.sweep_param: float(val)})
                report = _certify.certify_model(model, grid_n=args.grid_n)
                ok = report.certified
            except (ValueError, CliError) as exc:
                raise CliError(f"sweep value {val}: {exc}") from None
            if ok:
                x0 = model.box.lower + 0.05 * model.box.extent
                est = _sim.detect_orbit(
                    model, x0, _sim.OrbitOptions(horizon=args.horizon, rtol=args.rtol)
                )
                if est.converged:
                    period = repr(est.period)
            fh.write(f"{val!r},{str(ok).lower()},{period}\n")
    finally:
        if close:
            fh.close()
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="coop2", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_cert = sub.add_parser("certify", help="run the convergence certification")
    _add_model_args(p_cert)
    p_cert.add_argument("--grid-n", type=int, default=11)
    p_cert.add_argument("--eta-fraction", type=float, default=0.5)
    p_cert.add_argument("--out", help="report path (default stdout)")
    p_cert.set_defaults(func=cmd_certify)

    p_sim = sub.add_parser("simulate", help="integrate and export a trajectory")
    _add_model_args(p_sim)
    p_sim.add_argument("--x0", required=True, help="x1,x2,x3")
    p_sim.add_argument("--t-end", type=float, required=True)
    p_sim.add_argument("--rtol", type=float, default=1e-8)
    p_sim.add_argument("--atol", type=float, default=None)
    p_sim.add_argument("--resample", type=int, default=None,
                       help="write this many uniform samples instead of every step")
    p_sim.add_argument("--out", help="CSV path (default stdout)")
    p_sim.add_argument("--detect-orbit", action="store_true")
    p_sim.add_argument("--horizon", type=float, default=400.0,
                       help="orbit-detection horizon")
    p_sim.add_argument("--orbit-out", help="orbit JSON path (default stdout)")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="certify across one parameter range")
    _add_model_args(p_sweep)
    p_sweep.add_argument("--sweep-param", required=True)
    p_sweep.add_argument("--sweep-start", type=float, required=True)
    p_sweep.add_argument("--sweep-stop", type=float, required=True)
    p_sweep.add_argument("--sweep-steps", type=int, required=True)
    p_sweep.add_argument("--grid-n", type=int, default=11)
    p_sweep.add_argument("--rtol", type=float, default=1e-9)
    p_sweep.add_argument("--horizon", type=float, default=400.0)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--out", help="CSV path (default stdout)")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"coop2: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, _sim.IntegrationError) as exc:
        print(f"coop2: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
