"""Command-line entry point: ``relaxman <subcommand> ...``.

Exit codes: 0 when the run passes, 1 when a certificate or validation fails,
2 for usage and I/O errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..linearization import scan_invertibility
from ..manifold import (ContractionError, default_config, fit_decay_rate, solve_fixed_point)
from ..model import validate_hypotheses
from ..multiplier import apply_K, apply_Km, example47_lower_bound
from ..reduction import decompose, schur_reduce
from ..spectral import resolvent_scan, spectral_factorize, x_half_norm
from . import io
from .acceptance import SUITES, Settings, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(args, payload: dict, inputs: dict[str, str], config: dict, outputs: list[str]) -> None:
    """Attach a manifest to the result, write it and echo the result as JSON."""
    target = args.output or (outputs[0] if outputs else None)
    man = io.make_manifest(args.command, inputs, config, outputs + ([args.output] if args.output else []),
                           args.seed)
    payload = dict(payload, manifest=man["hash"])
    if target:
        if args.output and args.output.endswith(".json"):
            io.write_json(args.output, payload)
        io.write_manifest(target, man)
    print(json.dumps(payload, indent=2, sort_keys=True, default=float))


def cmd_validate_model(args) -> int:
    m = io.load_model(args.model)
    rep = validate_hypotheses(m, args.tol)
    _emit(args, rep.to_dict(), {"model": args.model}, {"tol": args.tol}, [])
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_reduce(args) -> int:
    m = io.load_model(args.model)
    b = decompose(m, args.side)
    r = schur_reduce(b, m.B, args.side, name=f"{m.name}-{args.side}")
    prov = dict(r.provenance, model_hash=io.input_hash(args.model), model=args.model)
    payload = dict(r.to_dict(), provenance=prov)
    _emit(args, payload, {"model": args.model}, {"side": args.side}, [])
    return EXIT_OK


def cmd_spectral(args) -> int:
    r = io.load_reduced(args.reduced, args.side)
    sd = spectral_factorize(r)
    _emit(args, sd.to_dict(), {"reduced": args.reduced}, {}, [])
    return EXIT_OK


def cmd_resolvent_scan(args) -> int:
    r = io.load_reduced(args.reduced, args.side)
    sc = resolvent_scan(r, args.omega_max, args.points)
    if args.output:
        io.write_scan_csv(args.output, sc.omega, sc.norm_R, sc.norm_R_Gamma)
    summary = {"weighted_sup": sc.weighted_sup, "tail_closes": sc.tail_closes,
               "tail_weighted_bound": sc.tail_weighted_bound, "points": args.points,
               "omega_max": args.omega_max}
    man = io.make_manifest(args.command, {"reduced": args.reduced},
                           {"omega_max": args.omega_max, "points": args.points},
                           [args.output] if args.output else [], args.seed)
    if args.output:
        io.write_manifest(args.output, man)
    print(json.dumps(dict(summary, manifest=man["hash"]), indent=2, sort_keys=True))
    return EXIT_OK if sc.tail_closes else EXIT_FAIL


def cmd_verify_linearization(args) -> int:
    m = io.load_model(args.model)
    sc = scan_invertibility(m, args.side, args.eta, args.omega_max, args.points)
    payload = sc.to_dict()
    if not sc.passed:
        payload["reason"] = ("sigma_min vanishes at omega=" + str(sc.failures().tolist())
                             if not sc.grid_positive else sc.detail.get("tail_reason", "tail not certified"))
    if args.output:
        io.write_json(args.output, dict(payload, manifest=None))
    man = io.make_manifest(args.command, {"model": args.model},
                           {"side": args.side, "eta": args.eta, "omega_max": args.omega_max,
                            "points": args.points}, [args.output] if args.output else [], args.seed)
    if args.output:
        io.write_json(args.output, dict(payload, manifest=man["hash"]))
        io.write_manifest(args.output, man)
    summary = {k: v for k, v in payload.items() if k not in ("omega", "sigma_min")}
    print(json.dumps(dict(summary, manifest=man["hash"]), indent=2, sort_keys=True))
    return EXIT_OK if sc.passed else EXIT_FAIL


def cmd_apply_multiplier(args) -> int:
    r = io.load_reduced(args.reduced, args.side)
    sd = spectral_factorize(r)
    f = io.read_trajectory_csv(args.trajectory)
    out = apply_Km(r, sd, f) if args.modified else apply_K(r, sd, f)
    if args.output:
        io.write_trajectory_csv(args.output, out)
    norms = {"L2_alpha": out.l2(args.alpha), "Linf": out.linf()}
    if out.derivs is not None:
        norms["H1_alpha"] = out.h1(args.alpha)
    man = io.make_manifest(args.command, {"reduced": args.reduced, "f": args.trajectory},
                           {"modified": args.modified, "alpha": args.alpha},
                           [args.output] if args.output else [], args.seed)
    if args.output:
        io.write_manifest(args.output, man)
    print(json.dumps(dict(norms, manifest=man["hash"]), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_example47(args) -> int:
    res = example47_lower_bound(args.modes, args.dt)
    payload = res.to_dict()
    payload["passed"] = res.measured_sup >= res.bound
    _emit(args, payload, {}, {"modes": args.modes, "dt": args.dt}, [])
    return EXIT_OK if payload["passed"] else EXIT_FAIL


def _read_v0(spec: str) -> np.ndarray:
    p = Path(spec)
    if p.exists():
        d = json.loads(p.read_text())
        return np.asarray(d["v0"] if isinstance(d, dict) else d, dtype=float)
    return np.asarray(json.loads(spec), dtype=float)


def _solver_config(args, r, sd):
    kw = {}
    if args.eps1 is not None:
        kw["eps1"] = args.eps1
    if args.eps2 is not None:
        kw["eps2"] = args.eps2
    return default_config(r, sd, alpha=args.alpha, dt=args.dt, seed=args.seed, **kw)


def cmd_solve_manifold(args) -> int:
    r = io.load_reduced(args.reduced, args.side)
    sd = spectral_factorize(r)
    cfg = _solver_config(args, r, sd)
    v0 = _read_v0(args.v0)
    try:
        pt = solve_fixed_point(r, sd, v0, cfg)
    except ContractionError as exc:
        print(json.dumps({"passed": False, "reason": str(exc)}), file=sys.stderr)
        return EXIT_FAIL
    fit = None
    lo, hi = 0.25 * cfg.T, 0.6 * cfg.T
    if np.linalg.norm(pt.trajectory.values[int(lo / cfg.dt)]) > 0:
        try:
            fit = fit_decay_rate(pt.trajectory, (lo, hi))._asdict()
        except ValueError:
            fit = None
    payload = dict(pt.to_dict(), decay_fit=fit, config=cfg.to_dict(),
                   norms={"X_half_v0": x_half_norm(sd, pt.v0), "H1_alpha": pt.norm})
    outputs = []
    if args.trajectory:
        io.write_trajectory_csv(args.trajectory, pt.trajectory)
        outputs.append(args.trajectory)
    _emit(args, payload, {"reduced": args.reduced}, cfg.to_dict(), outputs)
    return EXIT_OK


def cmd_chart_sweep(args) -> int:
    r = io.load_reduced(args.reduced, args.side)
    sd = spectral_factorize(r)
    cfg = _solver_config(args, r, sd)
    rng = np.random.default_rng(args.seed)
    radius = min(args.radius, cfg.eps1) if args.radius is not None else cfg.eps1
    v0s = []
    for _ in range(args.directions):
        y = rng.normal(size=sd.dim) * sd.stable
        v = sd.from_modes(y)
        v0s.append(v * radius / x_half_norm(sd, v))

    def work(v):
        pt = solve_fixed_point(r, sd, v, cfg)
        lo, hi = 0.25 * cfg.T, 0.6 * cfg.T
        try:
            rate = fit_decay_rate(pt.trajectory, (lo, hi)).rate
        except ValueError:
            rate = float("nan")
        return pt, rate

    with ThreadPoolExecutor(max_workers=io.worker_count()) as ex:
        results = list(ex.map(work, v0s))
    lines = ["v0,norm_J,rate"]
    for pt, rate in results:
        lines.append(f"\"{json.dumps(pt.v0.tolist())}\",{float(np.linalg.norm(pt.J))!r},{float(rate)!r}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
        man = io.make_manifest(args.command, {"reduced": args.reduced}, cfg.to_dict(), [args.output], args.seed)
        io.write_manifest(args.output, man)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_decay_fit(args) -> int:
    g = io.read_trajectory_csv(args.trajectory)
    fit = fit_decay_rate(g, (args.window[0], args.window[1]))
    ok = args.min_rate is None or fit.rate >= args.min_rate
    _emit(args, dict(fit._asdict(), passed=ok), {"trajectory": args.trajectory},
          {"window": list(args.window), "min_rate": args.min_rate}, [])
    return EXIT_OK if ok else EXIT_FAIL


def cmd_acceptance(args) -> int:
    results = run_suite(args.suite, Settings(quick=args.quick, seed=args.seed))
    for res in results:
        print(res.line())
    payload = {"suite": args.suite, "quick": args.quick, "passed": all(r.passed for r in results),
               "criteria": [r.to_dict() for r in results]}
    if args.output:
        man = io.make_manifest(args.command, {}, {"suite": args.suite, "quick": args.quick},
                               [args.output], args.seed)
        io.write_json(args.output, dict(payload, manifest=man["hash"]))
        io.write_manifest(args.output, man)
    return EXIT_OK if payload["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relaxman", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized probes")
    common.add_argument("-o", "--output", default=None)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate-model", parents=[common], help="check the standing hypotheses")
    s.add_argument("model")
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_validate_model)

    s = sub.add_parser("reduce", parents=[common], help="Schur-reduce a model at one equilibrium")
    s.add_argument("model")
    s.add_argument("--side", choices=["plus", "minus"], default="plus")
    s.set_defaults(func=cmd_reduce)

    def reduced_cmd(name, func, help_):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("reduced")
        s.add_argument("--side", choices=["plus", "minus"], default="plus",
                       help="equilibrium used when the input is a full model")
        s.set_defaults(func=func)
        return s

    reduced_cmd("spectral", cmd_spectral, "symbol values, gap and mode split")
    s = reduced_cmd("resolvent-scan", cmd_resolvent_scan, "resolvent norms on an omega grid")
    s.add_argument("--omega-max", type=float, default=50.0)
    s.add_argument("--points", type=int, default=2001)

    s = sub.add_parser("verify-linearization", parents=[common], help="weighted invertibility scan")
    s.add_argument("model")
    s.add_argument("--side", choices=["plus", "minus"], default="plus")
    s.add_argument("--eta", type=float, default=0.01)
    s.add_argument("--omega-max", type=float, default=50.0)
    s.add_argument("--points", type=int, default=2001)
    s.set_defaults(func=cmd_verify_linearization)

    s = reduced_cmd("apply-multiplier", cmd_apply_multiplier, "apply K or K_m to a CSV trajectory")
    s.add_argument("trajectory")
    s.add_argument("--modified", action="store_true")
    s.add_argument("--alpha", type=float, default=0.0)

    s = sub.add_parser("example47", parents=[common], help="L-infinity unboundedness example")
    s.add_argument("--modes", type=int, required=True)
    s.add_argument("--dt", type=float, default=None)
    s.set_defaults(func=cmd_example47)

    for name, func in (("solve-manifold", cmd_solve_manifold), ("chart-sweep", cmd_chart_sweep)):
        s = reduced_cmd(name, func, "stable manifold chart" if name == "solve-manifold" else "chart table")
        s.add_argument("--alpha", type=float, default=None)
        s.add_argument("--dt", type=float, default=1e-3)
        s.add_argument("--eps1", type=float, default=None)
        s.add_argument("--eps2", type=float, default=None)
        if name == "solve-manifold":
            s.add_argument("--v0", required=True, help="JSON file or inline JSON list")
            s.add_argument("--trajectory", default=None, help="CSV path for the trajectory")
        else:
            s.add_argument("--directions", type=int, default=8)
            s.add_argument("--radius", type=float, default=None)

    s = sub.add_parser("decay-fit", parents=[common], help="exponential rate of a CSV trajectory")
    s.add_argument("trajectory")
    s.add_argument("--window", type=float, nargs=2, required=True)
    s.add_argument("--min-rate", type=float, default=None)
    s.set_defaults(func=cmd_decay_fit)

    s = sub.add_parser("acceptance", parents=[common], help="run acceptance checks")
    s.add_argument("suite", nargs="?", default="all", choices=sorted(SUITES))
    s.add_argument("--quick", action="store_true", help="dt=1e-2 with tolerances x10")
    s.set_defaults(func=cmd_acceptance)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (OSError, json.JSONDecodeError, KeyError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
