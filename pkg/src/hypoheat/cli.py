"""Command-line interface: analyze, kernel, cost, curvature, sweep, simulate.

Systems are described by a JSON file {"A": [[...]], "B": [[...]],
"alpha": [...]} with alpha optional.  Reports are emitted as text (default)
or JSON; `sweep` also emits CSV.  JSON output uses Python's shortest
round-trip float formatting, so parse -> dump reproduces the bytes.

Exit codes: 0 success (all verifications passed), 1 a verification failed,
2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys as _sys

import numpy as np

from .control import connecting_covector, extremal, value_function
from .curvature import finite_difference_oracle, laurent_expansion
from .errors import HypoheatError
from .gramian import (
    DEFAULT_ORDER,
    _gramian_any,
    covariance,
    det_covariance_expansion,
    gramian,
    gramian_quadrature,
    rescaled_series,
)
from .kernel import (
    LOG_2PI,
    diagonal_asymptotics,
    log_exact_kernel,
    log_normalized_diagonal,
    offdiagonal_asymptotics,
    stay_cost,
)
from .sde import SCHEMES, SimulationConfig, moment_check, simulate, write_samples_csv
from .system import build_filtration, validate_system
from .util import parallel_map

DEFAULT_TOLERANCES = {
    # |tr pole - decay_exponent|
    "pole_trace": 1e-8,
    # |tr(leading^{-1} subleading) + tr A|, scaled by 1 + |tr A|
    "series_trace": 1e-8,
    # relative size of cov(t) + gram(-t)
    "reflection": 1e-9,
    # relative closed-form vs quadrature Gramian deviation
    "quadrature": 1e-9,
    # max |trace-route - det-route| expansion coefficient difference
    "route_match": 1e-9,
    # max entrywise deviation of the grid-fit curvature oracle
    "curvature_fit": 1e-4,
    # relative numerical-rank threshold for validation
    "rank": 1e-10,
}


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(part) for part in text.split(",")], dtype=float)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse vector {text!r}") from exc


def _parse_tol(text: str) -> tuple[str, float]:
    name, _, value = text.partition("=")
    if name not in DEFAULT_TOLERANCES:
        raise argparse.ArgumentTypeError(
            f"unknown tolerance {name!r}; known: {', '.join(sorted(DEFAULT_TOLERANCES))}"
        )
    try:
        return name, float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse tolerance value in {text!r}") from exc


def load_system(path: str, rank_rtol: float):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise HypoheatError(f"cannot read system file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise HypoheatError(f"system file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "A" not in raw or "B" not in raw:
        raise HypoheatError(f'system file {path} must be an object with "A" and "B"')
    return validate_system(raw["A"], raw["B"], raw.get("alpha"), rank_rtol=rank_rtol)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def emit_json(payload: dict, out) -> None:
    # canonical key order + repr floats: parse -> dump reproduces the bytes
    out.write(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
    out.write("\n")


def _emit_text(payload: dict, out, indent: str = "") -> None:
    for key, value in payload.items():
        if isinstance(value, dict):
            out.write(f"{indent}{key}:\n")
            _emit_text(value, out, indent + "  ")
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            out.write(f"{indent}{key}:\n")
            for item in value:
                _emit_text(item, out, indent + "  ")
                out.write("\n" if item is not value[-1] else "")
        else:
            out.write(f"{indent}{key}: {_jsonable(value)}\n")


def emit(payload: dict, fmt: str, out) -> None:
    if fmt == "json":
        emit_json(payload, out)
    else:
        _emit_text(payload, out)


# ---------------------------------------------------------------------------
# verification checks shared by analyze


def _verification_checks(sys_, filt, ser, expansion, asympt, tol) -> list[dict]:
    checks = []

    resid = abs(expansion.pole_trace - filt.decay_exponent)
    checks.append(_check("pole_trace_equals_decay_exponent", resid, tol["pole_trace"]))

    lead, sub = ser.leading, ser.subleading
    resid = abs(float(np.trace(np.linalg.solve(lead, sub))) + ser.trace_A)
    checks.append(
        _check("series_trace_identity", resid / (1.0 + abs(ser.trace_A)), tol["series_trace"])
    )

    t_ref = 0.37
    cov = covariance(sys_, t_ref)
    reflected = _gramian_any(sys_, -t_ref)
    resid = float(np.linalg.norm(cov + reflected) / np.linalg.norm(cov))
    checks.append(_check("covariance_reflection", resid, tol["reflection"]))

    t_ref = 0.8
    direct = gramian(sys_, t_ref)
    quad = gramian_quadrature(sys_, t_ref)
    resid = float(np.linalg.norm(direct - quad) / np.linalg.norm(direct))
    checks.append(_check("gramian_quadrature_agreement", resid, tol["quadrature"]))

    if asympt:
        resid = max(
            float(np.max(np.abs(a.coefficients - a.coefficients_from_det))) for a in asympt
        )
        checks.append(_check("expansion_route_agreement", resid, tol["route_match"]))
    return checks


def _check(name: str, residual: float, tolerance: float) -> dict:
    passed = bool(residual <= tolerance)
    return {
        "name": name,
        "status": "PASS" if passed else "FAIL",
        "residual": residual,
        "tolerance": tolerance,
        "passed": passed,
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(args) -> int:
    tol = dict(DEFAULT_TOLERANCES) | dict(args.tol or [])
    sys_ = load_system(args.system, tol["rank"])
    filt = build_filtration(sys_, rank_rtol=tol["rank"])
    order = args.order
    ser = rescaled_series(sys_, filt, order=max(order + 2, DEFAULT_ORDER))
    expansion = laurent_expansion(sys_, filt, order=order, series=ser)
    det_exp = det_covariance_expansion(ser, order=order)

    points = args.point if args.point else [np.zeros(sys_.dim)]
    asympt = [
        diagonal_asymptotics(sys_, x0, order=order, filtration=filt, series=ser)
        for x0 in points
    ]
    checks = _verification_checks(sys_, filt, ser, expansion, asympt, tol)
    all_pass = all(c["passed"] for c in checks)

    payload = {
        "system": _system_echo(sys_),
        "filtration": {
            "dims": list(filt.dims),
            "increments": list(filt.increments),
            "step": filt.step,
            "rows": list(filt.rows),
            "decay_exponent": filt.decay_exponent,
        },
        "series": {
            "c0": ser.c0,
            "det_covariance_expansion": det_exp,
        },
        "curvature": {
            "order": expansion.order,
            "pole": expansion.pole,
            "pole_trace": expansion.pole_trace,
            "coeffs": expansion.coeffs,
            "coeff_traces": expansion.coeff_traces,
        },
        "points": [_point_payload(a) for a in asympt],
        "verification": {"checks": checks, "all_passed": all_pass},
    }
    emit(payload, args.format, _sys.stdout)
    return 0 if all_pass else 1


def _system_echo(sys_) -> dict:
    return {
        "A": sys_.A,
        "B": sys_.B,
        "alpha": sys_.alpha,
        "dim": sys_.dim,
        "rank": sys_.rank,
        "kalman_step": sys_.kalman_step,
    }


def _point_payload(a) -> dict:
    payload = {
        "x0": a.point,
        "regime": a.regime_label(),
        "level": a.level,
        "decay_exponent": a.decay_exponent,
        "c0": a.c0,
        "coefficients": a.coefficients,
        "coefficients_from_det": a.coefficients_from_det,
    }
    if a.first_order is not None:
        payload["first_order"] = a.first_order
    if a.rate is not None:
        payload["rate"] = a.rate
        payload["rate_correction"] = a.rate_correction
    return payload


def cmd_kernel(args) -> int:
    tol = dict(DEFAULT_TOLERANCES) | dict(args.tol or [])
    sys_ = load_system(args.system, tol["rank"])
    x = args.x if args.x is not None else np.zeros(sys_.dim)
    y = args.y if args.y is not None else np.zeros(sys_.dim)
    log_p = log_exact_kernel(sys_, args.t, x, y)
    cost, _ = offdiagonal_asymptotics(sys_, x, y, order=args.order)
    s_t = cost(args.t)
    logdet = -2.0 * (log_p + s_t) - sys_.dim * LOG_2PI
    payload = {
        "t": args.t,
        "x": x,
        "y": y,
        "density": math.exp(log_p) if log_p < 709 else math.inf,
        "log_density": log_p,
        "exponent": s_t,
        "det_covariance": math.exp(logdet) if logdet < 709 else math.inf,
        "log_det_covariance": logdet,
    }
    emit(payload, args.format, _sys.stdout)
    return 0


def cmd_cost(args) -> int:
    tol = dict(DEFAULT_TOLERANCES) | dict(args.tol or [])
    sys_ = load_system(args.system, tol["rank"])
    p0 = connecting_covector(sys_, args.x1, args.x2, args.t)
    value = value_function(sys_, args.x1, args.x2, args.t)
    endpoint = extremal(sys_, p0, args.x1).state(args.t)
    resid = float(np.linalg.norm(endpoint - args.x2) / (1.0 + np.linalg.norm(args.x2)))
    payload = {
        "t": args.t,
        "x1": args.x1,
        "x2": args.x2,
        "covector": p0,
        "value": value,
        "endpoint": endpoint,
        "endpoint_residual": resid,
    }
    emit(payload, args.format, _sys.stdout)
    return 0 if resid <= 1e-8 else 1


def cmd_curvature(args) -> int:
    tol = dict(DEFAULT_TOLERANCES) | dict(args.tol or [])
    sys_ = load_system(args.system, tol["rank"])
    filt = build_filtration(sys_, rank_rtol=tol["rank"])
    ser = rescaled_series(sys_, filt, order=max(args.order + 2, DEFAULT_ORDER))
    expansion = laurent_expansion(sys_, filt, order=args.order, series=ser)
    payload = {
        "order": expansion.order,
        "pole": expansion.pole,
        "pole_trace": expansion.pole_trace,
        "decay_exponent": filt.decay_exponent,
        "coeffs": expansion.coeffs,
        "coeff_traces": expansion.coeff_traces,
    }
    code = 0
    if args.check:
        grid = np.geomspace(2e-3, 1e-1, args.order + 5)
        fit = finite_difference_oracle(sys_, args.order, grid, series=ser)
        resid = max(
            float(np.max(np.abs(fit.pole - expansion.pole))),
            float(np.max(np.abs(fit.coeffs - expansion.coeffs))),
        )
        check = _check("grid_fit_agreement", resid, tol["curvature_fit"])
        payload["verification"] = {"checks": [check], "all_passed": check["passed"]}
        code = 0 if check["passed"] else 1
    emit(payload, args.format, _sys.stdout)
    return code


def cmd_sweep(args) -> int:
    tol = dict(DEFAULT_TOLERANCES) | dict(args.tol or [])
    sys_ = load_system(args.system, tol["rank"])
    if args.n < 2:
        raise HypoheatError(f"sweep needs at least 2 grid points, got {args.n}")
    if not 0 < args.t_min < args.t_max:
        raise HypoheatError("need 0 < t-min < t-max")
    filt = build_filtration(sys_, rank_rtol=tol["rank"])
    ser = rescaled_series(sys_, filt, order=max(args.order + 2, DEFAULT_ORDER))
    x0 = args.point if args.point is not None else np.zeros(sys_.dim)
    asym = diagonal_asymptotics(sys_, x0, order=args.order, filtration=filt, series=ser)
    grid = np.geomspace(args.t_min, args.t_max, args.n)

    def row(t: float) -> dict:
        log_norm = log_normalized_diagonal(sys_, t, x0, series=ser)
        log_p = (
            log_norm
            - 0.5 * ser.decay_exponent * math.log(t)
            - 0.5 * math.log(ser.c0)
            - 0.5 * sys_.dim * LOG_2PI
        )
        log_model = asym.log_asymptotic_normalized(t)
        log_asym = asym.log_asymptotic_kernel(t)
        return {
            "t": float(t),
            "p_exact": math.exp(log_p) if log_p < 709 else math.inf,
            "p_asym": math.exp(log_asym) if log_asym < 709 else math.inf,
            "normalized_residual": math.exp(log_norm) - math.exp(log_model),
            "stay_cost": stay_cost(sys_, t, x0, series=ser),
        }

    rows = parallel_map(row, list(grid))
    fieldnames = ["t", "p_exact", "p_asym", "normalized_residual", "stay_cost"]
    if args.format == "json":
        emit_json({"x0": x0, "regime": asym.regime_label(), "rows": rows}, _sys.stdout)
    else:
        writer = csv.DictWriter(_sys.stdout, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows([{k: repr(v) if isinstance(v, float) else v for k, v in r.items()} for r in rows])
    return 0


def cmd_simulate(args) -> int:
    tol = dict(DEFAULT_TOLERANCES) | dict(args.tol or [])
    sys_ = load_system(args.system, tol["rank"])
    x0 = args.point if args.point is not None else np.zeros(sys_.dim)
    config = SimulationConfig(
        n_paths=args.n_paths,
        dt=args.dt,
        t_final=args.t_final,
        seed=args.seed,
        scheme=args.scheme,
    )
    samples = simulate(sys_, x0, config)
    if args.dump_csv:
        write_samples_csv(samples, args.dump_csv)
    report = moment_check(samples, sys_, x0, config.t_final, z_max=args.z_max)
    payload = {
        "scheme": config.scheme,
        "n_paths": config.n_paths,
        "dt": config.dt_effective,
        "t_final": config.t_final,
        "seed": config.seed,
        "x0": x0,
        "ref_mean": report.ref_mean,
        "sample_mean": report.sample_mean,
        "ref_cov": report.ref_cov,
        "sample_cov": report.sample_cov,
        "z_mean": report.z_mean,
        "z_cov": report.z_cov,
        "max_abs_z": report.max_abs_z,
        "z_max": report.z_max,
        "passed": report.passed,
    }
    emit(payload, args.format, _sys.stdout)
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypoheat",
        description="Small-time heat kernel asymptotics for linear diffusions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, order_default=4, formats=("text", "json")):
        p.add_argument("system", help="JSON file with A, B, and optional alpha")
        p.add_argument("--order", type=int, default=order_default, help="expansion order")
        p.add_argument("--tol", type=_parse_tol, action="append", metavar="NAME=VALUE")
        p.add_argument("--format", choices=formats, default=formats[0])

    p = sub.add_parser("analyze", help="filtration, curvature, asymptotics, verification")
    common(p)
    p.add_argument("--point", type=_parse_vector, action="append", metavar="X1,X2,...")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("kernel", help="evaluate the exact transition density")
    common(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x", type=_parse_vector, metavar="X1,X2,...")
    p.add_argument("--y", type=_parse_vector, metavar="Y1,Y2,...")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("cost", help="minimum-energy steering cost and covector")
    common(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x1", type=_parse_vector, required=True, metavar="X1,X2,...")
    p.add_argument("--x2", type=_parse_vector, required=True, metavar="X1,X2,...")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("curvature", help="Laurent data of the inverse-Gramian family")
    common(p)
    p.add_argument("--check", action="store_true", help="compare against the grid-fit oracle")
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("sweep", help="exact vs asymptotic diagonal over a time grid")
    common(p, formats=("csv", "json", "text"))
    p.add_argument("--point", type=_parse_vector, metavar="X1,X2,...")
    p.add_argument("--t-min", type=float, default=1e-3, dest="t_min")
    p.add_argument("--t-max", type=float, default=1e-1, dest="t_max")
    p.add_argument("--n", type=int, default=20)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo check of the transition moments")
    common(p)
    p.add_argument("--point", type=_parse_vector, metavar="X1,X2,...")
    p.add_argument("--n-paths", type=int, default=100000, dest="n_paths")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--t-final", type=float, default=1.0, dest="t_final")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", choices=SCHEMES, default="exact")
    p.add_argument("--z-max", type=float, default=4.0, dest="z_max")
    p.add_argument("--dump-csv", dest="dump_csv", metavar="PATH")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HypoheatError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2


def entrypoint() -> None:
    _sys.exit(main())


if __name__ == "__main__":
    entrypoint()
