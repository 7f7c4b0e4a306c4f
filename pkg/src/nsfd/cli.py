"""Command-line front end: CSV trajectories and JSON reports.

Exit codes: 0 success, 1 bad input (arguments, model spec, violated
preconditions), 2 numerical failure (singular solve, lost dominance,
Newton or eigensolver divergence), 3 violations found under --strict.
Violations are data: without --strict they are reported in the JSON and
the command still exits 0, so comparison schemes can be demonstrated
failing.  Identical command lines with identical seeds produce
byte-identical output; NSFD_SEED sets the default seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from .analysis import find_equilibria, observed_order, stability_report
from .integrator import (
    SCHEMES,
    NewtonDivergenceError,
    integrate,
    step_bound,
    step_forward_batch,
    step_backward_batch,
)
from .invariance import (
    AUDIT_SCHEMES,
    continuous_tangent,
    discrete_tangent,
    invariance_audit,
    sample_interior,
)
from .linalg import LinAlgError
from .model import MassActionModel, SpecError, dump_model, load_model, validate
from .models import BUILTIN_NAMES, make_builtin

__all__ = ["RunConfig", "cmd_simulate", "main"]

# Relative reversibility tolerance: residual / (1 + |x|) must stay below.
REV_RTOL = 1e-11


class _Parser(argparse.ArgumentParser):
    # Argument errors are input errors: route them to exit code 1, not
    # argparse's default SystemExit(2), which is reserved for numerics.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise SpecError(message)


@dataclass(frozen=True)
class RunConfig:
    """Validated inputs of a simulate run."""

    x0: tuple[float, ...]
    h: float
    model_path: str | None = None
    builtin: str | None = None
    params: tuple[tuple[str, float], ...] = ()
    steps: int | None = None
    t_final: float | None = None
    scheme: str = "nsfd"
    out: str | None = None
    precision: int = 17

    def __post_init__(self) -> None:
        if (self.model_path is None) == (self.builtin is None):
            raise SpecError("exactly one of model_path/builtin is required")
        if (self.steps is None) == (self.t_final is None):
            raise SpecError("exactly one of steps/t_final is required")
        if not (math.isfinite(self.h) and self.h > 0.0):
            raise SpecError(f"h must be positive and finite, got {self.h}")
        if self.steps is not None and self.steps < 0:
            raise SpecError("steps must be nonnegative")
        if self.t_final is not None and not (math.isfinite(self.t_final) and self.t_final > 0.0):
            raise SpecError("t_final must be positive and finite")
        if self.scheme not in SCHEMES:
            raise SpecError(f"scheme must be one of {', '.join(SCHEMES)}")
        if not 1 <= self.precision <= 17:
            raise SpecError("precision must be between 1 and 17 significant digits")


def _parse_x0(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError as exc:
        raise SpecError(f"x0 must be comma-separated numbers, got {text!r}") from exc


def _parse_params(items: list[str]) -> tuple[tuple[str, float], ...]:
    out = []
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise SpecError(f"--param needs NAME=VALUE, got {item!r}")
        try:
            out.append((name, float(value)))
        except ValueError as exc:
            raise SpecError(f"--param {name!r} needs a numeric value, got {value!r}") from exc
    return tuple(out)


def _resolve_model(model_path, builtin, params) -> MassActionModel:
    if model_path is not None:
        if params:
            raise SpecError("--param applies to --builtin models only")
        return load_model(model_path)
    return make_builtin(builtin, **dict(params))


def _model_from_args(args) -> MassActionModel:
    return _resolve_model(args.model, args.builtin, _parse_params(args.param))


def _default_seed(value) -> int:
    if value is not None:
        return int(value)
    raw = os.environ.get("NSFD_SEED", "0")
    try:
        return int(raw)
    except ValueError as exc:
        raise SpecError(f"NSFD_SEED must be an integer, got {raw!r}") from exc


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _jsonable(float(value.real)), "im": _jsonable(float(value.imag))}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise SpecError(f"cannot write {out}: {exc}") from exc


def _emit_json(doc: dict, out: str | None) -> None:
    _emit(json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n", out)


def _fmt(value: float, precision: int) -> str:
    return f"{float(value):.{precision}g}"


def _warn_step_size(model: MassActionModel, h: float, scheme: str) -> None:
    if scheme != "nsfd":
        return
    bound = step_bound(model)
    if not bound.capped and h >= bound.h_bar:
        print(
            f"warning: h={h:g} is not below the safe step bound h_bar={bound.h_bar:g}",
            file=sys.stderr,
        )


def cmd_simulate(cfg: RunConfig) -> int:
    model = _resolve_model(cfg.model_path, cfg.builtin, cfg.params)
    steps = cfg.steps if cfg.steps is not None else max(0, round(cfg.t_final / cfg.h))
    _warn_step_size(model, cfg.h, cfg.scheme)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        traj = integrate(model, np.array(cfg.x0), cfg.h, steps, scheme=cfg.scheme)
    lines = ["t," + ",".join(model.labels)]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join(_fmt(v, cfg.precision) for v in (t, *row)))
    _emit("\n".join(lines) + "\n", cfg.out)
    return 0


def _cmd_simulate(args) -> int:
    return cmd_simulate(
        RunConfig(
            x0=_parse_x0(args.x0),
            h=args.h,
            model_path=args.model,
            builtin=args.builtin,
            params=_parse_params(args.param),
            steps=args.steps,
            t_final=args.t_final,
            scheme=args.scheme,
            out=args.out,
            precision=args.precision,
        )
    )


def _cmd_step_bound(args) -> int:
    model = _model_from_args(args)
    report = step_bound(model)
    doc = {"model": model.name}
    doc.update(report.as_dict())
    _emit_json(doc, args.out)
    return 0


def _cmd_order(args) -> int:
    model = _model_from_args(args)
    est = observed_order(model, np.array(_parse_x0(args.x0)), args.t_final, args.h, scheme=args.scheme)
    doc = {
        "model": model.name,
        "scheme": est.scheme,
        "h": est.h,
        "t_effective": est.t_effective,
        "error_h": est.error_h,
        "error_h2": est.error_h2,
        "p_hat": est.p_hat,
        "defined": est.defined,
    }
    _emit_json(doc, args.out)
    return 3 if args.strict and not est.defined else 0


def _cmd_stability(args) -> int:
    model = _model_from_args(args)
    seed_point = np.array(_parse_x0(args.x0))
    result = find_equilibria(model, [seed_point])[0]
    rows = stability_report(model, result.point, args.h)
    doc = {
        "model": model.name,
        "equilibrium": result.point,
        "equilibrium_status": result.status,
        "h": args.h,
        "rows": [
            {
                "lambda": row.lam,
                "mu_predicted": row.mu_predicted,
                "mu_measured": row.mu_measured,
                "continuous_stable": row.continuous_stable,
                "discrete_stable": row.discrete_stable,
                "consistent": row.consistent,
                "ambiguous": row.ambiguous,
                "near_nonhyperbolic": row.near_nonhyperbolic,
            }
            for row in rows
        ],
        "all_consistent": all(row.consistent for row in rows),
    }
    _emit_json(doc, args.out)
    return 3 if args.strict and not doc["all_consistent"] else 0


def _tangent_doc(report) -> dict:
    return {
        "samples": report.samples,
        "worst_value": report.worst_value,
        "worst_point": report.worst_point,
        "violation_count": len(report.violations),
        "violations": [
            {"point": point, "facet": facet, "value": value}
            for point, facet, value in report.violations[:100]
        ],
        "tolerance": report.tolerance,
        "passed": report.passed,
    }


def _cmd_invariance(args) -> int:
    model = _model_from_args(args)
    seed = _default_seed(args.seed)
    h_safe = True
    if args.scheme == "nsfd":
        bound = step_bound(model)
        h_safe = bound.capped or args.h < bound.h_bar
        if not h_safe:
            message = f"h={args.h:g} is not below the safe step bound h_bar={bound.h_bar:g}"
            if args.strict:
                raise SpecError(message)
            print(f"warning: {message}", file=sys.stderr)
    audit = invariance_audit(
        model, h=args.h, trials=args.trials, steps=args.steps, seed=seed, scheme=args.scheme
    )
    cont = continuous_tangent(model, count=args.tangent_samples, seed=seed)
    # The discrete tangent condition concerns the reversible map below its
    # safe bound; a comparison scheme has no backward step to check, and an
    # oversized h has no meaningful one.
    disc = None
    if args.scheme == "nsfd" and h_safe:
        disc = discrete_tangent(model, h=args.h, count=args.tangent_samples, seed=seed)
    doc = {
        "model": model.name,
        "audit": audit.as_dict(),
        "continuous_tangent": _tangent_doc(cont),
        "discrete_tangent": None if disc is None else _tangent_doc(disc),
    }
    _emit_json(doc, args.out)
    violated = audit.exit_count > 0 or not cont.passed or (disc is not None and not disc.passed)
    return 3 if args.strict and violated else 0


def _cmd_reversibility(args) -> int:
    model = _model_from_args(args)
    seed = _default_seed(args.seed)
    if args.x0 is not None:
        xs = np.array(_parse_x0(args.x0))[None, :]
        trials = 1
    else:
        trials = args.trials
        xs = sample_interior(model.domain, trials, seed)
    ys = step_forward_batch(model, xs, args.h)
    back = step_backward_batch(model, ys, args.h)
    residuals = np.abs(back - xs).max(axis=1)
    relative = residuals / (1.0 + np.abs(xs).max(axis=1))
    worst = int(np.argmax(relative))
    passed = bool(relative[worst] <= REV_RTOL)
    doc = {
        "model": model.name,
        "h": args.h,
        "trials": trials,
        "seed": seed,
        "max_residual": float(residuals.max()),
        "max_relative_residual": float(relative[worst]),
        "worst_state": xs[worst],
        "tolerance": REV_RTOL,
        "passed": passed,
    }
    _emit_json(doc, args.out)
    return 3 if args.strict and not passed else 0


def _cmd_export_model(args) -> int:
    model = make_builtin(args.builtin, **dict(_parse_params(args.param)))
    _emit(dump_model(model), args.out)
    return 0


def _cmd_validate(args) -> int:
    model = _model_from_args(args)
    report = validate(model)
    doc = {
        "model": model.name,
        "metzler": report.metzler,
        "constant_nonnegative": report.constant_nonnegative,
        "compact_domain": report.compact_domain,
        "pq_identity": report.pq_identity,
        "max_pq_deviation": report.max_pq_deviation,
        "issues": list(report.issues),
        "passed": report.passed,
    }
    _emit_json(doc, args.out)
    return 3 if args.strict and not report.passed else 0


def _add_model_args(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", metavar="PATH", help="model spec JSON file")
    group.add_argument("--builtin", metavar="NAME", help=f"built-in model: {', '.join(BUILTIN_NAMES)}")
    p.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="override a built-in parameter (repeatable)",
    )


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")


def _add_strict(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strict", action="store_true", help="exit 3 when violations are found")


def _build_parser() -> _Parser:
    parser = _Parser(prog="nsfd", description="Reversible integration of mass-action models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a model and write a CSV trajectory")
    _add_model_args(p)
    p.add_argument("--x0", required=True, help="initial state, comma-separated")
    p.add_argument("--h", type=float, required=True, help="step size")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--steps", type=int, help="number of steps")
    g.add_argument("--t-final", type=float, help="integrate to this time (steps rounded)")
    p.add_argument("--scheme", choices=SCHEMES, default="nsfd")
    p.add_argument("--precision", type=int, default=17, help="significant digits (default 17)")
    _add_out(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("step-bound", help="print the safe step bound report")
    _add_model_args(p)
    _add_out(p)
    p.set_defaults(func=_cmd_step_bound)

    p = sub.add_parser("order", help="estimate the scheme's convergence order")
    _add_model_args(p)
    p.add_argument("--x0", required=True, help="initial state, comma-separated")
    p.add_argument("--t-final", type=float, required=True, help="horizon T")
    p.add_argument("--h", type=float, required=True, help="coarse step size")
    p.add_argument("--scheme", choices=SCHEMES, default="nsfd")
    _add_strict(p)
    _add_out(p)
    p.set_defaults(func=_cmd_order)

    p = sub.add_parser("stability", help="compare field and step-map eigenvalues at an equilibrium")
    _add_model_args(p)
    p.add_argument("--x0", required=True, help="equilibrium seed, comma-separated")
    p.add_argument("--h", type=float, required=True, help="step size")
    _add_strict(p)
    _add_out(p)
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("invariance", help="audit domain invariance and tangent conditions")
    _add_model_args(p)
    p.add_argument("--h", type=float, required=True, help="step size")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=None, help="default NSFD_SEED or 0")
    p.add_argument("--scheme", choices=AUDIT_SCHEMES, default="nsfd")
    p.add_argument("--tangent-samples", type=int, default=256)
    _add_strict(p)
    _add_out(p)
    p.set_defaults(func=_cmd_invariance)

    p = sub.add_parser("reversibility", help="measure forward-then-backward residuals")
    _add_model_args(p)
    p.add_argument("--h", type=float, required=True, help="step size")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=None, help="default NSFD_SEED or 0")
    p.add_argument("--x0", help="check this single state instead of sampling")
    _add_strict(p)
    _add_out(p)
    p.set_defaults(func=_cmd_reversibility)

    p = sub.add_parser("export-model", help="write a built-in model as spec JSON")
    p.add_argument("--builtin", required=True, metavar="NAME", help=f"one of: {', '.join(BUILTIN_NAMES)}")
    p.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="override a built-in parameter (repeatable)",
    )
    _add_out(p)
    p.set_defaults(func=_cmd_export_model)

    p = sub.add_parser("validate", help="run structural checks on a model")
    _add_model_args(p)
    _add_strict(p)
    _add_out(p)
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (LinAlgError, NewtonDivergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
