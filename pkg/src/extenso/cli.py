"""Command-line entry point: ``extenso {check,entropy,flow,chart} CONFIG``."""

from __future__ import annotations

import argparse
import fnmatch
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .config import (CheckSpec, SystemConfig, load_config, parse_point, parse_points,
                     resolve_function)
from .diffcalc import Box
from .errors import ConfigError, ExtensoError
from .extensivity import (CheckReport, SampleSpec, _Collector, check_extensive_form,
                          check_extensive_function, check_integrable, check_nonvanishing,
                          check_scaling_law, check_transversal_level_set, failed_report,
                          recover_entropy_detailed, sweep, transversality_value)
from .flows import extensive_chart_from_field, flow, pushforward_residual
from .models import (check_metric_scaling, check_potential_degree, first_law_residual,
                     null_direction_residual, quevedo_metric, ruppeiner_metric, work_wedge)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class Runner:
    """Turns a :class:`CheckSpec` into a :class:`CheckReport`."""

    def __init__(self, cfg: SystemConfig, seed: int, tol_scale: float = 1.0):
        self.cfg = cfg
        self.seed = seed
        self.tol_scale = tol_scale

    # helpers
    def _form(self, spec: CheckSpec, default: str = "theta"):
        key = spec.params["form"].value if "form" in spec.params else default
        return self.cfg.forms[key]

    def _field(self, spec: CheckSpec):
        key = spec.params["field"].value if "field" in spec.params else "rho"
        return self.cfg.fields[key]

    def _function(self, spec: CheckSpec):
        return resolve_function(self.cfg, spec.params.get("function"))

    def samples(self, spec: CheckSpec) -> SampleSpec:
        box = spec.box or self.cfg.sample_box
        if box is None:
            raise ConfigError(f"check {spec.name!r} needs a 'box' (or [system] sample_box)",
                              spec.line, 1, "box")
        seed = spec.seed if spec.seed is not None else self.seed
        constraint = self.cfg.system.constraint if self.cfg.system is not None else None
        return SampleSpec(box, spec.samples, seed, constraint=constraint)

    def run(self, spec: CheckSpec) -> CheckReport:
        tol = spec.tol * self.tol_scale
        try:
            return getattr(self, "_" + spec.kind)(spec, tol).renamed(spec.name)
        except Exception as exc:  # any failure inside a check becomes a failed report
            return failed_report(spec.name, tol, exc)

    # check kinds
    def _extensive_function(self, spec, tol):
        st = spec.params.get("scaling_tol")
        scaling = float(st.value) * self.tol_scale if st is not None else None
        return check_extensive_function(self._function(spec), self._field(spec), self.samples(spec),
                                        tol, scaling_tol=scaling)

    def _extensive_form(self, spec, tol):
        return check_extensive_form(self._form(spec), self._field(spec), self.samples(spec), tol)

    def _integrable(self, spec, tol):
        return check_integrable(self._form(spec), self.samples(spec), tol)

    def _transversal(self, spec, tol):
        theta, rho = self._form(spec), self._field(spec)
        return check_nonvanishing(lambda p: transversality_value(theta, rho, p),
                                  self.samples(spec), tol)

    def _scaling_law(self, spec, tol):
        omega, rho = self._form(spec), self._field(spec)
        pts = ([parse_point(spec.params["point"], "point", self.cfg.n)]
               if "point" in spec.params else self.samples(spec).generate())
        times = [float(t) for t in spec.params["times"].value.split(",")]
        col = _Collector()
        notes = []
        for p in pts:
            worst = 0.0
            for t in times:
                rep = check_scaling_law(omega, rho, p, t, tol)
                if rep.samples == 0:
                    notes.append(rep.detail)
                worst = max(worst, rep.max_residual)
            col.add(p, worst)
        return col.report(spec.name, tol, detail=notes[0] if notes else f"times={','.join(map(str, times))}")

    def _entropy_recovery(self, spec, tol):
        theta, rho = self._form(spec), self._field(spec)
        S = self._function(spec)
        n = self.cfg.n
        base = (parse_point(spec.params["base"], "base", n) if "base" in spec.params
                else np.ones(n))
        via = parse_points(spec.params["via"], "via", n) if "via" in spec.params else None
        if "targets" in spec.params:
            targets = parse_points(spec.params["targets"], "targets", n)
        else:
            count = int(spec.params["random_targets"].value) if "random_targets" in spec.params else 10
            s = self.samples(spec)
            S_base = S(base)
            pool = SampleSpec(s.box, 20 * count, s.seed, constraint=s.constraint).generate()
            # keep targets on the same side of S = 0 as the base point
            targets = [q for q in pool if S(q) * S_base > 0][:count]
        S0 = S(base)
        col = _Collector()
        sign = 1.0 if S0 > 0 else -1.0
        for q in targets:
            rec = recover_entropy_detailed(theta, rho, base, sign * S0, q, tol=1e-9, path=via)
            direct = S(q)
            col.add(q, abs(sign * rec.value - direct) / max(abs(direct), 1e-300))
        return col.report(spec.name, tol, detail=f"base={tuple(float(x) for x in base)}")

    def _first_law(self, spec, tol):
        system = self.cfg.system
        return sweep(spec.name, self.samples(spec), tol, lambda p: first_law_residual(system, p))

    def _work_wedge(self, spec, tol):
        system = self.cfg.system
        expect = spec.params["expect"].value
        if "point" in spec.params or "points" in spec.params:
            pts = ([parse_point(spec.params["point"], "point", 3)] if "point" in spec.params
                   else parse_points(spec.params["points"], "points", 3))
            s = SampleSpec(self.cfg.domain, len(pts), 0, tuple(tuple(p) for p in pts))
        else:
            s = self.samples(spec)
        if expect == "zero":
            return sweep(spec.name, s, tol, lambda p: work_wedge(system, p).max_abs())
        return check_nonvanishing(lambda p: work_wedge(system, p).values[0], s, tol)

    def _metric_scaling(self, spec, tol):
        phi = self._function(spec)
        beta = float(spec.params["beta"].value) if "beta" in spec.params else 1.0
        build = ruppeiner_metric if spec.params["metric"].value == "ruppeiner" else quevedo_metric
        return check_metric_scaling(build(phi, beta), self._field(spec), self.samples(spec), tol)

    def _null_direction(self, spec, tol):
        g = ruppeiner_metric(self._function(spec), 1.0)
        rho = self._field(spec)
        return sweep(spec.name, self.samples(spec), tol, lambda p: null_direction_residual(g, rho, p))

    def _level_set(self, spec, tol):
        band = float(spec.params["band"].value) if "band" in spec.params else None
        return check_transversal_level_set(self._function(spec), self._field(spec),
                                           float(spec.params["value"].value), self.samples(spec),
                                           tol, band)

    def _potential_degree(self, spec, tol):
        return check_potential_degree(self._function(spec), self._field(spec),
                                      float(spec.params["beta"].value), self.samples(spec), tol)


def resolve_seed(cli_seed: int | None, cfg: SystemConfig) -> int:
    if cli_seed is not None:
        return cli_seed
    if cfg.seed is not None:
        return cfg.seed
    env = os.environ.get("EXTENSO_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"EXTENSO_SEED must be an integer, got {env!r}") from None
    return 0


def run_checks(cfg: SystemConfig, pattern: str | None = None, seed: int | None = None,
               jobs: int = 1, tol_scale: float = 1.0,
               emit: Callable[[CheckReport], None] | None = None) -> list[CheckReport]:
    """Run the selected checks; ``emit`` sees reports in declaration order."""
    runner = Runner(cfg, resolve_seed(seed, cfg), tol_scale)
    selected = [c for c in cfg.checks if pattern is None or fnmatch.fnmatchcase(c.name, pattern)]
    reports = []
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = [pool.submit(runner.run, spec) for spec in selected]
        for fut in futures:
            rep = fut.result()
            reports.append(rep)
            if emit is not None:
                emit(rep)
    return reports


# -- argument parsing ------------------------------------------------------------------

def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extenso",
                                     description="Numerical checks of extensivity for thermodynamic systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run the check suite declared in a config file")
    p.add_argument("config")
    p.add_argument("--filter", metavar="GLOB", help="only run checks whose name matches GLOB")
    p.add_argument("--seed", type=int, help="sampling seed (falls back to EXTENSO_SEED)")
    p.add_argument("--jobs", type=int, default=1, help="run up to N checks concurrently")
    p.add_argument("--format", choices=("text", "records"), default="text")
    p.add_argument("--tol-scale", type=_positive, default=1.0, metavar="X",
                   help="multiply every tolerance by X")

    p = sub.add_parser("entropy", help="recover S at a target state from the heat form")
    p.add_argument("config")
    p.add_argument("--base", type=_floats, required=True)
    p.add_argument("--target", type=_floats, required=True)
    p.add_argument("--s0", type=float, help="entropy at the base point (default: evaluate S)")
    p.add_argument("--form", default="theta")
    p.add_argument("--field", default="rho")
    p.add_argument("--tol", type=_positive, default=1e-9)

    p = sub.add_parser("flow", help="print samples along an integral curve")
    p.add_argument("config")
    p.add_argument("--field", default="rho")
    p.add_argument("--point", type=_floats, required=True)
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--steps", type=int, default=10, help="number of printed samples")
    p.add_argument("--tol", type=_positive, default=1e-10)

    p = sub.add_parser("chart", help="build an extensive chart around a point and report residuals")
    p.add_argument("config")
    p.add_argument("--field", default="rho")
    p.add_argument("--point", type=_floats, required=True)
    p.add_argument("--radius", type=_positive, default=0.3)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=_positive, default=1e-10)
    return parser


def _cmd_check(args, out) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args.seed, cfg)

    def emit(rep: CheckReport):
        print(rep.to_record() if args.format == "records" else rep.to_text(), file=out, flush=True)

    start = time.perf_counter()
    reports = run_checks(cfg, args.filter, seed, args.jobs, args.tol_scale, emit)
    if not reports:
        print(f"no checks match {args.filter!r}", file=sys.stderr)
        return EXIT_FAIL
    failed = sum(not r.passed for r in reports)
    if args.format == "text":
        print(f"{cfg.name}: {len(reports) - failed}/{len(reports)} checks passed "
              f"in {time.perf_counter() - start:.2f}s (seed {seed})", file=out)
    return EXIT_OK if failed == 0 else EXIT_FAIL


def _lookup(pool: dict, key: str, what: str):
    if key not in pool:
        raise ConfigError(f"unknown {what} {key!r}; known: {', '.join(sorted(pool))}")
    return pool[key]


def _check_dim(cfg: SystemConfig, **points) -> None:
    for name, p in points.items():
        if len(p) != cfg.n:
            raise ConfigError(f"--{name} needs {cfg.n} coordinates, got {len(p)}")


def _cmd_entropy(args, out) -> int:
    cfg = load_config(args.config)
    _check_dim(cfg, base=args.base, target=args.target)
    theta = _lookup(cfg.forms, args.form, "form")
    rho = _lookup(cfg.fields, args.field, "field")
    S0 = args.s0 if args.s0 is not None else resolve_function(cfg, None)(args.base)
    rec = recover_entropy_detailed(theta, rho, args.base, S0, args.target, args.tol)
    print(f"S(target) = {rec.value:.15g}", file=out)
    print(f"quadrature nodes = {rec.nodes}, max |d(theta/theta(rho))| = {rec.max_closedness:.3e}, "
          f"min |theta(rho)| = {rec.min_transversality:.3e}", file=out)
    if cfg.system is not None and args.s0 is None:
        direct = cfg.system.S(args.target)
        rel = abs(rec.value - direct) / max(abs(direct), 1e-300)
        print(f"direct S(target) = {direct:.15g}  relative difference = {rel:.3e}", file=out)
    return EXIT_OK


def _cmd_flow(args, out) -> int:
    cfg = load_config(args.config)
    _check_dim(cfg, point=args.point)
    X = _lookup(cfg.fields, args.field, "field")
    steps = max(1, args.steps)
    x = np.asarray(args.point, dtype=float)
    dt = args.time / steps
    print(f"t=0 x=({', '.join(f'{v:.12g}' for v in x)})", file=out)
    for i in range(1, steps + 1):
        x = flow(X, x, dt, args.tol, variational=False).endpoint
        print(f"t={i * dt:.6g} x=({', '.join(f'{v:.12g}' for v in x)})", file=out)
    return EXIT_OK


def _cmd_chart(args, out) -> int:
    cfg = load_config(args.config)
    _check_dim(cfg, point=args.point)
    X = _lookup(cfg.fields, args.field, "field")
    chart = extensive_chart_from_field(X, args.point, args.radius, args.tol)
    lo = np.maximum(np.asarray(chart.domain.lower), args.point - args.radius)
    hi = np.minimum(np.asarray(chart.domain.upper), args.point + args.radius)
    seed = resolve_seed(args.seed, cfg)
    s = SampleSpec(Box(tuple(lo), tuple(hi)), args.samples, seed)
    report = sweep(f"chart_{args.field}", s, 1e-6,
                   lambda p: pushforward_residual(chart, X, p, "radial"))
    print(report.to_text(), file=out)
    return EXIT_OK if report.passed else EXIT_FAIL


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    handler = {"check": _cmd_check, "entropy": _cmd_entropy, "flow": _cmd_flow,
               "chart": _cmd_chart}[args.command]
    try:
        return handler(args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExtensoError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
