"""Command-line driver: ``alexlab <subcommand> [options]``.

Exit status: 0 when every check passes, 1 when violations are found,
2 on configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .critical import (
    alpha_of,
    critical_scan,
    default_curvature,
    gamma_threshold,
    geodesic_placement_check,
    theorem_constants,
    contradiction_margin,
)
from .excess import ExcessSampleConfig, verify_excess_on_space, write_triples_csv
from .generators import KINDS, make_space, sample
from .io import SpaceFormatError, load_space, save_space
from .measure import (
    ball_ratio_check,
    bg_profile_check,
    integration_lemma_check,
    profile_summary,
    radial_profile,
)
from .metric_core import check_quadruples, estimate_curvature_bound
from .model_plane import DomainError
from .report import VIOLATION, VerificationReport, _jsonable

log = logging.getLogger("alexlab")

EXIT_OK, EXIT_VIOLATION, EXIT_ERROR = 0, 1, 2


class ConfigError(ValueError):
    """Invalid or out-of-domain run configuration."""


# -- argument parsing ------------------------------------------------------------


def _space_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("space")
    g.add_argument("--input", help="space file (JSON) instead of a generator")
    g.add_argument("--space", choices=sorted(KINDS), help="generator kind")
    g.add_argument("--n", type=int, default=None, help="dimension (euclidean) / measure dimension")
    g.add_argument("--R", type=float, default=None, help="truncation radius")
    g.add_argument("--rho", type=float, default=None, help="cone link ratio or cylinder radius")
    g.add_argument("--kappa", type=float, default=None, help="curvature (hyperbolic, < 0)")
    g.add_argument("--half-height", type=float, default=None, dest="half_height")
    g.add_argument("--a", type=float, default=None, help="paraboloid coefficient")
    g.add_argument("--N", type=int, default=2000, help="sample size")
    g.add_argument("--seed", type=int, default=0)


def _output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="report path (JSON); stdout when omitted")
    p.add_argument("--csv", help="optional CSV dump")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alexlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"alexlab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with default option values")
        return p

    p = add("generate", "sample a model space and write it as JSON")
    _space_args(p)
    p.add_argument("--out", required=False, help="space file to write; stdout when omitted")

    p = add("inspect", "summarise a space")
    _space_args(p)
    _output_args(p)

    p = add("check-curvature", "quadruple curvature test")
    _space_args(p)
    p.add_argument("--k", type=float, default=None, help="comparison curvature (default: generator bound)")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--estimate", action="store_true", help="also estimate the curvature bound")
    _output_args(p)

    p = add("check-bg", "volume comparison checks at a center")
    _space_args(p)
    p.add_argument("--center", type=int, default=None)
    p.add_argument("--bins", type=int, default=8)
    p.add_argument("--tol", type=float, default=0.05, help="relative tolerance of the profile check")
    p.add_argument("--ratio-tol", type=float, default=0.01, dest="ratio_tol")
    p.add_argument("--r1", type=float, default=None)
    p.add_argument("--r2", type=float, default=None)
    _output_args(p)

    p = add("check-excess", "excess estimate on sampled triples")
    _space_args(p)
    p.add_argument("--triples", type=int, default=10_000)
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--height-method", choices=["vertices", "exact"], default="vertices", dest="height_method")
    p.add_argument("--min-s", type=float, default=0.0, dest="min_s")
    p.add_argument("--h-min", type=float, default=None, dest="h_min")
    p.add_argument("--h-max", type=float, default=None, dest="h_max")
    p.add_argument("--x-pool", default=None, dest="x_pool", help="comma-separated indices")
    _output_args(p)

    p = add("scan-critical", "critical points of the distance from a center")
    _space_args(p)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--center", type=int, default=None)
    p.add_argument("--radii", default=None, help="comma-separated radius grid")
    p.add_argument("--radius-count", type=int, default=10, dest="radius_count")
    p.add_argument("--tol", type=float, default=1e-6)
    _output_args(p)

    p = add("thresholds", "explicit theorem constants")
    p.add_argument("--n", type=int, required=False, default=None)
    p.add_argument("--kappa", type=float, required=False, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--Cbar", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    _output_args(p)

    p = add("verify-all", "run every pipeline on one space")
    _space_args(p)
    p.add_argument("--out-dir", default=None, dest="out_dir", help="directory for per-pipeline reports")
    p.add_argument("--triples", type=int, default=2000)
    p.add_argument("--samples", type=int, default=2000)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    known = set(vars(args))
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    # re-parse so explicit flags override file values
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


# -- helpers -------------------------------------------------------------------------


def _space_params(args) -> dict[str, Any]:
    kind = args.space
    table = {
        "euclidean": {"n": args.n, "R": args.R},
        "cone": {"rho": args.rho, "R": args.R},
        "cylinder": {"rho": args.rho, "half_height": args.half_height},
        "hyperbolic": {"kappa": args.kappa, "R": args.R},
        "paraboloid": {"a": args.a, "R": args.R},
    }
    return {k: v for k, v in table[kind].items() if v is not None}


def _load(args):
    if args.input and args.space:
        raise ConfigError("give either --input or --space, not both")
    if args.input:
        return load_space(args.input)
    if not args.space:
        raise ConfigError("a space is required (--input or --space)")
    if args.N < 16:
        raise ConfigError("N must be at least 16")
    try:
        space = make_space(args.space, **_space_params(args))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return sample(space, args.N, args.seed)


def _echo(args) -> dict[str, Any]:
    skip = {"func", "config", "out", "csv", "out_dir", "verbose", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _center(ms, args) -> int:
    c = getattr(args, "center", None)
    if c is not None:
        if not 0 <= c < ms.point_count:
            raise ConfigError("center index out of range")
        return int(c)
    return int(ms.base.base_index or 0)


def report_document(rep: VerificationReport, args, extra: dict | None = None) -> dict[str, Any]:
    doc = rep.to_dict()
    doc["config_echo"] = _jsonable(_echo(args))
    doc["seed"] = int(getattr(args, "seed", 0) or 0)
    if extra:
        doc.update(_jsonable(extra))
    return doc


def emit(doc: dict[str, Any], path: str | None) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_text(text)
    meta = {
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "version": __version__,
        "argv": sys.argv[1:],
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def _status(*reports: VerificationReport) -> int:
    return EXIT_VIOLATION if any(r.verdict == VIOLATION for r in reports) else EXIT_OK


# -- pipelines --------------------------------------------------------------------------


def run_generate(args) -> int:
    ms = _load(args)
    if args.out:
        save_space(ms, args.out)
    else:
        from .io import space_to_dict

        sys.stdout.write(json.dumps(space_to_dict(ms), sort_keys=True) + "\n")
    return EXIT_OK


def run_inspect(args) -> int:
    ms = _load(args)
    f = ms.base
    doc = {
        "pipeline": "inspect",
        "name": f.name,
        "point_count": f.point_count,
        "backing": f.backing,
        "n": ms.n,
        "net_spacing": f.net_spacing,
        "total_weight": ms.total_weight,
        "generator": f.analytic.spec() if f.analytic is not None else None,
        "config_echo": _echo(args),
        "seed": args.seed,
    }
    emit(_jsonable(doc), args.out)
    return EXIT_OK


def curvature_report(ms, args) -> tuple[VerificationReport, dict]:
    k = args.k if args.k is not None else default_curvature(ms)
    rep = check_quadruples(ms.base, k, args.samples, args.seed, tol=getattr(args, "tol", None))
    extra = {}
    if getattr(args, "estimate", False):
        extra["curvature_estimate"] = estimate_curvature_bound(ms.base, args.samples, args.seed)
    return rep, extra


def run_check_curvature(args) -> int:
    ms = _load(args)
    rep, extra = curvature_report(ms, args)
    emit(report_document(rep, args, extra), args.out)
    return _status(rep)


def bg_report(ms, args) -> tuple[VerificationReport, dict]:
    p = _center(ms, args)
    prof = radial_profile(ms, p, args.bins)
    n = ms.n
    rep = bg_profile_check(prof, n, args.tol)
    top = prof.edges[-1]
    r1 = args.r1 if args.r1 is not None else top / 3
    r2 = args.r2 if args.r2 is not None else top
    ratio = ball_ratio_check(ms, p, r1, r2, n, args.ratio_tol)
    out = VerificationReport(pipeline="check-bg", tolerance=args.tol)
    out.items_tested = rep.items_tested + ratio.items_tested
    out.worst_margin = min(rep.worst_margin, ratio.worst_margin)
    out.violations = [{"check": "profile", **v} for v in rep.violations] + [
        {"check": "ball_ratio", **v} for v in ratio.violations
    ]
    out.warnings = rep.warnings + ratio.warnings
    out.finalize()
    extra = {
        "center": p,
        "profile": profile_summary(prof, n),
        "profile_verdict": rep.verdict,
        "ball_ratio": ratio.details,
        "ball_ratio_verdict": ratio.verdict,
    }
    if args.csv:
        prof.write_csv(args.csv, n)
    return out, extra


def run_check_bg(args) -> int:
    ms = _load(args)
    rep, extra = bg_report(ms, args)
    emit(report_document(rep, args, extra), args.out)
    return _status(rep)


def excess_report(ms, args) -> VerificationReport:
    h_range = None
    if args.h_min is not None or args.h_max is not None:
        h_range = (args.h_min or 0.0, args.h_max if args.h_max is not None else math.inf)
    x_pool = None
    if getattr(args, "x_pool", None):
        x_pool = [int(v) for v in str(args.x_pool).split(",")]
    cfg = ExcessSampleConfig(
        triple_count=args.triples,
        seed=args.seed,
        pair_count=args.pairs,
        x_pool=x_pool,
        min_s=args.min_s,
        h_range=h_range,
        height_method=args.height_method,
    )
    triples: list = []
    rep = verify_excess_on_space(ms, cfg, triples_out=triples)
    if getattr(args, "csv", None):
        write_triples_csv(triples, args.csv)
    return rep


def run_check_excess(args) -> int:
    ms = _load(args)
    rep = excess_report(ms, args)
    emit(report_document(rep, args), args.out)
    return _status(rep)


def critical_report(ms, args) -> tuple[VerificationReport, dict]:
    f = ms.base
    p = _center(ms, args)
    if args.radii:
        grid = [float(v) for v in str(args.radii).split(",")]
    else:
        top = 0.8 * (f.analytic.truncation_radius if f.analytic is not None else float(f.row(p).max()))
        grid = np.linspace(3 * f.net_spacing, top, args.radius_count).tolist()
    scan = critical_scan(ms, args.k, p, grid, tol=args.tol)
    rep = VerificationReport(pipeline="scan-critical", tolerance=args.tol)
    rep.items_tested = int(sum(scan.tested_per_radius))
    outer = grid[-1]
    rep.violations = [
        {"point": i, "radius": r} for i, r in scan.critical if abs(r - outer) <= scan.band
    ]
    rep.worst_margin = -1.0 if rep.violations else 0.0
    if scan.inconclusive:
        rep.warnings.append(f"{scan.inconclusive} test points had thin annuli")
    rep.finalize()
    return rep, {"scan": scan.to_dict()}


def run_scan_critical(args) -> int:
    ms = _load(args)
    rep, extra = critical_report(ms, args)
    emit(report_document(rep, args, extra), args.out)
    return _status(rep)


def run_thresholds(args) -> int:
    if args.n is None or args.kappa is None:
        raise ConfigError("thresholds needs --n and --kappa")
    tc = theorem_constants(args.n, args.kappa, args.eps)
    radii = np.geomspace(0.1, 1000.0, 200)
    margins = np.array([contradiction_margin(args.n, args.kappa, tc.eps_hat, float(R)) for R in radii])
    rep = VerificationReport(pipeline="thresholds", items_tested=len(radii), tolerance=0.0)
    rep.worst_margin = float(margins.min())
    if rep.worst_margin <= 0:
        rep.violations.append({"R": float(radii[int(np.argmin(margins))]), "margin": rep.worst_margin})
    rep.finalize()
    # alpha decreases in eps, so its infimum over admissible eps sits at epsilon_max
    eps_alpha = tc.epsilon_max if args.eps is None else tc.eps_hat
    extra = {
        "n": tc.n,
        "kappa": tc.kappa,
        "epsilon_max": tc.epsilon_max,
        "alpha_min": alpha_of(tc.n, eps_alpha),
        "alpha_at_eps_hat": tc.alpha_min,
        "eps_hat": tc.eps_hat,
        "contradiction_margin_min": rep.worst_margin,
    }
    if args.C is not None:
        eps = args.eps if args.eps is not None else tc.eps_hat
        extra["gamma"] = gamma_threshold(eps, args.C, args.n)
        if args.Cbar is not None:
            extra["gamma_intermediate"] = gamma_threshold(eps, args.C, args.n, args.Cbar)
    emit(report_document(rep, args, extra), args.out)
    return _status(rep)


def run_verify_all(args) -> int:
    ms = _load(args)
    f = ms.base
    ns = argparse.Namespace(**vars(args))
    ns.k, ns.tol, ns.estimate, ns.center = None, None, False, None
    reports: dict[str, tuple[VerificationReport, dict]] = {}
    reports["check-curvature"] = curvature_report(ms, ns)
    ns.bins, ns.tol, ns.ratio_tol, ns.r1, ns.r2, ns.csv = 8, 0.05, 0.01, None, None, None
    reports["check-bg"] = bg_report(ms, ns)
    ns.pairs, ns.min_s, ns.h_min, ns.h_max, ns.height_method, ns.x_pool = 100, 0.0, None, None, "vertices", None
    reports["check-excess"] = (excess_report(ms, ns), {})
    ns.radii, ns.radius_count, ns.tol = None, 10, 1e-6
    reports["scan-critical"] = critical_report(ms, ns)
    if f.analytic is not None:
        r = 0.2 * f.analytic.truncation_radius
        place = geodesic_placement_check(ms, _center(ms, ns), 3.0, 0.05, r, seed=args.seed)
        reports["geodesic-placement"] = (place, {})
    if f.analytic is not None and hasattr(f.analytic, "model_ball_volume"):
        try:
            R = 0.5 * f.analytic.truncation_radius
            res = integration_lemma_check(f.analytic, R)
            rep = VerificationReport(pipeline="integration-lemma", items_tested=1, tolerance=res.tol)
            rep.worst_margin = res.rhs + res.tol - res.lhs
            if not res.passed:
                rep.violations.append({"lhs": res.lhs, "rhs": res.rhs})
            reports["integration-lemma"] = (rep.finalize(), {"lhs": res.lhs, "rhs": res.rhs, "R": R})
        except ValueError as exc:
            log.info("integration lemma skipped: %s", exc)
    summary = {
        "pipeline": "verify-all",
        "config_echo": _jsonable(_echo(args)),
        "seed": args.seed,
        "verdicts": {k: r.verdict for k, (r, _) in sorted(reports.items())},
    }
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, (rep, extra) in reports.items():
            emit(report_document(rep, args, extra), str(out / f"{name}.json"))
        emit(summary, str(out / "verify-all.json"))
    else:
        emit(summary, None)
    return _status(*(r for r, _ in reports.values()))


COMMANDS = {
    "generate": run_generate,
    "inspect": run_inspect,
    "check-curvature": run_check_curvature,
    "check-bg": run_check_bg,
    "check-excess": run_check_excess,
    "scan-critical": run_scan_critical,
    "thresholds": run_thresholds,
    "verify-all": run_verify_all,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except ConfigError as exc:
        sys.stderr.write(f"alexlab: error: {exc}\n")
        return EXIT_ERROR
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SpaceFormatError, DomainError, OSError, ValueError) as exc:
        sys.stderr.write(f"alexlab: error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
