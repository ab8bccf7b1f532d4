"""Command-line entry point: ``otfkm verify|sample|spectrum|sigma|report-audit``."""
from __future__ import annotations

import argparse
import json
import logging
import sys as _sys
from pathlib import Path

from .curvature import sigma_optimize
from .errors import ConfigError, OtfkmError
from .manifolds import Kind, ManifoldId, sample, write_points_csv
from .report import SUITES, RunConfig, audit, override_samples, run, slug
from .spectral import GraphSpec, estimate_spectrum, write_eigenvalues_csv


def parse_manifold(text: str) -> ManifoldId:
    """Parse ``S``, ``M:i``, ``N:i``, ``U:i:c``, ``V:i:c``, ``focalU:i:sign``, ``focalV:i:sign``, ``Mt:t``."""
    parts = text.split(":")
    try:
        kind = Kind(parts[0])
        if kind is Kind.SPHERE and len(parts) == 1:
            return ManifoldId.sphere()
        if kind in (Kind.M, Kind.N) and len(parts) == 2:
            return ManifoldId(kind, int(parts[1]))
        if kind is Kind.HYPERSURFACE and len(parts) == 2:
            return ManifoldId.hypersurface(float(parts[1]))
        if kind in (Kind.LEVEL_U, Kind.LEVEL_V) and len(parts) == 3:
            return ManifoldId(kind, int(parts[1]), float(parts[2]))
        if kind in (Kind.FOCAL_U, Kind.FOCAL_V) and len(parts) == 3:
            return ManifoldId(kind, int(parts[1]), float(int(parts[2])))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"cannot parse manifold {text!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--variant", choices=["standard", "q-same", "q-opposite"])
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, help="override every per-claim sample count")
    p.add_argument("--suite", action="append", choices=SUITES, help="repeatable; default is all suites")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otfkm", description="Numerical verification workbench for "
                                     "quartic isoparametric foliations built from symmetric Clifford systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run verification suites and write report.json")
    _common(p)

    p = sub.add_parser("sample", help="sample points of a manifold to CSV")
    _common(p)
    p.add_argument("--manifold", type=parse_manifold, required=True, help="e.g. M:1, U:0:0.5, Mt:0.3")
    p.add_argument("-n", type=int, default=100)

    p = sub.add_parser("spectrum", help="graph-Laplacian eigenvalue estimate (ESTIMATE)")
    _common(p)
    p.add_argument("--manifold", type=parse_manifold, required=True)
    p.add_argument("--points", type=int, default=GraphSpec().n_points)
    p.add_argument("-r", type=int, default=5, help="number of nonzero eigenvalues")

    p = sub.add_parser("sigma", help="certify max |B(X,X)|^2 on a focal submanifold")
    _common(p)
    p.add_argument("--which", choices=["+", "-"], default="+")
    p.add_argument("--restarts", type=int, default=64)

    sub.add_parser("report-audit", help="list claim anchors without a claim id")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for key in ("m", "k", "variant", "seed", "out", "threads"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, value)
    if args.samples is not None:
        cfg.samples = override_samples(cfg.samples, args.samples)
    if args.suite:
        cfg.suites = tuple(s for s in SUITES if s in args.suite)
    return cfg


def _verify(cfg: RunConfig) -> int:
    report = run(cfg)
    for c in report.claims:
        print(f"{c.status:15s} {c.id}")
    summary = report.to_dict()["summary"]
    print(", ".join(f"{k}: {v}" for k, v in summary.items() if v))
    if cfg.out:
        print(f"report written to {Path(cfg.out) / 'report.json'}")
    return report.exit_code


def _sample(cfg: RunConfig, args: argparse.Namespace) -> int:
    sys = cfg.validate()
    args.manifold.validate(sys)
    pts = sample(sys, args.manifold, args.n, cfg.seed)
    path = Path(cfg.out or ".") / "points" / f"{slug(args.manifold.label())}.csv"
    write_points_csv(path, pts)
    print(path)
    return 0


def _spectrum(cfg: RunConfig, args: argparse.Namespace) -> int:
    sys = cfg.validate()
    est = estimate_spectrum(sys, args.manifold, GraphSpec(n_points=args.points), r=args.r, seed=cfg.seed)
    if cfg.out:
        write_eigenvalues_csv(Path(cfg.out) / "eigenvalues" / f"{slug(args.manifold.label())}.csv", [est])
    print(json.dumps({"label": "ESTIMATE", **est.to_dict()}, indent=2))
    return 0


def _sigma(cfg: RunConfig, args: argparse.Namespace) -> int:
    sys = cfg.validate()
    cert = sigma_optimize(sys, args.which, cfg.samples["sigma_points"], args.restarts, cfg.seed)
    text = cert.to_json()
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out) / f"sigma_{'plus' if args.which == '+' else 'minus'}.json").write_text(text)
    print(text)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report-audit":
        result = audit()
        print(json.dumps(result, indent=2))
        return 1 if result["unclaimed"] or result["duplicated"] or result["unknown_anchors"] else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "verify":
            return _verify(cfg)
        if args.command == "sample":
            return _sample(cfg, args)
        if args.command == "spectrum":
            return _spectrum(cfg, args)
        return _sigma(cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=_sys.stderr)
        return 2
    except OtfkmError as e:
        print(f"{type(e).__name__}: {e}", file=_sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
