"""Command line driver for the experiment suite.

Parameters resolve in three layers: built-in defaults, then a config
file given with --config (flat key = value lines), then explicit
command line flags.  Every experiment writes its outputs and a manifest
into the --out directory.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 completed
run with an invariant violation (details in the manifest).
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import (DegenerateDomain, DomainError, InvalidSpec,
                     MeshTooLarge, NonConvergence, PointLocationFailure,
                     QuadratureError, SingularSystem, UsageError)
from .experiments import ExperimentConfig, load_config, run

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4

_USAGE_ERRORS = (UsageError, InvalidSpec, MeshTooLarge, DegenerateDomain,
                 DomainError)
_NUMERICAL_ERRORS = (NonConvergence, SingularSystem, PointLocationFailure,
                     QuadratureError)

# argparse dest -> config key for every pass-through flag
_FLAG_KEYS = ("domain", "theta_deg", "h1", "rho1", "variant", "c", "nx",
              "ny", "problem", "tol", "max_iter", "seed", "dump_matrices",
              "r_max")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (mesh: output file)")
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--threads", type=int, help="sweep worker count")
    common.add_argument("--seed", help="solver start-vector seed")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--tol", help="relative eigenvalue change threshold")
    solver.add_argument("--max-iter", dest="max_iter",
                        help="inverse iteration cap")
    solver.add_argument("--problem", choices=("clamped", "buckling"),
                        help="right-hand side of the pencil")
    solver.add_argument("--dump-matrices", dest="dump_matrices",
                        metavar="DIR", help="write assembled matrices as "
                        "'i j value' text under DIR")

    parser = argparse.ArgumentParser(
        prog="biharmeig",
        description="Plate eigenvalue studies with corner-graded meshes.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("exponent", parents=[common],
                       help="corner exponent table over angles")
    p.add_argument("--theta-deg", dest="theta_deg",
                   help="comma list of degrees, or start:stop:step")

    p = sub.add_parser("mesh", parents=[common],
                       help="generate one mesh file")
    p.add_argument("--domain", choices=("square", "sector", "dumbbell"))
    p.add_argument("--theta-deg", dest="theta_deg")
    p.add_argument("--h1")
    p.add_argument("--rho1")
    p.add_argument("--variant", choices=("inner", "outer"))
    p.add_argument("--c")
    p.add_argument("--nx")
    p.add_argument("--ny")

    p = sub.add_parser("square", parents=[common, solver],
                       help="unit square eigenvalue + bisector trace")
    p.add_argument("--h1")
    p.add_argument("--rho1")
    p.add_argument("--r-max", dest="r_max")

    p = sub.add_parser("sector", parents=[common, solver],
                       help="sector sweep with inner/outer bracketing")
    p.add_argument("--theta-deg", dest="theta_deg",
                   help="comma list of degrees")
    p.add_argument("--h1", help="one value or one per theta")
    p.add_argument("--rho1", help="one value or one per theta")
    p.add_argument("--r-max", dest="r_max")

    p = sub.add_parser("dumbbell", parents=[common, solver],
                       help="neck sweep with parity splitting")
    p.add_argument("--c", help="comma list of neck values")
    p.add_argument("--nx", help="comma list, one per refinement level")
    p.add_argument("--ny", help="comma list, one per refinement level")

    p = sub.add_parser("converge", parents=[common, solver],
                       help="square eigenvalue over mesh levels")
    p.add_argument("--h1", help="comma list of levels, coarse to fine")
    p.add_argument("--rho1")

    return parser


def resolve(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict[str, str] = {}
    if args.config:
        raw.update(load_config(args.config))
    file_experiment = raw.pop("experiment", None)
    if file_experiment is not None and file_experiment != args.cmd:
        raise UsageError(f"config file targets {file_experiment!r} but the "
                         f"command is {args.cmd!r}")
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = str(value)

    out = args.out or raw.pop("out", None)
    if out is None:
        if args.cmd == "mesh":
            raise UsageError("mesh needs --out <path> for the mesh file")
        out = os.path.join("runs", args.cmd)

    threads = args.threads
    if threads is None:
        text = raw.pop("threads", None)
        try:
            threads = int(text) if text is not None else 1
        except ValueError as exc:
            raise UsageError(f"config key threads: {exc}") from exc
    if threads < 1:
        raise UsageError("--threads must be at least 1")

    return ExperimentConfig(args.cmd, out, threads, raw)


def _error_record(config: ExperimentConfig | None, exc: Exception) -> None:
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    if config is None or config.experiment == "mesh":
        return
    try:
        os.makedirs(config.out, exist_ok=True)
        with open(os.path.join(config.out, "error.txt"), "w") as fh:
            fh.write(f"error = {type(exc).__name__}\n")
            fh.write(f"message = {exc}\n")
    except OSError:
        pass


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    config = None
    try:
        config = resolve(args)
        ok = run(config)
    except _USAGE_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        _error_record(config, exc)
        return EXIT_NUMERICAL
    return EXIT_OK if ok else EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
