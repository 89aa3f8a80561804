"""End-to-end experiment drivers behind the command line.

Each run_* function takes a resolved ExperimentConfig, executes one
study (mesh, assemble, solve, analyze), writes CSV outputs plus a
manifest into the output directory, and returns the invariant summary.
A manifest is written only when the pipeline ran to completion, so its
absence marks a crashed run; invariant failures are recorded in the
manifest and reported through the exit status instead of an exception.

All float CSV cells use one fixed-width scientific format with 12
significant digits, and manifests carry no timestamps, so a rerun with
the same config produces byte-identical files.
"""

from __future__ import annotations

import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .assembly import assemble_system, dump_matrices
from .corner import critical_angle, exponent_table, solve_exponent
from .eigensolver import SolverConfig, factorize, smallest_eigenpair
from .errors import InvalidSpec, UsageError
from .meshgen import (DumbbellSpec, SectorSpec, dumbbell_mesh, save_mesh,
                      sector_mesh, square_mesh)
from .postprocess import (OscillationReport, evaluate_on_bisector,
                          find_extrema, find_zeros, oscillation_report,
                          parity_sweep)
from .space import build_space

EXPERIMENTS = ("exponent", "square", "sector", "dumbbell", "converge")


# ------------------------------------------------------------- config

def parse_config(text: str) -> dict[str, str]:
    """Flat 'key = value' lines; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    for ln, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"config line {ln}: expected key = value")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def format_config(values: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items())


def load_config(path: str) -> dict[str, str]:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc


@dataclass
class ExperimentConfig:
    """Resolved run parameters: flat string key/value map plus the
    routing fields the driver needs."""

    experiment: str
    out: str
    threads: int = 1
    raw: dict[str, str] = field(default_factory=dict)

    def _parse(self, key: str, conv, default):
        text = self.raw.get(key)
        if text is None:
            return default
        try:
            return conv(text)
        except ValueError as exc:
            raise UsageError(f"config key {key}: {exc}") from exc

    def str_(self, key: str, default: str | None = None) -> str | None:
        return self._parse(key, str, default)

    def float_(self, key: str, default: float | None = None) -> float | None:
        return self._parse(key, float, default)

    def int_(self, key: str, default: int | None = None) -> int | None:
        return self._parse(key, int, default)

    def floats(self, key: str, default=None) -> list[float] | None:
        def conv(text: str) -> list[float]:
            return [float(p) for p in text.split(",") if p.strip()]
        return self._parse(key, conv, default)

    def ints(self, key: str, default=None) -> list[int] | None:
        def conv(text: str) -> list[int]:
            return [int(p) for p in text.split(",") if p.strip()]
        return self._parse(key, conv, default)

    def solver(self) -> SolverConfig:
        return SolverConfig(problem=self.str_("problem", "clamped"),
                            tol=self.float_("tol", 1e-12),
                            max_iter=self.int_("max_iter", 500),
                            seed=self.int_("seed", 0))


# ------------------------------------------------------ output helpers

def _fmt(x: float) -> str:
    return "% .11e" % float(x)


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return _fmt(x)


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(x) for x in row) + "\n")


def write_manifest(out: str, config: ExperimentConfig,
                   invariants: dict[str, bool],
                   extra: dict[str, str] | None = None) -> bool:
    """Config echo, versions, and the invariant summary.  Returns True
    when every invariant held."""
    ok = all(invariants.values())
    lines = [
        f"experiment = {config.experiment}",
        f"status = {'ok' if ok else 'invariant_violation'}",
        f"package = biharmeig {__version__}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"scipy = {scipy.__version__}",
        f"threads = {config.threads}",
    ]
    lines += [f"config.{k} = {v}" for k, v in sorted(config.raw.items())]
    if extra:
        lines += [f"{k} = {v}" for k, v in extra.items()]
    lines += [f"invariant.{k} = {'pass' if v else 'fail'}"
              for k, v in sorted(invariants.items())]
    with open(os.path.join(out, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return ok


def _pair_invariants(system, pair, prefix: str,
                     invariants: dict[str, bool]) -> None:
    """Shared converged-pair checks recorded in every manifest."""
    hist = np.array(pair.history)
    wobble = 1e-12 * np.abs(hist[1:])
    invariants[f"{prefix}.monotone_rayleigh"] = bool(
        (np.diff(hist) <= wobble).all())
    invariants[f"{prefix}.positive"] = pair.value > 0.0
    bu = system.rhs_matrix(pair.problem) @ pair.u
    invariants[f"{prefix}.normalized"] = abs(pair.u @ bu - 1.0) < 1e-10
    num = np.linalg.norm(system.mass @ pair.v + system.coupling.T @ pair.u)
    den = np.linalg.norm(system.coupling.T @ pair.u)
    invariants[f"{prefix}.block_row"] = num <= 1e-10 * den


# ------------------------------------------------------------ exponent

def _theta_list(config: ExperimentConfig) -> list[float]:
    """theta_deg accepts a comma list or a start:stop:step range."""
    text = config.str_("theta_deg")
    if text is None:
        raise UsageError("exponent run needs theta_deg")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError("theta_deg range must be start:stop:step")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError as exc:
            raise UsageError(f"theta_deg range: {exc}") from exc
        if step <= 0:
            raise UsageError("theta_deg range step must be positive")
        n = int(math.floor((stop - start) / step + 0.5)) + 1
        return [start + k * step for k in range(n)]
    return config.floats("theta_deg")


def run_exponent(config: ExperimentConfig) -> bool:
    thetas = _theta_list(config)
    exps = exponent_table([math.radians(t) for t in thetas])
    rows = []
    invariants: dict[str, bool] = {}
    for t_deg, e in zip(thetas, exps):
        invariants[f"theta{_slug(t_deg)}.residual"] = e.residual < 1e-10
        rows.append((t_deg, e.alpha, e.beta,
                     e.zero_ratio if e.oscillatory else float("nan"),
                     e.extremum_value_ratio if e.oscillatory else float("nan")))
    write_csv(os.path.join(config.out, "exponents.csv"),
              ["theta_deg", "alpha", "beta", "zero_ratio",
               "extremum_value_ratio"], rows)
    crit = critical_angle(1e-4 * math.pi)
    return write_manifest(config.out, config, invariants,
                          {"critical_angle_over_pi": _fmt(crit / math.pi)})


# -------------------------------------------------------------- square

def _analyze_trace(pair, space, exponent, r_max, invariants, prefix):
    """Bisector zeros/extrema plus the interlacing checks; returns the
    report even when a check fails so the CSVs still get written."""
    profile = evaluate_on_bisector(pair, space, r_max=r_max,
                                   exponent=exponent)
    zeros = find_zeros(profile, space, pair)
    extrema = find_extrema(profile, space, pair, zeros)
    try:
        report = oscillation_report(zeros, extrema, exponent)
        invariants[f"{prefix}.interlacing"] = True
    except InvalidSpec:
        report = OscillationReport(list(zeros), [r for r, _ in extrema],
                                   [t for _, t in extrema])
        invariants[f"{prefix}.interlacing"] = False
    return report


def _zero_rows(report) -> list[tuple]:
    rows = []
    for n in range(max(len(report.s), len(report.r))):
        rows.append((n + 1,
                     report.s[n] if n < len(report.s) else float("nan"),
                     report.r[n] if n < len(report.r) else float("nan"),
                     report.t[n] if n < len(report.t) else float("nan")))
    return rows


def _ratio_rows(report) -> list[tuple]:
    rows = []
    count = max(len(report.s_ratios), len(report.r_ratios),
                len(report.t_ratios))
    pz = report.predicted_zero_ratio
    pt = report.predicted_extremum_ratio
    for n in range(count):
        rows.append((n + 1,
                     report.s_ratios[n] if n < len(report.s_ratios) else float("nan"),
                     report.r_ratios[n] if n < len(report.r_ratios) else float("nan"),
                     report.t_ratios[n] if n < len(report.t_ratios) else float("nan"),
                     pz if pz is not None else float("nan"),
                     pt if pt is not None else float("nan")))
    return rows


def run_square(config: ExperimentConfig) -> bool:
    h1 = config.float_("h1", 0.1)
    rho1 = config.float_("rho1", 1e-7)
    r_max = config.float_("r_max", 0.9)
    solver = config.solver()

    mesh = square_mesh(h1, rho1)
    space = build_space(mesh)
    system = assemble_system(space)
    dump_dir = config.str_("dump_matrices")
    if dump_dir:
        dump_matrices(system, dump_dir)
    pair = smallest_eigenpair(system, config=solver)

    invariants: dict[str, bool] = {}
    _pair_invariants(system, pair, "pair1", invariants)
    exponent = solve_exponent(math.pi / 2.0)
    report = _analyze_trace(pair, space, exponent, r_max, invariants, "trace")

    write_csv(os.path.join(config.out, "eigen.csv"),
              ["problem", "lambda", "iterations", "residual", "ndof",
               "block_dim"],
              [(pair.problem, pair.value, pair.iterations, pair.residual,
                space.ndof, system.block_dim)])
    write_csv(os.path.join(config.out, "zeros.csv"),
              ["n", "s_n", "r_n", "t_n"], _zero_rows(report))
    write_csv(os.path.join(config.out, "ratios.csv"),
              ["n", "s_ratio", "r_ratio", "t_ratio", "predicted_zero_ratio",
               "predicted_extremum_ratio"], _ratio_rows(report))
    return write_manifest(config.out, config, invariants)


# -------------------------------------------------------------- sector

def _slug(theta_deg: float) -> str:
    return f"{theta_deg:g}".replace(".", "p")


def _sector_row(task) -> tuple:
    (slug, theta_deg, h1, rho1, r_max, solver, out, dump_dir) = task
    theta = math.radians(theta_deg)
    invariants: dict[str, bool] = {}
    values = {}
    reports = {}
    exponent = solve_exponent(theta)
    for variant in ("inner", "outer"):
        mesh = sector_mesh(SectorSpec(theta, h1, rho1, variant))
        space = build_space(mesh)
        system = assemble_system(space)
        if dump_dir:
            dump_matrices(system, os.path.join(
                dump_dir, f"theta{slug}_{variant}"))
        pair = smallest_eigenpair(system, config=solver)
        _pair_invariants(system, pair, variant, invariants)
        values[variant] = (pair.value, system.block_dim)
        reports[variant] = _analyze_trace(pair, space, exponent, r_max,
                                          invariants, variant)
    lam_in, dim_in = values["inner"]
    lam_out, dim_out = values["outer"]
    invariants["bracket_order"] = lam_in >= lam_out

    rep_in, rep_out = reports["inner"], reports["outer"]

    def at(seq):
        return lambda n: seq[n] if n < len(seq) else float("nan")

    nz = max(len(rep_in.s), len(rep_out.s), len(rep_in.r), len(rep_out.r))
    zero_rows = []
    for n in range(nz):
        zero_rows.append((n + 1,
                          at(rep_in.s)(n), at(rep_out.s)(n),
                          at(rep_in.r)(n), at(rep_out.r)(n),
                          at(rep_in.t)(n), at(rep_out.t)(n)))
    write_csv(os.path.join(out, f"zeros_theta{slug}.csv"),
              ["n", "s_inner", "s_outer", "r_inner", "r_outer",
               "t_inner", "t_outer"], zero_rows)

    nr = max(len(rep_in.s_ratios), len(rep_out.s_ratios))
    pz = rep_in.predicted_zero_ratio
    ratio_rows = []
    for n in range(nr):
        ratio_rows.append((n + 1,
                           at(rep_in.s_ratios)(n), at(rep_out.s_ratios)(n),
                           at(rep_in.t_ratios)(n), at(rep_out.t_ratios)(n),
                           pz if pz is not None else float("nan")))
    write_csv(os.path.join(out, f"ratios_theta{slug}.csv"),
              ["n", "s_ratio_inner", "s_ratio_outer", "t_ratio_inner",
               "t_ratio_outer", "predicted_zero_ratio"], ratio_rows)

    eigen_row = (theta_deg, lam_in, lam_out, lam_in - lam_out,
                 dim_in, dim_out)
    return eigen_row, invariants


def run_sector(config: ExperimentConfig) -> bool:
    thetas = config.floats("theta_deg")
    if not thetas:
        raise UsageError("sector run needs theta_deg")
    h1s = config.floats("h1")
    rho1s = config.floats("rho1")
    if not h1s or not rho1s:
        raise UsageError("sector run needs h1 and rho1")
    if len(h1s) == 1:
        h1s = h1s * len(thetas)
    if len(rho1s) == 1:
        rho1s = rho1s * len(thetas)
    if len(h1s) != len(thetas) or len(rho1s) != len(thetas):
        raise UsageError("h1 and rho1 must have one value or one per theta")
    r_max = config.float_("r_max", 0.9)
    solver = config.solver()
    dump_dir = config.str_("dump_matrices")

    # repeated angles (bracket studies over mesh levels) get unique slugs
    slugs: list[str] = []
    seen: dict[str, int] = {}
    for t in thetas:
        s = _slug(t)
        seen[s] = seen.get(s, 0) + 1
        slugs.append(s if seen[s] == 1 else f"{s}_{seen[s]}")

    tasks = [(s, t, h, r, r_max, solver, config.out, dump_dir)
             for s, t, h, r in zip(slugs, thetas, h1s, rho1s)]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_sector_row, tasks))
    else:
        results = [_sector_row(t) for t in tasks]

    invariants: dict[str, bool] = {}
    eigen_rows = []
    for slug, (row, row_inv) in zip(slugs, results):
        eigen_rows.append(row)
        for key, val in row_inv.items():
            invariants[f"theta{slug}.{key}"] = val

    # a repeated angle is a refinement study: rows arrive coarse to fine,
    # so widths must shrink and each bracket must nest inside the last
    groups: dict[float, list[tuple]] = {}
    for t, row in zip(thetas, eigen_rows):
        groups.setdefault(t, []).append(row)
    for t, rows in groups.items():
        if len(rows) < 2:
            continue
        widths = [row[3] for row in rows]
        nested = all(b[1] <= a[1] and b[2] >= a[2]
                     for a, b in zip(rows, rows[1:]))
        invariants[f"theta{_slug(t)}.width_shrinks"] = all(
            b < a for a, b in zip(widths, widths[1:]))
        invariants[f"theta{_slug(t)}.brackets_nest"] = nested
    write_csv(os.path.join(config.out, "eigen.csv"),
              ["theta_deg", "lambda_inner", "lambda_outer", "width",
               "block_inner", "block_outer"], eigen_rows)
    return write_manifest(config.out, config, invariants)


# ------------------------------------------------------------ dumbbell

def run_dumbbell(config: ExperimentConfig) -> bool:
    cs = config.floats("c")
    if not cs:
        raise UsageError("dumbbell run needs c")
    nxs = config.ints("nx")
    nys = config.ints("ny")
    if not nxs or not nys or len(nxs) != len(nys):
        raise UsageError("dumbbell run needs matching nx and ny lists")
    solver = config.solver()

    levels = []
    for nx, ny in zip(nxs, nys):
        levels.append(parity_sweep(cs, nx, ny, solver,
                                   threads=config.threads))

    finest = levels[-1]
    write_csv(os.path.join(config.out, "parity.csv"),
              ["c", "lambda_even", "lambda_odd", "ratio", "N"],
              [(r.c, r.lam_even, r.lam_odd, r.ratio, r.block_dim)
               for r in finest])

    # relative ratio change between successive levels, in percent
    disc_rows = []
    ncols = len(levels) - 1
    for i, c in enumerate(cs):
        ratios_c = [lvl[i].ratio for lvl in levels]
        deltas = [abs(b - a) / b * 100.0
                  for a, b in zip(ratios_c, ratios_c[1:])]
        disc_rows.append((c, *ratios_c, *deltas))
    header = (["c"] + [f"ratio_l{k}" for k in range(len(levels))]
              + [f"delta_pct_l{k}" for k in range(ncols)])
    write_csv(os.path.join(config.out, "discrepancy.csv"), header, disc_rows)

    crossings = [f"{a.c:g}:{b.c:g}" for a, b in zip(finest, finest[1:])
                 if b.crossing]
    invariants: dict[str, bool] = {}
    for row in finest:
        invariants[f"c{row.c:g}.separated"] = row.lam_even != row.lam_odd
        invariants[f"c{row.c:g}.positive"] = (row.lam_even > 0.0
                                              and row.lam_odd > 0.0)
    extra = {"crossings": ", ".join(crossings) if crossings else "none",
             "levels": str(len(levels))}
    return write_manifest(config.out, config, invariants, extra)


# ------------------------------------------------------------ converge

def run_converge(config: ExperimentConfig) -> bool:
    h1s = config.floats("h1")
    if not h1s or len(h1s) < 2:
        raise UsageError("converge run needs at least two h1 levels")
    rho1 = config.float_("rho1", 1e-5)
    solver = config.solver()

    lams = []
    dims = []
    for h1 in h1s:
        mesh = square_mesh(h1, rho1)
        space = build_space(mesh)
        system = assemble_system(space)
        pair = smallest_eigenpair(system, config=solver)
        lams.append(pair.value)
        dims.append(system.block_dim)

    ref = lams[-1]
    errs = [abs(lam - ref) for lam in lams]
    rows = []
    for i, (h1, lam) in enumerate(zip(h1s, lams)):
        if i + 1 < len(h1s) - 1 and errs[i + 1] > 0.0:
            factor = errs[i] / errs[i + 1]
        else:
            factor = float("nan")
        rows.append((h1, lam, dims[i], errs[i], factor))
    write_csv(os.path.join(config.out, "order.csv"),
              ["h1", "lambda", "block_dim", "err_vs_finest", "factor"],
              rows)
    factors = [r[4] for r in rows if not math.isnan(r[4])]
    invariants = {"errors_shrink": all(f > 1.0 for f in factors)
                  if factors else True}
    return write_manifest(config.out, config, invariants)


# ----------------------------------------------------------- mesh dump

def run_mesh(config: ExperimentConfig) -> bool:
    """Generate one mesh and write it in the text format; the out field
    names the mesh file itself."""
    domain = config.str_("domain")
    if domain == "square":
        mesh = square_mesh(config.float_("h1", 0.1),
                           config.float_("rho1", 1e-3))
    elif domain == "sector":
        theta_deg = config.float_("theta_deg")
        if theta_deg is None:
            raise UsageError("sector mesh needs theta_deg")
        mesh = sector_mesh(SectorSpec(math.radians(theta_deg),
                                      config.float_("h1", 0.1),
                                      config.float_("rho1", 1e-3),
                                      config.str_("variant", "inner")))
    elif domain == "dumbbell":
        c = config.float_("c")
        if c is None:
            raise UsageError("dumbbell mesh needs c")
        mesh = dumbbell_mesh(DumbbellSpec(c, config.int_("nx", 16),
                                          config.int_("ny", 8)))
    else:
        raise UsageError(f"unknown domain {domain!r}")
    save_mesh(mesh, config.out)
    lines = [f"domain = {domain}",
             f"vertices = {mesh.num_vertices}",
             f"triangles = {mesh.num_triangles}",
             "status = ok"]
    lines += [f"config.{k} = {v}" for k, v in sorted(config.raw.items())]
    with open(config.out + ".manifest", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return True


RUNNERS = {
    "exponent": run_exponent,
    "square": run_square,
    "sector": run_sector,
    "dumbbell": run_dumbbell,
    "converge": run_converge,
    "mesh": run_mesh,
}


def run(config: ExperimentConfig) -> bool:
    """Dispatch to the named experiment; True means every recorded
    invariant held."""
    runner = RUNNERS.get(config.experiment)
    if runner is None:
        raise UsageError(f"unknown experiment {config.experiment!r}")
    if config.experiment != "mesh":
        os.makedirs(config.out, exist_ok=True)
    return runner(config)
