"""Acceptance gate.

One test per release criterion, each printing a single pass/fail line
under pytest -v.  The experiment fixtures execute the committed config
files through the real CLI entry point into temporary directories, the
same code path a user run takes, and the criteria read the emitted CSV
tables and manifests.  Reference numbers are frozen at the precision
they are published at.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import i0, i1, j0, j1

from conftest import dense_blocks, dense_pencil_eigs, tiny_sector_space
from test_corner import REFERENCE_EXPONENTS

from biharmeig import cli
from biharmeig.assembly import assemble_system
from biharmeig.corner import critical_angle, exponent_table, solve_exponent
from biharmeig.eigensolver import (
    EigenPair,
    SolverConfig,
    factorize,
    laplace_smallest,
    second_eigenpair,
    smallest_eigenpair,
)
from biharmeig.errors import InvalidSpec
from biharmeig.meshgen import (
    DumbbellSpec,
    SectorSpec,
    disk_mesh,
    dumbbell_mesh,
    sector_mesh,
    square_mesh,
)
from biharmeig.postprocess import (
    interior_mirror,
    oscillation_report,
    parity,
    parity_projector,
)
from biharmeig.quadrature import triangle_rule
from biharmeig.space import build_space

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def run_config(experiment: str, config: str, out: Path) -> float:
    """Run one committed config through the CLI; returns wall seconds."""
    t0 = time.perf_counter()
    rc = cli.main([experiment, "--config", str(CONFIGS / config),
                   "--out", str(out)])
    elapsed = time.perf_counter() - t0
    assert rc == 0, f"{config} exited with {rc}"
    return elapsed


def read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = path.read_text().strip().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def column(table, name: str) -> list[float]:
    header, rows = table
    i = header.index(name)
    return [float(row[i]) for row in rows]


def read_manifest(out: Path) -> dict[str, str]:
    entries = {}
    for line in (out / "manifest.txt").read_text().splitlines():
        if " = " in line:
            key, _, value = line.partition(" = ")
            entries[key] = value
    return entries


@pytest.fixture(scope="module")
def square_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("square")
    return out, run_config("square", "square.cfg", out)


@pytest.fixture(scope="module")
def sweep_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    run_config("sector", "sector-sweep.cfg", out)
    return out


@pytest.fixture(scope="module")
def bracket_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("bracket")
    run_config("sector", "sector-bracket.cfg", out)
    return out


@pytest.fixture(scope="module")
def dumbbell_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("dumbbell")
    run_config("dumbbell", "dumbbell.cfg", out)
    return out


# ------------------------------------------------------------ criteria

def test_criterion_01_exponent_table():
    degs = sorted(REFERENCE_EXPONENTS)
    t0 = time.perf_counter()
    table = exponent_table([math.radians(d) for d in degs])
    elapsed = time.perf_counter() - t0
    for deg, ent in zip(degs, table):
        alpha, beta, zero_ratio, _ = REFERENCE_EXPONENTS[deg]
        assert ent.alpha == pytest.approx(alpha, abs=1e-5)
        assert ent.beta == pytest.approx(beta, abs=1e-5)
        # zero ratio exp(pi/beta) to five significant digits
        assert ent.zero_ratio == pytest.approx(zero_ratio, rel=5e-6)
    assert elapsed < 1.0


def test_criterion_02_critical_angle():
    assert abs(critical_angle() - 0.8128 * math.pi) <= 1e-3 * math.pi


def test_criterion_03_unit_square(square_run):
    out, elapsed = square_run
    assert elapsed < 600.0
    header, rows = read_table(out / "eigen.csv")
    row = dict(zip(header, rows[0]))
    assert float(row["ndof"]) <= 150_000
    assert float(row["lambda"]) == pytest.approx(1294.934, abs=0.01)

    zeros = read_table(out / "zeros.csv")
    assert len(zeros[1]) >= 3
    assert column(zeros, "s_n")[0] == pytest.approx(0.0423110, abs=2e-5)
    assert column(zeros, "r_n")[0] == pytest.approx(0.0326295, abs=2e-5)

    ratios = read_table(out / "ratios.csv")
    assert column(ratios, "s_ratio")[0] == pytest.approx(16.5674, abs=0.01)
    assert column(ratios, "r_ratio")[0] == pytest.approx(16.5674, abs=0.02)
    assert read_manifest(out)["status"] == "ok"


def test_criterion_04_sector_pair(sweep_run):
    eigen = read_table(sweep_run / "eigen.csv")
    at60 = {t: i for i, t in enumerate(column(eigen, "theta_deg"))}[60.0]
    lam_in = column(eigen, "lambda_inner")[at60]
    lam_out = column(eigen, "lambda_outer")[at60]
    assert 5716.2 <= lam_out <= lam_in <= 5728.5
    assert column(eigen, "block_inner")[at60] <= 90_000
    assert column(eigen, "block_outer")[at60] <= 90_000

    r60 = read_table(sweep_run / "ratios_theta60.csv")
    assert column(r60, "s_ratio_inner")[0] == pytest.approx(4.9997, abs=0.01)
    assert column(r60, "s_ratio_outer")[0] == pytest.approx(4.9997, abs=0.01)

    z120 = read_table(sweep_run / "zeros_theta120.csv")
    assert column(z120, "s_inner")[0] == pytest.approx(0.003271, abs=1e-5)
    assert column(z120, "s_outer")[0] == pytest.approx(0.003271, abs=1e-5)
    r120 = read_table(sweep_run / "ratios_theta120.csv")
    assert column(r120, "s_ratio_inner")[0] == pytest.approx(180.6, abs=1.0)
    assert column(r120, "s_ratio_outer")[0] == pytest.approx(180.6, abs=1.0)


def test_criterion_05_no_zero_past_bound(sweep_run):
    header, rows = read_table(sweep_run / "zeros_theta147.csv")
    assert header[0] == "n"
    assert rows == []


def test_criterion_06_minmax_bracketing(sweep_run, bracket_run):
    sweep = read_table(sweep_run / "eigen.csv")
    assert all(a >= b for a, b in zip(column(sweep, "lambda_inner"),
                                      column(sweep, "lambda_outer")))
    assert read_manifest(sweep_run)["status"] == "ok"

    study = read_table(bracket_run / "eigen.csv")
    assert all(a >= b for a, b in zip(column(study, "lambda_inner"),
                                      column(study, "lambda_outer")))
    widths = column(study, "width")
    assert len(widths) == 4
    assert all(b < a for a, b in zip(widths, widths[1:]))
    manifest = read_manifest(bracket_run)
    assert manifest["invariant.theta60.width_shrinks"] == "pass"
    assert manifest["invariant.theta60.brackets_nest"] == "pass"
    assert manifest["status"] == "ok"


def test_criterion_07_dumbbell_sweep(dumbbell_run):
    parity_table = read_table(dumbbell_run / "parity.csv")
    cs = column(parity_table, "c")
    ratio = dict(zip(cs, column(parity_table, "ratio")))
    assert ratio[1.0] == pytest.approx(0.304, abs=0.003)
    assert max(column(parity_table, "N")) <= 150_000

    manifest = read_manifest(dumbbell_run)
    assert "0.325:0.3" in manifest["crossings"]
    assert "0.15:0.125" in manifest["crossings"]
    assert manifest["status"] == "ok"

    # classification of each parity class at the coarsest sweep level:
    # the classifier must label the computed eigenfunctions without
    # ambiguity for every neck value down to 0.1
    config = SolverConfig(tol=1e-12, max_iter=500)
    for c in [v for v in cs if v >= 0.1 - 1e-9]:
        space = build_space(dumbbell_mesh(DumbbellSpec(c, 56, 28)))
        system = assemble_system(space)
        fact = factorize(system)
        kinds = {}
        for kind in ("even", "odd"):
            pair = smallest_eigenpair(system, config=config,
                                      factorization=fact,
                                      project=parity_projector(space, kind))
            label = parity(pair, space)
            assert label.kind == kind, f"c={c}: {kind} labelled {label.kind}"
            assert label.score < 0.01
            kinds[kind] = label.kind
        assert kinds["even"] != kinds["odd"]


def test_criterion_08_refinement_stability(dumbbell_run):
    disc = read_table(dumbbell_run / "discrepancy.csv")
    deltas = [column(disc, f"delta_pct_l{k}") for k in range(3)]
    for i, c in enumerate(column(disc, "c")):
        if c >= 0.2 - 1e-9:
            trail = [d[i] for d in deltas]
            assert trail[0] > trail[1] > trail[2], f"c={c}: {trail}"


def test_criterion_09_dense_oracle_equivalence():
    system = assemble_system(tiny_sector_space(rho1=0.3))
    assert system.n_interior <= 50
    s, mass_in, _ = dense_blocks(system)
    w, _ = dense_pencil_eigs(s, mass_in)
    first = smallest_eigenpair(system, "clamped")
    second = second_eigenpair(system, first, "clamped")
    assert first.value == pytest.approx(w[0], rel=1e-8)
    assert second.value == pytest.approx(w[1], rel=1e-8)


def test_criterion_10_analytic_sanity():
    system = assemble_system(build_space(square_mesh(0.34, 0.05)))
    assert laplace_smallest(system) == pytest.approx(
        2.0 * math.pi ** 2, rel=1e-3)

    # smallest clamped-disk eigenvalue is the fourth power of the first
    # root of J1(k) I0(k) + I1(k) J0(k)
    k = brentq(lambda t: j1(t) * i0(t) + i1(t) * j0(t), 3.0, 3.4, xtol=1e-13)
    assert k ** 4 == pytest.approx(104.363, abs=5e-4)
    disk = assemble_system(build_space(disk_mesh(16, 96)))
    pair = smallest_eigenpair(disk, "clamped")
    assert pair.value == pytest.approx(k ** 4, abs=0.5)


def test_criterion_11_property_suites():
    rng = np.random.default_rng(20260819)

    # quadrature exactness through degree 6 on random polynomials
    pts, w = triangle_rule()
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    xy = pts @ ref
    monomials = [(a, b) for a in range(7) for b in range(7 - a)]
    exact = np.array([math.factorial(a) * math.factorial(b)
                      / math.factorial(a + b + 2) for a, b in monomials])
    powers = np.array([xy[:, 0] ** a * xy[:, 1] ** b for a, b in monomials])
    quad_cases = 0
    for _ in range(120):
        coef = rng.normal(size=len(monomials))
        got = 0.5 * w @ (coef @ powers)
        want = coef @ exact
        assert got == pytest.approx(want, rel=1e-12, abs=1e-15)
        quad_cases += 1
    assert quad_cases >= 100

    # positive definiteness and stiffness kernel on randomized meshes
    def random_mesh():
        pick = rng.integers(3)
        if pick == 0:
            return sector_mesh(SectorSpec(
                math.radians(rng.uniform(25.0, 170.0)),
                rng.uniform(0.6, 0.95), rng.uniform(0.08, 0.45),
                ("inner", "outer")[rng.integers(2)]))
        if pick == 1:
            return square_mesh(rng.uniform(0.45, 0.7),
                               rng.uniform(0.08, 0.45))
        return dumbbell_mesh(DumbbellSpec(
            rng.uniform(0.2, 1.0), 2 * int(rng.integers(2, 5)),
            2 * int(rng.integers(1, 3))))

    spd_cases = kernel_cases = 0
    for _ in range(100):
        system = assemble_system(build_space(random_mesh()))
        for mat in (system.mass, system.mass_in, system.stiffness_in):
            np.linalg.cholesky(mat.toarray())
        spd_cases += 1

        stiff = system.stiffness.toarray()
        ones = np.ones(system.n)
        assert np.abs(stiff @ ones).max() < 1e-12 * np.abs(stiff).max()
        eigs = np.linalg.eigvalsh(stiff)
        assert abs(eigs[0]) < 1e-10 * eigs[-1]
        assert eigs[1] > 1e-8 * eigs[-1]
        kernel_cases += 1
    assert spd_cases >= 100 and kernel_cases >= 100

    # zero/extremum interlacing contract of the oscillation report
    exponent = solve_exponent(math.radians(60.0))
    interlace_cases = 0
    for _ in range(120):
        nz = int(rng.integers(2, 6))
        zeros = [rng.uniform(0.5, 1.0)]
        for _ in range(nz - 1):
            zeros.append(zeros[-1] * rng.uniform(0.3, 0.7))
        sign = 1.0 if rng.integers(2) else -1.0
        extrema = []
        for n in range(nz - 1):
            r = rng.uniform(zeros[n + 1] * 1.05, zeros[n] * 0.95)
            extrema.append((r, sign * (-1.0) ** n * rng.uniform(0.1, 1.0)))
        report = oscillation_report(list(zeros), extrema, exponent)
        assert len(report.s_ratios) == nz - 1

        if nz >= 3:
            pushed = list(extrema)
            pushed[1] = (zeros[1] * 1.05, pushed[1][1])
            with pytest.raises(InvalidSpec, match="interlace"):
                oscillation_report(list(zeros), pushed, exponent)
        if nz >= 4:
            copied = list(extrema)
            copied[1] = (copied[1][0], copied[0][1])
            with pytest.raises(InvalidSpec, match="alternate"):
                oscillation_report(list(zeros), copied, exponent)
        interlace_cases += 1
    assert interlace_cases >= 100

    # parity mirror contract on randomized dumbbells
    parity_cases = 0
    while parity_cases < 100:
        space = build_space(dumbbell_mesh(DumbbellSpec(
            rng.uniform(0.2, 1.0), 2 * int(rng.integers(2, 5)),
            2 * int(rng.integers(1, 3)))))
        sigma = interior_mirror(space)
        assert np.array_equal(sigma[sigma], np.arange(space.n_interior))
        for _ in range(4):
            u = rng.normal(size=space.n_interior)
            aux = np.zeros(space.ndof)
            even = 0.5 * (u + u[sigma])
            odd = 0.5 * (u - u[sigma])
            pe = parity(EigenPair(1.0, even, aux, 0.0, 1, "clamped"), space)
            po = parity(EigenPair(1.0, odd, aux, 0.0, 1, "clamped"), space)
            pg = parity(EigenPair(1.0, u, aux, 0.0, 1, "clamped"), space)
            assert pe.kind == "even" and pe.score < 1e-12
            assert po.kind == "odd" and po.score < 1e-12
            assert pg.kind == "indeterminate"
            parity_cases += 1
    assert parity_cases >= 100
