"""Acceptance suite: ten end-to-end checks, each printing one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from diraclab.basis import BasisFunction, scalar_values
from diraclab.cli import main
from diraclab.critical import (
    GalerkinBackend,
    RadialBackend,
    default_backend,
    lower_bound_lambda,
    nu0_of,
    nu1_of,
    signed_gap,
    tix_constant,
)
from diraclab.galerkin import assemble, build_basis, grid_for, smallest_form_eigenvalue, solve_lambda1
from diraclab.measures import ChargeDistribution as C
from diraclab.measures import SignedChargeDistribution, scale_mass, translate
from diraclab.optimizer import Configuration, el_diagnostic, scan_two_delta
from diraclab.quadrature import GridSpec, becke_partition
from diraclab.radial import radial_lambda1, reduction_consistency_check
from diraclab.records import load_record
from diraclab.spinors import clifford_residuals, sigma_dot, sigma_grad_basis, spin_vector

from battery import BATTERY
from oracles import central_difference, coulomb_lambda1

EPS = np.finfo(float).eps


@pytest.fixture
def verdict(capsys):
    def emit(tag: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {tag}: {detail}")
        assert ok, detail
    return emit


def test_a01_coulomb_radial(verdict):
    worst, slowest = 0.0, 0.0
    for nu in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99):
        t = time.perf_counter()
        err = abs(radial_lambda1(C.point(nu)) - coulomb_lambda1(nu))
        slowest = max(slowest, time.perf_counter() - t)
        worst = max(worst, err)
    verdict("A1 pure-Coulomb radial", worst <= 1e-5 and slowest <= 10,
            f"max |lambda1 - sqrt(1-nu^2)| = {worst:.3e} (tol 1e-5), slowest {slowest:.2f} s")


def test_a02_coulomb_3d(verdict):
    parts, ok = [], True
    for nu in (0.5, 0.9):
        t = time.perf_counter()
        lam = solve_lambda1(C.point(nu)).lambda1
        dt = time.perf_counter() - t
        exact = coulomb_lambda1(nu)
        good = exact - 1e-8 <= lam <= exact + 5e-3 and dt <= 300
        ok &= good
        parts.append(f"nu={nu}: lambda1-exact={lam - exact:+.3e} in {dt:.1f} s")
    verdict("A2 pure-Coulomb 3D", ok, "; ".join(parts))


def test_a03_ball_family(verdict):
    vals = [radial_lambda1(C.ball(0.9, R)) for R in (1.0, 0.1, 1e-2, 1e-3)]
    target = coulomb_lambda1(0.9)
    decreasing = all(a > b for a, b in zip(vals, vals[1:])) and vals[-1] > target
    gap = vals[-1] - target
    verdict("A3 uniform-ball family", decreasing and gap <= 1e-4,
            f"lambda1 = {', '.join(f'{v:.7f}' for v in vals)}; strictly decreasing={decreasing}; "
            f"final gap {gap:.3e} (tol 1e-4)")


def test_a04_two_delta_scan(verdict):
    ds = [0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0]
    tab = scan_two_delta(0.9, 0.5, ds)
    lam = {r.d: r.lambda1 for r in tab.rows}
    floor = 0.43589 - 5e-3
    ok_floor = all(r.status == "ok" and r.lambda1 >= floor for r in tab.rows)
    ok_far = abs(lam[10.0] - 0.89303) <= 5e-3
    ok_near = abs(lam[0.01] - 0.43589) <= 1e-2
    verdict("A4 two-delta scan", ok_floor and ok_far and ok_near,
            f"floor {ok_floor}; lambda1(10) = {lam[10.0]:.5f} vs 0.89303 (tol 5e-3) {ok_far}; "
            f"lambda1(0.01) = {lam[0.01]:.5f} vs 0.43589 (tol 1e-2) {ok_near}; "
            f"monotonicity violations {tab.monotonicity_violations()}")


def test_a05_critical_constants(verdict):
    point = C.point(0.5)
    n0p, n1p = nu0_of(point), nu1_of(point)
    ok_point = abs(n0p - 1) <= 1e-3 and abs(n1p - 1) <= 1e-3
    lines, ok_floor, ok_order = [], True, True
    for name, mu in BATTERY.items():
        n0, n1 = nu0_of(mu, default_backend(mu)), nu1_of(mu)
        ok_floor &= n1 >= 0.9051
        ordered = n0 <= n1 + 5e-3
        ok_order &= ordered
        lines.append(f"{name}: nu0={n0:.4f} nu1={n1:.4f}{'' if ordered else ' (nu0>nu1)'}")
    verdict("A5 critical constants", ok_point and ok_floor and ok_order,
            f"point nu0={n0p:.6f} nu1={n1p:.6f} (tol 1e-3) {ok_point}; nu1 >= 0.9051 {ok_floor}; "
            f"nu0 <= nu1 {ok_order}; " + "; ".join(lines))


def _random_measure(rng, nu):
    K = int(rng.integers(1, 4))
    w = rng.dirichlet(np.ones(K)) * nu
    pos = rng.normal(scale=1.0, size=(K, 3))
    mu = C.from_atoms([tuple(p) for p in pos], list(w))
    if rng.random() < 0.3:
        frac = rng.uniform(0.1, 0.5)
        mu = scale_mass(mu, 1 - frac) + C.cloud(frac * nu, rng.uniform(0.2, 1.0), tuple(rng.normal(size=3)))
    return mu


def test_a06_bound_consistency(verdict):
    rng = np.random.default_rng(2024)
    worst, bad = math.inf, 0
    for _ in range(20):
        nu = float(rng.uniform(0.05, 0.9))
        mu = _random_measure(rng, nu)
        lam = solve_lambda1(mu).lambda1
        margin = lam - lower_bound_lambda(nu, 0.9061)
        worst = min(worst, margin)
        bad += margin < 0
    verdict("A6 bound consistency", bad == 0, f"20 configurations, min(lambda1 - bound) = {worst:.4f}")


def test_a07_signed_gap(verdict):
    gap = signed_gap(SignedChargeDistribution(C.point(0.4), C.point(0.4, (2, 0, 0))), nu0_lower=0.9061)
    lam = math.sqrt(1 - 0.16)
    contains = gap.certified[0] <= -0.4706 and gap.certified[1] >= 0.4706
    close = abs(gap.certified[0] + lam) <= 5e-3 and abs(gap.certified[1] - lam) <= 5e-3
    verdict("A7 signed-measure gap", contains and close,
            f"certified ({gap.certified[0]:.5f}, {gap.certified[1]:.5f}), analytic "
            f"({gap.analytic[0]:.4f}, {gap.analytic[1]:.4f}), sqrt(0.84) = {lam:.5f}")


def test_a08_algebra_and_reduction(verdict):
    cliff = max(clifford_residuals().values())
    ok_cliff = cliff <= 4 * EPS
    rel = []
    profiles = [(lambda r: np.exp(-r * r), lambda r: -2 * r * np.exp(-r * r), C.point(0.5), 0.0),
                (lambda r: np.exp(-r), lambda r: -np.exp(-r), C.point(0.7) + C.cloud(0.2, 0.5), 0.5)]
    for f, fp, mu, lam in profiles:
        a, b = reduction_consistency_check(f, fp, mu, lam)
        rel.append(abs(a - b) / abs(a))
    ok_red = max(rel) <= 1e-6
    rng = np.random.default_rng(8)
    fd = 0.0
    for _ in range(40):
        b = BasisFunction(tuple(rng.uniform(-0.5, 0.5, 3)), float(rng.uniform(0.2, 3)),
                          str(rng.choice(["s", "px", "py", "pz"])), int(rng.integers(1, 3)))
        x = rng.uniform(-1.5, 1.5, 3)
        g = central_difference(lambda y: float(scalar_values(y[None, :], [b])[0, 0]), x, h=1e-5)
        fd = max(fd, float(np.max(np.abs(sigma_grad_basis(b, x) - sigma_dot(g) @ spin_vector(b.spin)))))
    ok_fd = fd <= 1e-7
    verdict("A8 algebra and reduction", ok_cliff and ok_red and ok_fd,
            f"max anticommutator residual {cliff:.1e} (tol {4 * EPS:.1e}); reduction rel. errors "
            f"{rel[0]:.1e}, {rel[1]:.1e} (tol 1e-6); sigma.grad vs finite differences {fd:.1e} (tol 1e-7)")


def test_a09_property_suites(verdict):
    checks = {}
    mu = C.point(0.5)
    basis = build_basis(mu)
    forms = assemble(mu, basis, grid_for(mu, basis, GridSpec()))
    e = [smallest_form_eigenvalue(forms, lam) for lam in np.linspace(-0.99, 0.99, 20)]
    checks["e1 decreasing"] = bool(np.all(np.diff(e) < 0))
    lams = [solve_lambda1(C.cloud(nu, 0.5)).lambda1 for nu in (0.2, 0.5, 0.8)]
    checks["mass monotone"] = lams[0] > lams[1] > lams[2]
    mix = C.point(0.4) + C.cloud(0.2, 0.7)
    checks["translation"] = abs(solve_lambda1(mix).lambda1 - solve_lambda1(translate(mix, (0.3, -0.2, 0.5))).lambda1) <= 1e-8
    ball = C.ball(0.3, 1.0)
    checks["nu0 scale"] = abs(nu0_of(ball) - nu0_of(scale_mass(ball, 2.0))) <= 1e-6
    checks["nu1 scale"] = abs(nu1_of(ball) - nu1_of(scale_mass(ball, 2.0))) <= 1e-6
    rng = np.random.default_rng(3)
    P = becke_partition(rng.uniform(-4, 4, (500, 3)), rng.uniform(-2, 2, (4, 3)))
    checks["partition of unity"] = float(np.max(np.abs(P.sum(axis=1) - 1))) <= 1e-13
    best = Configuration.single(0.5)
    res = solve_lambda1(best.to_measure())
    checks["EL at K=1"] = el_diagnostic(best, res, res.forms.grid).passed
    verdict("A9 property suites", all(checks.values()), ", ".join(f"{k} {v}" for k, v in checks.items()))


def _numbers(run_dir):
    rec = load_record(run_dir)
    cfg = {k: v for k, v in rec.config.items() if k not in ("out", "threads")}
    return json.dumps({"config": cfg, "results": rec.results}, sort_keys=True)


def test_a10_reproducibility(verdict, tmp_path):
    def only(p):
        (d,) = list(Path(p).iterdir())
        return d

    scan = ["scan", "--nu", "0.9", "--distances", "0.1", "1", "5", "--seed", "11"]
    opt = ["optimize", "--nu", "0.7", "--k", "2", "--budget", "5", "--restarts", "2", "--seed", "11",
           "--basis-n", "10", "--grid-level", "1"]
    same = {}
    for name, argv in (("scan", scan), ("optimize", opt)):
        outs = []
        for threads in ("1", "3"):
            out = tmp_path / f"{name}{threads}"
            assert main(argv + ["--threads", threads, "--out", str(out)]) == 0
            outs.append(_numbers(only(out)))
        rerun = tmp_path / f"{name}-rerun"
        assert main([name, "--config", str(only(tmp_path / f"{name}1")), "--out", str(rerun)]) == 0
        outs.append(_numbers(only(rerun)))
        same[name] = outs[0] == outs[1] == outs[2]
    verdict("A10 reproducibility", all(same.values()),
            f"bitwise identical across thread counts 1 and 3 and a snapshot rerun: {same}")
