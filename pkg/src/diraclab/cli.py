"""Command-line entry point: ``diraclab <command> [options]``.

Commands: solve, radial, scan, optimize, critical, bounds, report.
Every run writes <out>/<timestamp>-<command>/{record.json, *.csv, log.txt}.
Exit status: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .basis import EvenTempered
from .critical import (RadialBackend, GalerkinBackend, critical_report, lower_bound_lambda, signed_gap,
                       tix_constant)
from .errors import ConfigError, DiracLabError, IntegrationError, MeasureError, SolverError
from .galerkin import SolverConfig, solve_lambda1
from .measures import ChargeDistribution, SignedChargeDistribution, load_measure, total_mass
from .optimizer import OptimizerConfig, el_diagnostic, minimize_lambda1, scan_two_delta
from .quadrature import GridSpec
from .radial import RadialProblem, solve_radial
from .records import RunRecord, csv_text, load_record, make_run_dir, write_atomic

log = logging.getLogger("diraclab")

COMMANDS = ("solve", "radial", "scan", "optimize", "critical", "bounds", "report")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_DISTANCES = (0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0)


@dataclass
class RunConfig:
    command: str
    measure: str | None = None
    measure_data: dict | None = None
    nu: float | None = None
    k: int = 2
    seed: int = 0
    threads: int = 1
    out: str = "runs"
    basis_n: int = 14
    basis_a0: float = 0.02
    basis_ratio: float = 2.8
    p_type: bool = False
    grid_level: int = 2
    tol: float = 1e-9
    split: float = 0.5
    distances: list[float] = field(default_factory=lambda: list(DEFAULT_DISTANCES))
    budget: int = 200
    restarts: int = 8
    el: bool = False
    with_nu0: bool = True
    negative_measure: str | None = None
    negative_data: dict | None = None
    records: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not self.tol > 0:
            raise ConfigError("--tol must be positive")
        if self.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if self.grid_level not in (1, 2, 3):
            raise ConfigError("--grid-level must be 1, 2 or 3")
        if self.basis_n < 1:
            raise ConfigError("--basis-n must be >= 1")
        for p in (self.measure, self.negative_measure):
            if p is not None and self.measure_data is None and not Path(p).is_file():
                raise ConfigError(f"measure file not found: {p}")
        if self.nu is not None and not (0 <= self.nu < 1):
            raise ConfigError("--nu must lie in [0, 1)")
        if self.command in ("scan", "optimize", "bounds") and self.nu is None:
            raise ConfigError(f"{self.command} needs --nu")
        if self.command in ("solve", "radial", "critical") and self.measure is None \
                and self.measure_data is None and self.nu is None:
            raise ConfigError(f"{self.command} needs --measure or --nu")
        if self.command == "bounds" and not self.nu < tix_constant():
            raise ConfigError(f"bounds needs --nu below {tix_constant():.6g}")
        if self.command == "report" and not self.records:
            raise ConfigError("report needs at least one record path")

    def solver_config(self) -> SolverConfig:
        basis = EvenTempered(a0=self.basis_a0, ratio=self.basis_ratio, count=self.basis_n, p_type=self.p_type)
        return SolverConfig(basis=basis, grid=GridSpec.level(self.grid_level), tol=self.tol)

    def load_measures(self) -> None:
        """Read measure files once so the snapshot carries the data itself."""
        if self.measure is not None and self.measure_data is None:
            self.measure_data = load_measure(self.measure).to_dict()
        if self.negative_measure is not None and self.negative_data is None:
            self.negative_data = load_measure(self.negative_measure).to_dict()

    def the_measure(self) -> ChargeDistribution:
        if self.measure_data is not None:
            return ChargeDistribution.from_dict(self.measure_data)
        return ChargeDistribution.point(self.nu) if self.nu else ChargeDistribution()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)


# -- commands -------------------------------------------------------------------

def _cmd_solve(cfg: RunConfig, run_dir: Path) -> dict:
    mu = cfg.the_measure()
    res = solve_lambda1(mu, cfg.solver_config())
    out = {"lambda1": res.lambda1, "residual": res.residual, "bound_state_found": res.bound_state_found,
           "history": [list(h) for h in res.history], "diagnostics": res.diagnostics_record(),
           "mass": total_mass(mu)}
    if cfg.el and res.bound_state_found and not mu.clouds and not mu.balls:
        from .optimizer import Configuration
        conf = Configuration(tuple(a.position for a in mu.atoms), tuple(a.weight for a in mu.atoms))
        out["el_diagnostic"] = el_diagnostic(conf, res, res.forms.grid).to_dict()
    return out


def _cmd_radial(cfg: RunConfig, run_dir: Path) -> dict:
    mu = cfg.the_measure()
    if total_mass(mu) <= 0:
        raise MeasureError("radial solve needs positive mass")
    res = solve_radial(RadialProblem.from_measure(mu), tol=min(cfg.tol, 1e-11))
    return {"lambda1": res.lambda1, "residual": res.residual, "bound_state_found": res.bound_state_found,
            "history": [list(h) for h in res.history], "basis_size": res.basis_size,
            "overlap_condition": res.overlap_condition, "mass": total_mass(mu)}


def _cmd_scan(cfg: RunConfig, run_dir: Path) -> dict:
    table = scan_two_delta(cfg.nu, cfg.split, cfg.distances, cfg.solver_config(), workers=cfg.threads)
    write_atomic(run_dir / "scan.csv", table.to_csv())
    return {"scan": table.to_dict(), "tables": ["scan.csv"]}


def _cmd_optimize(cfg: RunConfig, run_dir: Path) -> dict:
    oc = OptimizerConfig(restarts=cfg.restarts, max_evals=cfg.budget, seed=cfg.seed, solver=cfg.solver_config(),
                         max_nu=max(0.9, min(cfg.nu, 0.9051)))
    best, value, trace = minimize_lambda1(cfg.nu, cfg.k, oc)
    out = {"best": best.to_dict(), "lambda1": value, "trace": trace.to_dict()}
    if cfg.el and best.K:
        res = solve_lambda1(best.to_measure(), oc.solver)
        out["el_diagnostic"] = el_diagnostic(best, res, res.forms.grid).to_dict()
    return out


def _cmd_critical(cfg: RunConfig, run_dir: Path) -> dict:
    mu = cfg.the_measure()
    out: dict = {}
    if cfg.negative_data is not None:
        neg = ChargeDistribution.from_dict(cfg.negative_data)
        gap = signed_gap(SignedChargeDistribution(mu, neg))
        out["signed_gap"] = gap.to_dict()
    solver = RadialBackend() if mu.is_radial() else GalerkinBackend(cfg.solver_config())
    out["report"] = critical_report(mu, solver, with_nu0=cfg.with_nu0).to_dict()
    return out


def _cmd_bounds(cfg: RunConfig, run_dir: Path) -> dict:
    try:
        bound = lower_bound_lambda(cfg.nu)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return {"nu": cfg.nu, "lower_bound_lambda": bound, "tix_constant": tix_constant(),
            "coulomb_reference": math.sqrt(1.0 - cfg.nu**2),
            "provenance": {"lower_bound_lambda": "analytic-bound", "tix_constant": "analytic-bound"}}


def _cmd_report(cfg: RunConfig, run_dir: Path) -> dict:
    recs = []
    for p in cfg.records:
        try:
            recs.append(load_record(p))
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot read record {p}: {exc}") from exc
    kinds = {r.command for r in recs}
    tables = []
    if kinds == {"scan"}:
        rows = [row for r in recs for row in r.results["scan"]["rows"]]
        rows.sort(key=lambda row: row["d"])
        write_atomic(run_dir / "merged.csv", csv_text(["d", "lambda1", "residual", "status"],
                                                       [(x["d"], x["lambda1"], x["residual"], x["status"])
                                                        for x in rows]))
        write_atomic(run_dir / "lambda1_vs_d.dat",
                     "".join(f"{x['d']:.17g} {x['lambda1']:.17g}\n" for x in rows if x["status"] == "ok"))
        tables = ["merged.csv", "lambda1_vs_d.dat"]
        n = len(rows)
    elif kinds <= {"solve", "radial"}:
        rows = []
        for r in recs:
            nu = r.results.get("mass")
            lam = r.results["lambda1"]
            try:
                bound = lower_bound_lambda(nu)
            except ValueError:
                bound = math.nan
            rows.append((nu, lam, math.sqrt(1.0 - nu**2) if nu < 1 else math.nan, bound))
        rows.sort(key=lambda t: t[0])
        write_atomic(run_dir / "sweep.csv", csv_text(["nu", "lambda1", "conjecture_ref", "bound"], rows))
        write_atomic(run_dir / "lambda1_vs_nu.dat", "".join(f"{a:.17g} {b:.17g} {c:.17g}\n" for a, b, c, _ in rows))
        tables = ["sweep.csv", "lambda1_vs_nu.dat"]
        n = len(rows)
    else:
        raise ConfigError(f"cannot merge records of kinds {sorted(kinds)}")
    return {"merged_rows": n, "sources": list(cfg.records), "tables": tables}


HANDLERS = {"solve": _cmd_solve, "radial": _cmd_radial, "scan": _cmd_scan, "optimize": _cmd_optimize,
            "critical": _cmd_critical, "bounds": _cmd_bounds, "report": _cmd_report}


def execute(cfg: RunConfig, run_dir: Path) -> RunRecord:
    """Run one command with BLAS pinned to a single thread; ``threads`` only fans out independent tasks."""
    t0 = time.perf_counter()
    with threadpool_limits(limits=1):
        results = HANDLERS[cfg.command](cfg, run_dir)
    tables = results.pop("tables", []) if cfg.command != "report" else list(results.get("tables", []))
    return RunRecord(command=cfg.command, config=cfg.to_dict(), results=results,
                     timings={"wall_seconds": time.perf_counter() - t0}, seed=cfg.seed, tables=tables)


def run(cfg: RunConfig) -> tuple[int, RunRecord | None]:
    """Validate, execute and persist; returns (exit status, record or None)."""
    try:
        cfg.validate()
        cfg.load_measures()
    except (ConfigError, MeasureError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"diraclab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION, None
    run_dir = make_run_dir(Path(cfg.out), cfg.command)
    handler = logging.FileHandler(run_dir / "log.txt", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    try:
        log.info("diraclab %s: %s", __version__, cfg.command)
        record = execute(cfg, run_dir)
        record.save(run_dir)
        log.info("record written to %s", run_dir / "record.json")
        print(run_dir)
        return EXIT_OK, record
    except (ConfigError, MeasureError) as exc:
        log.error("validation error: %s", exc)
        print(f"diraclab: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION, None
    except (SolverError, IntegrationError, DiracLabError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        print(f"diraclab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL, None
    finally:
        log.removeHandler(handler)
        handler.close()


# -- argument parsing ----------------------------------------------------------------

def _env(name: str, cast, default):
    raw = os.environ.get(f"DCLAB_{name}")
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for DCLAB_{name}: {raw!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diraclab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--measure", default=_env("MEASURE", str, None), help="measure JSON file")
        s.add_argument("--nu", type=float, default=_env("NU", float, None), help="total mass / single-atom weight")
        s.add_argument("--k", type=int, default=_env("K", int, 2), help="number of atoms to optimize over")
        s.add_argument("--seed", type=int, default=_env("SEED", int, 0))
        s.add_argument("--threads", type=int, default=_env("THREADS", int, 1))
        s.add_argument("--out", default=_env("OUT", str, "runs"), help="output directory")
        s.add_argument("--basis-n", type=int, default=_env("BASIS_N", int, 14), help="exponents per centre")
        s.add_argument("--grid-level", type=int, choices=(1, 2, 3), default=_env("GRID_LEVEL", int, 2))
        s.add_argument("--tol", type=float, default=_env("TOL", float, 1e-9), help="tolerance on lambda")
        s.add_argument("--config", help="rerun from the config snapshot of a record.json")
        if name == "scan":
            s.add_argument("--split", type=float, default=0.5)
            s.add_argument("--distances", type=float, nargs="+", default=list(DEFAULT_DISTANCES))
        if name == "optimize":
            s.add_argument("--budget", type=int, default=200, help="evaluations per restart")
            s.add_argument("--restarts", type=int, default=8)
        if name in ("solve", "optimize"):
            s.add_argument("--el", action="store_true", help="also run the Euler-Lagrange diagnostic")
        if name == "critical":
            s.add_argument("--negative", dest="negative_measure", help="negative part of a signed measure")
            s.add_argument("--no-nu0", dest="with_nu0", action="store_false")
        if name == "report":
            s.add_argument("records", nargs="*", help="record.json files or run directories")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    if ns.config:
        snap = load_record(ns.config).config
        return RunConfig.from_dict({**snap, "out": ns.out})
    keys = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in keys})


def main(argv: Sequence[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        cfg = config_from_args(ns)
    except (ConfigError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"diraclab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    status, _ = run(cfg)
    return status


if __name__ == "__main__":
    sys.exit(main())
