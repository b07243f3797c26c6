"""Search for lambda_1-minimizing K-atom configurations at fixed mass, plus scans and diagnostics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, DiracLabError, MeasureError, NoBoundStateError
from .galerkin import SolverConfig, SolveResult, el_potential, solve_lambda1
from .measures import ChargeDistribution, PointCharge
from .quadrature import MulticenterGrid
from .radial import radial_lambda1
from .records import csv_text


@dataclass(frozen=True)
class Configuration:
    """K point charges with weighted centroid at the origin and weights summing to nu."""

    positions: tuple[tuple[float, float, float], ...]
    weights: tuple[float, ...]

    @property
    def K(self) -> int:
        return len(self.weights)

    @property
    def nu(self) -> float:
        return math.fsum(self.weights)

    @classmethod
    def single(cls, nu: float) -> "Configuration":
        return cls(((0.0, 0.0, 0.0),), (float(nu),))

    @classmethod
    def empty(cls) -> "Configuration":
        return cls((), ())

    @classmethod
    def from_params(cls, p: np.ndarray, nu: float, K: int) -> "Configuration":
        """Free parameters [z_1..z_K, y_1..y_K (3 each)] -> weights nu z^2/|z|^2, centred positions."""
        p = np.asarray(p, dtype=float)
        if p.shape != (4 * K,):
            raise ConfigError(f"expected {4 * K} parameters, got {p.shape}")
        z2 = p[:K] ** 2
        tot = z2.sum()
        z2 = np.full(K, 1.0 / K) if not tot > 0 else z2 / tot
        w = nu * z2
        y = p[K:].reshape(K, 3)
        x = y - (z2 @ y)[None, :]
        return cls(tuple(tuple(float(v) for v in row) for row in x), tuple(float(v) for v in w))

    def to_params(self) -> np.ndarray:
        nu = self.nu
        z = np.sqrt(np.asarray(self.weights) / nu) if nu > 0 else np.ones(self.K)
        return np.concatenate([z, np.asarray(self.positions, dtype=float).ravel()])

    def centroid(self) -> np.ndarray:
        if not self.K:
            return np.zeros(3)
        return np.asarray(self.weights) @ np.asarray(self.positions) / self.nu

    def merged(self, distance: float = 1e-3, cap: float = 1.0) -> "Configuration":
        """Merge atoms closer than ``distance`` (weighted mean position); MeasureError past the cap."""
        pos = [np.asarray(p, dtype=float) for p in self.positions]
        w = list(self.weights)
        changed = True
        while changed:
            changed = False
            for i in range(len(w)):
                for j in range(i + 1, len(w)):
                    if np.linalg.norm(pos[i] - pos[j]) < distance:
                        m = w[i] + w[j]
                        if m >= cap:
                            raise MeasureError(f"merging atoms gives weight {m:.6g} >= {cap}")
                        pos[i] = (w[i] * pos[i] + w[j] * pos[j]) / m
                        w[i] = m
                        del pos[j], w[j]
                        changed = True
                        break
                if changed:
                    break
        return Configuration(tuple(tuple(float(v) for v in p) for p in pos), tuple(w))

    def to_measure(self) -> ChargeDistribution:
        keep = [(p, w) for p, w in zip(self.positions, self.weights) if w > 0]
        return ChargeDistribution(atoms=tuple(PointCharge(p, w) for p, w in keep))

    def to_dict(self) -> dict:
        return {"positions": [list(p) for p in self.positions], "weights": list(self.weights)}

    @classmethod
    def from_dict(cls, d: dict) -> "Configuration":
        return cls(tuple(tuple(float(v) for v in p) for p in d["positions"]),
                   tuple(float(w) for w in d["weights"]))


@dataclass
class TraceEntry:
    configuration: Configuration
    value: float
    residual: float
    status: str
    restart: int

    def to_dict(self) -> dict:
        return {"configuration": self.configuration.to_dict(), "value": self.value,
                "residual": self.residual, "status": self.status, "restart": self.restart}


@dataclass
class OptimizationTrace:
    iterations: list[TraceEntry] = field(default_factory=list)
    incumbent_values: list[float] = field(default_factory=list)
    best: Configuration | None = None
    best_value: float = math.inf
    termination: str = ""
    seed: int = 0

    def record(self, entry: TraceEntry) -> None:
        self.iterations.append(entry)
        if entry.status == "ok" and entry.value < self.best_value:
            self.best_value = entry.value
            self.best = entry.configuration
        self.incumbent_values.append(self.best_value)

    def to_dict(self) -> dict:
        return {
            "iterations": [e.to_dict() for e in self.iterations],
            "incumbent_values": list(self.incumbent_values),
            "best": self.best.to_dict() if self.best else None,
            "best_value": self.best_value,
            "termination": self.termination,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 8
    max_evals: int = 200
    seed: int = 0
    spread: float = 1.0
    merge_distance: float = 1e-3
    penalty: float = 2.0
    max_nu: float = 0.9
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.restarts < 0 or self.max_evals < 0:
            raise ConfigError("restarts and max_evals must be >= 0")
        if not 0 < self.max_nu <= 0.9051:
            raise ConfigError("max_nu must lie in (0, 0.9051]")


def search_configurations(objective: Callable[[ChargeDistribution], float], nu: float, K: int, *,
                          budget: int, seed: int, restarts: int, incumbent: tuple[Configuration, float],
                          spread: float = 1.0, merge_distance: float = 1e-3, penalty: float = 2.0,
                          weight_cap: float | None = 1.0,
                          detail: Callable[[ChargeDistribution], tuple[float, float]] | None = None
                          ) -> tuple[Configuration, float, OptimizationTrace]:
    """Nelder-Mead with seeded random restarts over K-atom configurations of mass nu.

    ``objective`` maps a measure to the value to minimize; failures of any kind
    mark the candidate infeasible with value ``penalty``.  Restarts alternate
    between the incumbent and fresh random points; each restart orients its
    initial simplex along a random rotation of the coordinate axes.
    """
    rng = np.random.default_rng(seed)
    trace = OptimizationTrace(seed=seed)
    cfg0, val0 = incumbent
    trace.record(TraceEntry(cfg0, float(val0), 0.0, "ok", -1))
    if budget == 0 or restarts == 0 or K == 1:
        trace.termination = "budget exhausted before search" if K > 1 else "single atom: incumbent is exact"
        return trace.best, trace.best_value, trace
    cap = math.inf if weight_cap is None else weight_cap
    cache: dict[bytes, float] = {}

    def fun(p: np.ndarray, restart: int) -> float:
        key = p.tobytes()
        if key in cache:
            return cache[key]
        cfg = Configuration.from_params(p, nu, K)
        try:
            if max(cfg.weights) >= cap:
                raise MeasureError("atom weight reaches the cap")
            cfg = cfg.merged(merge_distance, cap)
            mu = cfg.to_measure()
            value, residual = detail(mu) if detail else (objective(mu), 0.0)
            status = "ok"
        except (DiracLabError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
            value, residual, status = penalty, math.nan, f"infeasible: {type(exc).__name__}"
        trace.record(TraceEntry(cfg, float(value), float(residual), status, restart))
        cache[key] = float(value)
        return float(value)

    for r in range(restarts):
        if r % 2 == 0:
            z = rng.uniform(0.5, 1.5, K)
            y = rng.normal(scale=spread, size=(K, 3))
            x0 = np.concatenate([z, y.ravel()])
        else:
            base = trace.best.to_params() if trace.best is not None and trace.best.K == K else None
            x0 = (base if base is not None else np.concatenate([np.ones(K), np.zeros(3 * K)])) \
                + rng.normal(scale=0.3 * spread, size=4 * K)
        Q, _ = np.linalg.qr(rng.normal(size=(4 * K, 4 * K)))
        simplex = np.vstack([x0, x0 + 0.5 * spread * Q.T])
        minimize(fun, x0, args=(r,), method="Nelder-Mead",
                 options={"maxfev": budget, "initial_simplex": simplex, "xatol": 1e-6, "fatol": 1e-9})
    trace.termination = f"completed {restarts} restarts of at most {budget} evaluations"
    return trace.best, trace.best_value, trace


def minimize_lambda1(nu: float, K: int, config: OptimizerConfig | None = None
                     ) -> tuple[Configuration, float, OptimizationTrace]:
    """Smallest lambda_1 found over K-atom measures of mass nu; the single atom is always seeded."""
    config = config or OptimizerConfig()
    if K < 1:
        raise ConfigError("K must be >= 1")
    if nu == 0:
        trace = OptimizationTrace(seed=config.seed, best=Configuration.empty(), best_value=1.0,
                                  termination="zero mass: lambda_1 = 1")
        return Configuration.empty(), 1.0, trace
    if not 0 < nu <= config.max_nu:
        raise ConfigError(f"nu must lie in (0, {config.max_nu}]")

    def detail(mu: ChargeDistribution) -> tuple[float, float]:
        res = solve_lambda1(mu, config.solver)
        return res.lambda1, res.residual

    single = Configuration.single(nu)
    seed_res = solve_lambda1(single.to_measure(), config.solver)
    return search_configurations(lambda mu: detail(mu)[0], nu, K, budget=config.max_evals, seed=config.seed,
                                 restarts=config.restarts, incumbent=(single, seed_res.lambda1),
                                 spread=config.spread, merge_distance=config.merge_distance,
                                 penalty=config.penalty, weight_cap=config.solver.atom_cap, detail=detail)


# -- Euler-Lagrange diagnostic ----------------------------------------------------

@dataclass
class ELReport:
    max_grid: float
    argmax: tuple[float, float, float]
    atom_values: list[float]
    margin: float
    relative_margin: float
    tolerance: float
    passed: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"max_grid": self.max_grid, "argmax": list(self.argmax), "atom_values": self.atom_values,
                "margin": self.margin, "relative_margin": self.relative_margin,
                "tolerance": self.tolerance, "status": "PASS" if self.passed else "FAIL",
                "diagnostics": self.diagnostics}


def box_points(config: Configuration, n: int = 21, inflate: float = 3.0, min_half_width: float = 1.0) -> np.ndarray:
    """Uniform n^3 grid over the atoms' bounding box inflated by ``inflate``."""
    P = np.asarray(config.positions, dtype=float).reshape(-1, 3)
    mid = 0.5 * (P.min(axis=0) + P.max(axis=0))
    half = np.maximum(0.5 * inflate * (P.max(axis=0) - P.min(axis=0)), min_half_width)
    axes = [np.linspace(mid[k] - half[k], mid[k] + half[k], n) for k in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)


def el_diagnostic(best: Configuration, result: SolveResult, grid: MulticenterGrid, *, rel_tol: float = 1e-3,
                  box_n: int = 21, inflate: float = 3.0) -> ELReport:
    """Check that Phi = |Psi|^2 * 1/|x| attains its maximum on the atoms of ``best``."""
    if not result.bound_state_found:
        raise NoBoundStateError("Euler-Lagrange diagnostic needs a bound state")
    mu = best.to_measure()
    atoms = np.asarray(best.positions, dtype=float).reshape(-1, 3)
    pts = np.vstack([grid.points, box_points(best, box_n, inflate), atoms])
    phi, info = el_potential(result, mu, grid, pts)
    n_atoms = len(atoms)
    field_vals, atom_vals = phi[:-n_atoms], phi[-n_atoms:]
    i = int(np.argmax(field_vals))
    margin = float(field_vals[i] - atom_vals.min())
    scale = float(atom_vals.max())
    rel = margin / scale
    return ELReport(float(field_vals[i]), tuple(float(v) for v in pts[i]), [float(v) for v in atom_vals],
                    margin, rel, rel_tol, bool(rel <= rel_tol), {"n_points": len(pts), **info})


# -- two-delta scans ------------------------------------------------------------

@dataclass
class ScanRow:
    d: float
    lambda1: float
    residual: float
    status: str


@dataclass
class ScanTable:
    nu: float
    split: float
    rows: list[ScanRow]
    separated_reference: float
    merged_reference: float

    def monotonicity_violations(self) -> list[tuple[float, float]]:
        """Consecutive distance pairs where lambda_1 decreases as d grows."""
        ok = [r for r in self.rows if r.status == "ok"]
        return [(a.d, b.d) for a, b in zip(ok, ok[1:]) if b.lambda1 < a.lambda1]

    def to_csv(self) -> str:
        rows = [(0.0, self.merged_reference, 0.0, "reference-merged")]
        rows += [(r.d, r.lambda1, r.residual, r.status) for r in self.rows]
        rows.append((math.inf, self.separated_reference, 0.0, "reference-separated"))
        return csv_text(["d", "lambda1", "residual", "status"], rows)

    def to_dict(self) -> dict:
        return {"nu": self.nu, "split": self.split,
                "rows": [vars(r) for r in self.rows],
                "separated_reference": self.separated_reference,
                "merged_reference": self.merged_reference,
                "monotonicity_violations": self.monotonicity_violations()}


def two_delta(nu: float, s: float, d: float) -> ChargeDistribution:
    """Atoms s nu and (1 - s) nu on the x axis at distance d, weighted centroid at 0."""
    w1, w2 = s * nu, (1.0 - s) * nu
    return ChargeDistribution.from_atoms([(-(1.0 - s) * d, 0.0, 0.0), (s * d, 0.0, 0.0)], [w1, w2])


def _scan_row(nu: float, s: float, d: float, config: SolverConfig) -> ScanRow:
    try:
        if not d > 0:
            raise ConfigError("distance must be positive")
        res = solve_lambda1(two_delta(nu, s, d), config)
        return ScanRow(d, res.lambda1, res.residual, "ok" if res.bound_state_found else "no-bound-state")
    except (DiracLabError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        return ScanRow(d, math.nan, math.nan, f"error: {type(exc).__name__}: {exc}")


def scan_two_delta(nu: float, s: float, distances: Sequence[float], config: SolverConfig | None = None,
                   workers: int = 1) -> ScanTable:
    """lambda_1(d) for two atoms of weights s nu, (1-s) nu; rows never abort the scan.

    Rows are independent and may run on ``workers`` threads; they are
    collected in distance order, so the table does not depend on the count.
    """
    if not (0 < s < 1):
        raise ConfigError("split fraction must lie in (0, 1)")
    if nu * max(s, 1.0 - s) >= 1:
        raise ConfigError("each atom must stay below weight 1")
    config = config or SolverConfig()
    ds = sorted(float(x) for x in distances)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda d: _scan_row(nu, s, d, config), ds))
    else:
        rows = [_scan_row(nu, s, d, config) for d in ds]
    sep = min(radial_lambda1(ChargeDistribution.point(s * nu)), radial_lambda1(ChargeDistribution.point((1 - s) * nu)))
    merged = radial_lambda1(ChargeDistribution.point(nu)) if nu < 1 else math.nan
    return ScanTable(nu, s, rows, sep, merged)
