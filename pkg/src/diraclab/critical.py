"""Critical couplings nu0(mu), nu1(mu), the Tix constant and the analytic eigenvalue bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from scipy.optimize import brentq

from .basis import BasisSet, EvenTempered, basis_from_centers
from .errors import ConfigError, GapBottomError, MeasureError, SolverError
from .galerkin import SolverConfig, assemble, grid_for, solve_lambda1
from .measures import ChargeDistribution, SignedChargeDistribution, nu_max, scale_mass, total_mass
from .pencil import CanonicalOrthogonalizer
from .quadrature import GridSpec, MulticenterGrid
from .radial import radial_lambda1


def tix_constant() -> float:
    """2 / (pi/2 + 2/pi): a known lower bound for both critical couplings."""
    return 2.0 / (math.pi / 2.0 + 2.0 / math.pi)


def lower_bound_lambda(nu: float, nu0_lower: float | None = None) -> float:
    """Lower bound on lambda_1 for any positive measure of mass nu < nu0_lower.

    (nu0 - nu) / ((pi/2) nu0 nu + nu0 - nu), increasing in nu0, so any lower
    bound on nu0 may be substituted.
    """
    n0 = tix_constant() if nu0_lower is None else float(nu0_lower)
    if not 0 < n0 <= 1:
        raise ValueError("nu0_lower must lie in (0, 1]")
    if not 0 <= nu < n0:
        raise ValueError(f"bound needs 0 <= nu < nu0_lower = {n0:.6g}, got nu = {nu}")
    return (n0 - nu) / (0.5 * math.pi * n0 * nu + n0 - nu)


# -- lambda_1 backends ---------------------------------------------------------

class Lambda1Backend(Protocol):
    name: str
    atom_cap: float

    def __call__(self, mu: ChargeDistribution) -> float: ...


@dataclass
class RadialBackend:
    """B-spline solver; radial measures only."""

    atom_cap: float = 1.0 - 1e-6
    options: dict = field(default_factory=dict)
    name: str = "radial"

    def __call__(self, mu: ChargeDistribution) -> float:
        return radial_lambda1(mu, **self.options)


@dataclass
class GalerkinBackend:
    """Multicenter Gaussian solver; any measure."""

    config: SolverConfig = field(default_factory=SolverConfig)
    name: str = "galerkin3d"

    @property
    def atom_cap(self) -> float:
        return self.config.atom_cap

    def __call__(self, mu: ChargeDistribution) -> float:
        if total_mass(mu) <= 0:
            return 1.0
        return solve_lambda1(mu, self.config).lambda1


def default_backend(mu: ChargeDistribution) -> Lambda1Backend:
    return RadialBackend() if mu.is_radial() else GalerkinBackend()


# -- nu0 ----------------------------------------------------------------------

@dataclass
class Nu0Result:
    value: float
    provenance: str  # "solved" or "cap-rule"
    evaluations: list[tuple[float, float]] = field(default_factory=list)


def nu0_detail(mu: ChargeDistribution, solver: Lambda1Backend | None = None, tol: float = 1e-6) -> Nu0Result:
    """Mass s = t mu(R^3) at which lambda_1(D0 - t V_mu) crosses 0.

    Doubling in s from 1/2, then Brent's method (bisection-safeguarded) to
    tolerance ``tol`` in s.  When no crossing happens before the largest atom
    reaches the backend cap the cap rule mu(R^3)/nu_max(mu) is returned.
    """
    mass = total_mass(mu)
    if mass <= 0:
        raise MeasureError("nu0 needs a measure of positive mass")
    solver = solver or default_backend(mu)
    top = nu_max(mu)
    # stay a hair inside the cap: the solvers reject atoms of exactly the cap weight
    s_cap = solver.atom_cap * (1.0 - 1e-12) * mass / top if top > 0 else math.inf
    evals: list[tuple[float, float]] = []

    def lam(s: float) -> float:
        try:
            val = solver(scale_mass(mu, s / mass))
        except GapBottomError:
            val = -1.0  # the eigenvalue is already at the bottom of the gap
        evals.append((s, val))
        return val

    lo, hi = 0.0, min(0.5, s_cap)
    while True:
        if lam(hi) <= 0.0:
            break
        if hi >= s_cap:
            return Nu0Result(mass / top, "cap-rule", evals)
        lo, hi = hi, min(2.0 * hi, s_cap)
        if hi > 1e6:
            raise SolverError("no zero crossing of lambda_1 found up to mass 1e6")
    if evals[-1][1] == 0.0:
        return Nu0Result(hi, "solved", evals)
    s = brentq(lam, lo, hi, xtol=tol) if lo > 0 else brentq(lam, 1e-12, hi, xtol=tol)
    return Nu0Result(float(s), "solved", evals)


def nu0_of(mu: ChargeDistribution, solver: Lambda1Backend | None = None, tol: float = 1e-6) -> float:
    return nu0_detail(mu, solver, tol).value


# -- nu1 (Hardy quotient) ------------------------------------------------------

HARDY_BASIS = EvenTempered(a0=1e-36, ratio=2.8, count=160)
HARDY_GRID = GridSpec(n_radial=720, r_min=1e-46, r_max=1e21, angular=50)
# lighter multicenter defaults; upward bias about 1e-2
HARDY_MULTI_BASIS = EvenTempered(a0=1e-12, ratio=2.8, count=60)
HARDY_MULTI_GRID = GridSpec(n_radial=400, r_min=1e-12, r_max=1e9, angular=110)


def hardy_setup(mu: ChargeDistribution, params: EvenTempered | None = None,
                spec: GridSpec | None = None) -> tuple[BasisSet, MulticenterGrid]:
    """Wide even-tempered basis plus a matching grid for the Hardy quotient.

    The quotient's Galerkin bias decays only like (pi / ln(a_max/a_min))^2,
    hence the very wide exponent range.  A single centre needs only s
    functions and the smallest angular rule.
    """
    single = len(mu.centers()) == 1
    params = params or (HARDY_BASIS if single else HARDY_MULTI_BASIS)
    spec = spec or (HARDY_GRID if single else HARDY_MULTI_GRID)
    basis = basis_from_centers(mu.centers(), params)
    return basis, grid_for(mu, basis, spec)


def hardy_quotient_min(mu: ChargeDistribution, basis: BasisSet, grid: MulticenterGrid,
                       threshold: float = 1e-12) -> float:
    """Smallest theta with H w = theta U w, H = int |sigma.grad phi|^2 / V, U = int V |phi|^2."""
    forms = assemble(mu, basis, grid)
    H = forms.weighted_kinetic(1.0 / forms.V)
    U = forms.U
    if not np.all(np.isfinite(H)):
        raise SolverError("non-finite Hardy kinetic form")
    try:
        CanonicalOrthogonalizer(U, threshold)
    except SolverError as exc:
        raise SolverError("potential form U is singular: basis orthogonal to the potential") from exc
    # H w = theta U w  <=>  H w = tau (H + U) w with tau = theta / (1 + theta); the
    # second pencil stays well scaled over many decades of exponents.
    tau = CanonicalOrthogonalizer(H + U, threshold).lowest(H)[0]
    if not 0 < tau < 1:
        raise SolverError(f"Hardy pencil eigenvalue {tau} outside (0, 1)")
    return tau / (1.0 - tau)


def nu1_of(mu: ChargeDistribution, basis: BasisSet | None = None, grid: MulticenterGrid | None = None) -> float:
    """Per-measure Hardy-quotient estimate mass * sqrt(theta_min); the point charge gives 1."""
    mass = total_mass(mu)
    if mass <= 0:
        raise MeasureError("nu1 needs a measure of positive mass")
    if basis is None or grid is None:
        b, g = hardy_setup(mu)
        basis, grid = basis or b, grid or g
    return mass * math.sqrt(hardy_quotient_min(mu, basis, grid))


# -- reports -------------------------------------------------------------------

@dataclass
class CriticalReport:
    nu0: float | None
    nu1_estimate: float
    nu1_method: str = "hardy-quotient"
    brackets: tuple[float, float] = field(default_factory=lambda: (tix_constant(), 1.0))
    provenance: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def ordered(self) -> bool | None:
        if self.nu0 is None:
            return None
        return self.nu0 <= self.nu1_estimate

    def to_dict(self) -> dict:
        return {
            "nu0": self.nu0,
            "nu1_estimate": self.nu1_estimate,
            "nu1_method": self.nu1_method,
            "brackets": {"lower": self.brackets[0], "upper": self.brackets[1]},
            "provenance": dict(self.provenance),
            "nu0_le_nu1": self.ordered,
            "diagnostics": dict(self.diagnostics),
        }


def critical_report(mu: ChargeDistribution, solver: Lambda1Backend | None = None,
                    basis: BasisSet | None = None, grid: MulticenterGrid | None = None,
                    with_nu0: bool = True) -> CriticalReport:
    nu0 = nu0_detail(mu, solver) if with_nu0 else None
    nu1 = nu1_of(mu, basis, grid)
    prov = {"nu1_estimate": "solved", "brackets": "analytic-bound"}
    diag = {"mass": total_mass(mu), "nu_max": nu_max(mu)}
    if nu0 is not None:
        prov["nu0"] = nu0.provenance
        diag["nu0_evaluations"] = len(nu0.evaluations)
    return CriticalReport(nu0.value if nu0 else None, nu1, provenance=prov, diagnostics=diag)


# -- signed measures -----------------------------------------------------------

@dataclass
class GapInterval:
    certified: tuple[float, float]
    analytic: tuple[float, float]
    lambda_plus: float
    lambda_minus: float

    def to_dict(self) -> dict:
        return {"certified": list(self.certified), "analytic": list(self.analytic),
                "lambda_plus": self.lambda_plus, "lambda_minus": self.lambda_minus,
                "provenance": {"certified": "solved", "analytic": "analytic-bound"}}


def signed_gap(mu: SignedChargeDistribution, solver: Callable[[ChargeDistribution], float] | None = None,
               nu0_lower: float | None = None) -> GapInterval:
    """Spectral-gap interval (-lambda_1(mu_-), lambda_1(mu_+)) for a signed measure."""
    n0 = tix_constant() if nu0_lower is None else nu0_lower
    if mu.nu_plus >= n0 or mu.nu_minus >= n0:
        raise ValueError(f"both parts need mass below {n0:.6g}")

    def lam(part: ChargeDistribution) -> float:
        if total_mass(part) <= 0:
            return 1.0
        return (solver or default_backend(part))(part)

    lp, lm = lam(mu.positive_part), lam(mu.negative_part)
    analytic = (-lower_bound_lambda(mu.nu_minus, n0), lower_bound_lambda(mu.nu_plus, n0))
    return GapInterval((-lm, lp), analytic, lp, lm)


def global_estimate(which: str, K: int = 2, budget: int = 40, seed: int = 0, restarts: int = 1,
                    solver: Lambda1Backend | None = None, hardy_params: EvenTempered | None = None,
                    tol: float = 2e-3):
    """Smallest nu0_of / nu1_of found over K-atom probability configurations.

    Returns (value, Configuration, OptimizationTrace).  The K = 1 incumbent
    (value 1) is always seeded; a value outside [tix - tol, 1 + tol] raises.
    """
    from .optimizer import Configuration, search_configurations

    if which not in ("nu0", "nu1"):
        raise ConfigError("which must be 'nu0' or 'nu1'")
    if K < 1:
        raise ConfigError("K must be >= 1")
    hp = hardy_params or EvenTempered(a0=1e-8, ratio=2.8, count=40)
    spec = HARDY_MULTI_GRID

    def objective(mu: ChargeDistribution) -> float:
        if which == "nu0":
            be = solver or (RadialBackend() if mu.is_radial() else GalerkinBackend())
            return nu0_of(mu, be)
        if len(mu.centers()) == 1:
            return nu1_of(mu)
        basis = basis_from_centers(mu.centers(), hp)
        return nu1_of(mu, basis, grid_for(mu, basis, spec))

    incumbent = Configuration.single(1.0)
    best, value, trace = search_configurations(objective, nu=1.0, K=K, budget=budget, seed=seed,
                                               restarts=restarts, incumbent=(incumbent, 1.0),
                                               weight_cap=None)
    t = tix_constant()
    if not (t - tol <= value <= 1.0 + tol):
        raise SolverError(f"global {which} estimate {value:.6g} outside [{t:.4f}, 1]")
    return value, best, trace
