"""Multicenter Gaussian Galerkin discretization of the reduced Dirac-Coulomb form.

For upper spinors phi = sum_i c_i g_i e_s the reduced form is

    q_lam(phi) = int |sigma.grad phi|^2 / (1 + lam + V) + int (1 - lam - V) |phi|^2.

With real scalar primitives g_i one has
(sigma.grad g_i)(sigma.grad g_j) = grad g_i . grad g_j + i sigma . (grad g_i x grad g_j),
so the kinetic matrix is T = I2 (x) A + i sum_m sigma_m (x) C_m with real A
(symmetric) and C_m (antisymmetric).  Spin-major ordering is used throughout.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .basis import BasisSet, EvenTempered, basis_from_centers, overlap_matrix, scalar_gradients, scalar_values
from .errors import ConfigError, MeasureError, NoBoundStateError, SingularPointError, SolverError
from .measures import ChargeDistribution, nu_max, potential, total_mass
from .pencil import CanonicalOrthogonalizer, RootSearch, find_lambda1
from .quadrature import GridSpec, MulticenterGrid, build_multicenter_grid, hartree_potential
from .spinors import PAULI

_CHUNK = 8192


@dataclass(frozen=True)
class SolverConfig:
    basis: EvenTempered = field(default_factory=EvenTempered)
    grid: GridSpec = field(default_factory=GridSpec)
    delta: float = 1e-6
    tol: float = 1e-9
    overlap_threshold: float = 1e-10
    atom_cap: float = 0.999
    residual_tol: float = 1e-6

    def __post_init__(self):
        if not (0 < self.delta < 0.5):
            raise ConfigError("delta must lie in (0, 0.5)")
        if not (self.tol > 0 and self.residual_tol > 0 and self.overlap_threshold > 0):
            raise ConfigError("tolerances must be positive")
        if not (0 < self.atom_cap <= 1):
            raise ConfigError("atom cap must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        d = dict(d)
        basis = EvenTempered(**d.pop("basis", {}))
        grid = GridSpec(**d.pop("grid", {}))
        return cls(basis=basis, grid=grid, **d)


def build_basis(mu: ChargeDistribution, config: SolverConfig | EvenTempered | None = None) -> BasisSet:
    """Even-tempered primitives on every component centre of mu, times two spins."""
    params = config.basis if isinstance(config, SolverConfig) else (config or EvenTempered())
    centers = mu.centers()
    if not centers:
        raise ConfigError("cannot build a basis for a measure without components")
    return basis_from_centers(centers, params)


def grid_for(mu: ChargeDistribution, basis: BasisSet, spec: GridSpec) -> MulticenterGrid:
    centers = []
    for c in [tuple(c) for c in basis.provenance.get("centers", [])] + mu.centers():
        c = tuple(float(v) for v in c)
        if c not in centers:
            centers.append(c)
    return build_multicenter_grid(centers, spec)


def _spin_blocks(A, C1, C2, C3) -> np.ndarray:
    top = np.hstack([A + 1j * C3, C2 + 1j * C1])
    bot = np.hstack([-C2 + 1j * C1, A - 1j * C3])
    return np.vstack([top, bot])


def _blockdiag2(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[:n, :n] = M
    out[n:, n:] = M
    return out


@dataclass
class AssembledForms:
    """Overlap S, potential form U and the lambda-dependent kinetic assembler T(lam).

    All full matrices act on the spin-major 2N-dimensional coefficient space.
    """

    basis: BasisSet
    grid: MulticenterGrid
    S_spatial: np.ndarray
    U_spatial: np.ndarray
    V: np.ndarray
    values: np.ndarray   # (P, N)
    grads: np.ndarray    # (3, P, N)

    @property
    def S(self) -> np.ndarray:
        return _blockdiag2(self.S_spatial)

    @property
    def U(self) -> np.ndarray:
        return _blockdiag2(self.U_spatial)

    def weighted_kinetic(self, weight: np.ndarray) -> np.ndarray:
        """int weight (sigma.grad phi_i)^* (sigma.grad phi_j) over the grid."""
        w = self.grid.weights * weight
        D = self.grads
        WD = D * w[None, :, None]
        A = WD[0].T @ D[0] + WD[1].T @ D[1] + WD[2].T @ D[2]
        M23 = WD[1].T @ D[2]
        M31 = WD[2].T @ D[0]
        M12 = WD[0].T @ D[1]
        A = 0.5 * (A + A.T)
        return _spin_blocks(A, M23 - M23.T, M31 - M31.T, M12 - M12.T)

    def kinetic(self, lam: float) -> np.ndarray:
        if lam <= -1.0:
            raise SolverError("kinetic form needs lambda > -1")
        return self.weighted_kinetic(1.0 / (1.0 + lam + self.V))

    def form(self, lam: float) -> np.ndarray:
        return self.kinetic(lam) + (1.0 - lam) * self.S - self.U


def grid_potential(mu: ChargeDistribution, grid: MulticenterGrid) -> np.ndarray:
    """V_mu at the grid points; nodes of zero weight (e.g. sitting on another atom) get V = 1."""
    V = np.ones(grid.size) if not mu.is_empty else np.zeros(grid.size)
    live = grid.weights > 0
    if not mu.is_empty:
        V[live] = potential(mu, grid.points[live])
    return V


def assemble(mu: ChargeDistribution, basis: BasisSet, grid: MulticenterGrid) -> AssembledForms:
    """Assemble S in closed form and U, T(lam) by multicenter quadrature."""
    atoms = np.array([a.position for a in mu.atoms]).reshape(-1, 3)
    for a in atoms:
        if not np.any(np.all(grid.centers == a, axis=1)):
            raise ConfigError(f"grid has no centre at atom position {a.tolist()}")
    V = grid_potential(mu, grid)
    values = scalar_values(grid.points, basis)
    grads = np.moveaxis(scalar_gradients(grid.points, basis), -1, 0).copy()
    w = grid.weights * V
    if not np.all(np.isfinite(w)):
        raise SolverError("non-finite potential on the grid")
    U = (values * w[:, None]).T @ values
    S = overlap_matrix(basis)
    return AssembledForms(basis, grid, S, 0.5 * (U + U.T), V, values, grads)


def smallest_form_eigenvalue(forms: AssembledForms, lam: float, threshold: float = 1e-10) -> float:
    """Smallest eigenvalue e1 of [T(lam) + (1 - lam) S - U] w = e S w."""
    if not (-1.0 < lam < 1.0):
        raise ConfigError("lambda must lie in (-1, 1)")
    return CanonicalOrthogonalizer(forms.S, threshold).lowest(forms.form(lam))[0]


class EnergyMetricPencil:
    """Form eigenvalue in the metric G = T(0) + S.

    Its sign equals the sign of e1(lam) for every lam, so both share the root
    lambda_1; in this metric the projected matrices stay O(1) even for bases
    whose overlap-metric Rayleigh quotients span many decades.
    """

    def __init__(self, forms: AssembledForms, threshold: float = 1e-10):
        self.forms = forms
        self.ortho = CanonicalOrthogonalizer(forms.kinetic(0.0) + forms.S, threshold)
        self.S_ortho = CanonicalOrthogonalizer(forms.S, threshold)

    def __call__(self, lam: float) -> float:
        return self.ortho.lowest(self.forms.form(lam))[0]

    def eigenvector(self, lam: float) -> np.ndarray:
        return self.ortho.lowest(self.forms.form(lam))[1]


@dataclass
class SolveResult:
    lambda1: float
    coefficients: np.ndarray
    residual: float
    bound_state_found: bool
    history: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    forms: AssembledForms | None = field(default=None, repr=False)

    @property
    def basis(self) -> BasisSet:
        return self.forms.basis

    def diagnostics_record(self) -> dict:
        return {"lambda1": self.lambda1, "bound_state_found": self.bound_state_found,
                "residual": self.residual, **self.diagnostics}


def _check_measure(mu: ChargeDistribution, config: SolverConfig) -> None:
    if total_mass(mu) <= 0:
        raise MeasureError("solve_lambda1 needs a measure of positive mass")
    if nu_max(mu) >= config.atom_cap:
        raise MeasureError(f"largest atom {nu_max(mu):.6g} reaches the cap {config.atom_cap}")


def solve_forms(forms: AssembledForms, config: SolverConfig) -> SolveResult:
    pencil = EnergyMetricPencil(forms, config.overlap_threshold)
    search: RootSearch = find_lambda1(pencil, delta=config.delta, tol=config.tol)
    n = len(forms.basis)
    if search.bound_state_found:
        c = pencil.eigenvector(search.lambda1)
        norm = math.sqrt(max(np.real(np.vdot(c, forms.S @ c)), 0.0))
        c = c / norm
        k = np.argmax(np.abs(c))
        c = c * (abs(c[k]) / c[k])  # fix the global phase
    else:
        c = np.zeros(n, dtype=complex)
    diag = {
        "basis_size": n,
        "grid_size": forms.grid.size,
        "overlap_condition": pencil.S_ortho.condition,
        "overlap_dropped": pencil.S_ortho.n_dropped,
        "energy_metric_rank": pencil.ortho.rank,
        "bracket_iterations": len(search.history),
        "residual_ok": bool(search.residual <= config.residual_tol) if search.bound_state_found else None,
    }
    return SolveResult(search.lambda1, c, search.residual, search.bound_state_found,
                       search.history, diag, forms)


def solve_lambda1(mu: ChargeDistribution, config: SolverConfig | None = None, *,
                  basis: BasisSet | None = None, grid: MulticenterGrid | None = None) -> SolveResult:
    """First eigenvalue lambda_1(D0 - V_mu) by root search on the reduced form."""
    config = config or SolverConfig()
    _check_measure(mu, config)
    basis = basis or build_basis(mu, config)
    grid = grid or grid_for(mu, basis, config.grid)
    return solve_forms(assemble(mu, basis, grid), config)


# -- eigenfunction post-processing --------------------------------------------

def _upper_and_grad(c: np.ndarray, basis: BasisSet, points: np.ndarray):
    n = basis.n_spatial
    cu, cd = c[:n], c[n:]
    vals = scalar_values(points, basis)
    grads = scalar_gradients(points, basis)  # (P, N, 3)
    phi = np.stack([vals @ cu, vals @ cd], axis=-1)  # (P, 2)
    dphi = np.stack([np.einsum("pnk,n->pk", grads, cu), np.einsum("pnk,n->pk", grads, cd)], axis=-1)  # (P,3,2)
    sgp = np.einsum("kab,pkb->pa", PAULI, dphi)
    return phi, sgp


def upper_spinor(result: SolveResult, x) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    phi, _ = _upper_and_grad(result.coefficients, result.basis, pts)
    return phi[0] if np.ndim(x) == 1 else phi


def reconstruct_lower_spinor(result: SolveResult, mu: ChargeDistribution, x) -> np.ndarray:
    """chi(x) = -i sigma.grad phi / (1 + lambda_1 + V_mu), shape (2,) or (P, 2)."""
    if not result.bound_state_found:
        raise NoBoundStateError("lower spinor needs a bound state")
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    V = np.atleast_1d(potential(mu, pts))  # raises SingularPointError at atoms
    _, sgp = _upper_and_grad(result.coefficients, result.basis, pts)
    chi = -1j * sgp / (1.0 + result.lambda1 + V)[:, None]
    return chi[0] if np.ndim(x) == 1 else chi


def density_on_grid(result: SolveResult, mu: ChargeDistribution, grid: MulticenterGrid) -> tuple[np.ndarray, float]:
    """|Psi|^2 = |phi|^2 + |chi|^2 on the grid, normalized; returns (rho, original norm)."""
    phi, sgp = _upper_and_grad(result.coefficients, result.basis, grid.points)
    V = grid_potential(mu, grid)
    chi = sgp / (1.0 + result.lambda1 + V)[:, None]
    rho = np.sum(np.abs(phi) ** 2, axis=1) + np.sum(np.abs(chi) ** 2, axis=1)
    norm = float(np.sum(grid.weights * rho))
    if not norm > 0:
        raise SolverError("eigenfunction has zero norm on the grid")
    return rho / norm, norm


def el_potential(result: SolveResult, mu: ChargeDistribution, grid: MulticenterGrid, x,
                 lmax: int = 8) -> tuple[np.ndarray | float, dict]:
    """Phi(x) = (|Psi|^2 * 1/|.|)(x) for the normalized eigenfunction.

    Returns the values and a diagnostics dict holding the pre-normalization
    norm of Psi on the grid.
    """
    if not result.bound_state_found:
        raise NoBoundStateError("el_potential needs a bound state")
    rho, norm = density_on_grid(result, mu, grid)
    pts = np.asarray(x, dtype=float)
    vals = hartree_potential(grid, rho, np.atleast_2d(pts), lmax=lmax)
    info = {"psi_norm_before": norm, "renormalized": bool(abs(norm - 1.0) > 1e-12)}
    return (float(vals[0]) if pts.ndim == 1 else vals), info
