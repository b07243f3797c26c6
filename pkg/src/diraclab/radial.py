"""B-spline Galerkin solver for radially symmetric potentials (kappa = -1 channel).

With the constant-spinor ansatz phi(x) = f(|x|) e_up one has
|sigma . grad phi|^2 = f'(r)^2, so the reduced form becomes

    q_lam(f) = int_0^inf [ f'^2 / (1 + lam + V) + (1 - lam - V) f^2 ] r^2 dr.

This backend is the precision reference for the 3D solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import BSpline

from .errors import ConfigError, MeasureError
from .measures import ChargeDistribution, nu_max, radial_potential, total_mass
from .pencil import CanonicalOrthogonalizer, find_lambda1


@dataclass(frozen=True)
class RadialProblem:
    """Radial potential plus the B-spline discretization used to solve it.

    Knots: 0, then a geometric sequence from ``r_min`` to ``r_max`` with
    ``n_intervals`` intervals, plus any extra ``breakpoints`` (kinks of V, e.g.
    ball radii).  The last spline is dropped to impose f(r_max) = 0.
    """

    V: Callable[[np.ndarray], np.ndarray]
    order: int = 6
    r_min: float = 1e-24
    r_max: float = 300.0
    n_intervals: int = 260
    breakpoints: tuple[float, ...] = ()
    quad_points: int = 10

    def __post_init__(self):
        if self.order < 2:
            raise ConfigError("B-spline order must be >= 2")
        if not (0 < self.r_min < self.r_max):
            raise ConfigError("need 0 < r_min < r_max")
        if self.n_intervals < 4:
            raise ConfigError("need at least 4 knot intervals")

    @classmethod
    def from_measure(cls, mu: ChargeDistribution, **kwargs) -> "RadialProblem":
        if not mu.is_radial():
            raise MeasureError("radial solver needs a measure centred at the origin")
        bps = tuple(sorted({b.radius for b in mu.balls}))
        return cls(V=lambda r, _mu=mu: radial_potential(_mu, r), breakpoints=bps, **kwargs)

    def breaks(self) -> np.ndarray:
        geo = np.geomspace(self.r_min, self.r_max, self.n_intervals + 1)
        extra = [b for b in self.breakpoints if self.r_min < b < self.r_max]
        return np.unique(np.concatenate([[0.0], geo, extra]))

    def knots(self) -> np.ndarray:
        br = self.breaks()
        k = self.order - 1
        return np.concatenate([np.zeros(k), br, np.full(k, br[-1])])


@dataclass
class RadialForms:
    """Quadrature data and the constant matrices of the radial pencil."""

    r: np.ndarray
    w: np.ndarray  # includes the r^2 Jacobian
    V: np.ndarray
    B: np.ndarray
    dB: np.ndarray
    S: np.ndarray
    U: np.ndarray

    def kinetic(self, lam: float) -> np.ndarray:
        return (self.dB * (self.w / (1.0 + lam + self.V))[:, None]).T @ self.dB

    def form(self, lam: float) -> np.ndarray:
        return self.kinetic(lam) + (1.0 - lam) * self.S - self.U


def _gauss_nodes(breaks: np.ndarray, npts: int) -> tuple[np.ndarray, np.ndarray]:
    x, wx = np.polynomial.legendre.leggauss(npts)
    a, b = breaks[:-1, None], breaks[1:, None]
    r = 0.5 * (b - a) * x[None, :] + 0.5 * (b + a)
    w = 0.5 * (b - a) * wx[None, :]
    return r.ravel(), w.ravel()


def assemble_radial(problem: RadialProblem) -> RadialForms:
    t = problem.knots()
    k = problem.order - 1
    nbasis = len(t) - k - 1 - 1  # drop last spline: f(r_max) = 0
    r, wq = _gauss_nodes(problem.breaks(), problem.quad_points)
    coeffs = np.eye(nbasis + 1)[:, :nbasis]
    spl = BSpline(t, coeffs, k, extrapolate=False)
    B = np.nan_to_num(spl(r))
    dB = np.nan_to_num(spl.derivative()(r))
    V = np.asarray(problem.V(r), dtype=float)
    if np.any(V <= 0) or not np.all(np.isfinite(V)):
        raise MeasureError("radial potential must be positive and finite on (0, r_max]")
    w = wq * r**2
    S = (B * w[:, None]).T @ B
    U = (B * (w * V)[:, None]).T @ B
    return RadialForms(r=r, w=w, V=V, B=B, dB=dB, S=0.5 * (S + S.T), U=0.5 * (U + U.T))


@dataclass
class RadialResult:
    lambda1: float
    coefficients: np.ndarray
    residual: float
    bound_state_found: bool
    history: list = field(default_factory=list)
    basis_size: int = 0
    overlap_condition: float = float("nan")
    knots: np.ndarray | None = None
    order: int = 6

    def profile(self, r) -> np.ndarray:
        """Upper-spinor radial profile f(r), normalized so int f^2 r^2 dr = 1."""
        k = self.order - 1
        c = np.concatenate([self.coefficients, [0.0]])
        return np.nan_to_num(BSpline(self.knots, c, k, extrapolate=False)(np.asarray(r, dtype=float)))

    def profile_derivative(self, r) -> np.ndarray:
        k = self.order - 1
        c = np.concatenate([self.coefficients, [0.0]])
        return np.nan_to_num(BSpline(self.knots, c, k, extrapolate=False).derivative()(np.asarray(r, dtype=float)))


def solve_radial(problem: RadialProblem, *, delta: float = 1e-6, tol: float = 1e-11,
                 overlap_threshold: float = 1e-14) -> RadialResult:
    """First eigenvalue lambda_1 in the kappa = -1 channel for a radial potential.

    The root is searched in the energy metric G = T(0) + S: the sign of the
    lowest eigenvalue of X^H A(lam) X matches the overlap-metric e1(lam), but
    the projected matrices stay well scaled on strongly graded knots.
    """
    forms = assemble_radial(problem)
    ortho = CanonicalOrthogonalizer(forms.S, overlap_threshold)
    energy = CanonicalOrthogonalizer(forms.kinetic(0.0) + forms.S, overlap_threshold)

    def e1(lam: float) -> float:
        return energy.lowest(forms.form(lam))[0]

    search = find_lambda1(e1, delta=delta, tol=tol)
    if search.bound_state_found:
        _, c = energy.lowest(forms.form(search.lambda1))
        c = np.real(c)
        c /= math.sqrt(c @ forms.S @ c)
        if c[np.argmax(np.abs(c))] < 0:
            c = -c
    else:
        c = np.zeros(forms.S.shape[0])
    return RadialResult(
        lambda1=search.lambda1,
        coefficients=c,
        residual=search.residual,
        bound_state_found=search.bound_state_found,
        history=search.history,
        basis_size=forms.S.shape[0],
        overlap_condition=ortho.condition,
        knots=problem.knots(),
        order=problem.order,
    )


def radial_lambda1(mu: ChargeDistribution, **kwargs) -> float:
    """lambda_1 of a radial measure, or 1.0 when no eigenvalue has emerged."""
    if total_mass(mu) <= 0:
        return 1.0
    return solve_radial(RadialProblem.from_measure(mu, **kwargs)).lambda1


def radial_form_value(V: Callable, f: Callable, fprime: Callable, lam: float,
                      r_min: float = 1e-12, r_max: float = 60.0, n_intervals: int = 400,
                      npts: int = 16, breakpoints: Sequence[float] = ()) -> float:
    """q_lam(f) of a radial profile by composite Gauss-Legendre on geometric intervals."""
    br = np.unique(np.concatenate([[0.0], np.geomspace(r_min, r_max, n_intervals + 1), list(breakpoints)]))
    r, wq = _gauss_nodes(br, npts)
    v = V(r)
    integrand = fprime(r) ** 2 / (1.0 + lam + v) + (1.0 - lam - v) * f(r) ** 2
    return float(np.sum(wq * r**2 * integrand))


def reduction_consistency_check(f: Callable, fprime: Callable, mu: ChargeDistribution, lam: float,
                                grid=None) -> tuple[float, float]:
    """(radial q_lam(f), 3D q_lam(phi)) for phi(x) = f(|x|) e_up / sqrt(4 pi).

    The 1/sqrt(4 pi) makes int |phi|^2 dx = int f^2 r^2 dr, so the two numbers
    should coincide.  The 3D side goes through the full machinery: sigma . grad phi from the Pauli
    matrices, V_mu from the measure and a multicenter grid centred at 0.
    """
    from .measures import potential
    from .quadrature import GridSpec, build_multicenter_grid
    from .spinors import sigma_dot, spin_vector

    if not mu.is_radial():
        raise MeasureError("reduction check needs a measure centred at the origin")
    grid = grid or build_multicenter_grid([(0.0, 0.0, 0.0)], GridSpec.level(3, r_max=60.0))
    bps = sorted({b.radius for b in mu.balls})
    radial_q = radial_form_value(lambda r: radial_potential(mu, r) if not mu.is_empty else 0.0 * r,
                                 f, fprime, lam, breakpoints=bps)
    x = grid.points
    r = np.linalg.norm(x, axis=1)
    grad = (fprime(r) / r)[:, None] * x
    sgp = sigma_dot(grad) @ spin_vector(1)
    phi2 = f(r) ** 2
    V = potential(mu, x) if not mu.is_empty else np.zeros(len(r))
    integrand = np.sum(np.abs(sgp) ** 2, axis=1) / (1.0 + lam + V) + (1.0 - lam - V) * phi2
    return radial_q, float(np.sum(grid.weights * integrand)) / (4.0 * math.pi)
