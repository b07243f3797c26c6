"""Radial and multicenter (Becke-partitioned) integration grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from scipy.interpolate import CubicSpline
from scipy.special import sph_harm_y

import numpy as np
from scipy.integrate import lebedev_rule

from .errors import ConfigError, IntegrationError

# Lebedev point count -> polynomial degree
LEBEDEV_ORDERS = {50: 11, 110: 17, 194: 23, 302: 29, 434: 35, 590: 41}
BECKE_ITERATIONS = 3


@dataclass(frozen=True)
class RadialGrid:
    """Nodes and weights for int_0^r_max f(r) r^2 dr."""

    r: np.ndarray
    weights: np.ndarray
    r_max: float
    mapping: str

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.sum(self.weights * f(self.r)))


def build_radial_grid(n: int, r_max: float, mapping: str = "log", *, r_min: float = 1e-10,
                      alpha: float = 1.0, panel: int = 20) -> RadialGrid:
    """Radial grid clustered at r = 0.

    ``log``: composite Gauss-Legendre panels in u = ln r over [ln r_min, ln r_max].
    Integrands like r^(2 gamma) stay analytic in u, which keeps the rule
    spectrally accurate down to gamma ~ 0.14.

    ``algebraic``: r = alpha t / (1 - t) with Gauss-Legendre nodes in t,
    truncated to [0, r_max].
    """
    if n < 16:
        raise ConfigError("radial grid needs n >= 16")
    if not r_max > 0:
        raise ConfigError("r_max must be positive")
    if mapping == "log":
        if not 0 < r_min < r_max:
            raise ConfigError("need 0 < r_min < r_max")
        npanel = max(1, n // panel)
        x, wx = np.polynomial.legendre.leggauss(panel)
        edges = np.linspace(math.log(r_min), math.log(r_max), npanel + 1)
        a, b = edges[:-1, None], edges[1:, None]
        u = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
        wu = (0.5 * (b - a) * wx).ravel()
        r = np.exp(u)
        w = wu * r**3
    elif mapping == "algebraic":
        if not alpha > 0:
            raise ConfigError("alpha must be positive")
        t_max = r_max / (alpha + r_max)
        s, ws = np.polynomial.legendre.leggauss(n)
        t = 0.5 * t_max * (s + 1.0)
        wt = 0.5 * t_max * ws
        r = alpha * t / (1.0 - t)
        w = wt * alpha / (1.0 - t) ** 2 * r**2
        order = np.argsort(r)
        r, w = r[order], w[order]
    else:
        raise ConfigError(f"unknown radial mapping {mapping!r}")
    return RadialGrid(r=r, weights=w, r_max=float(r_max), mapping=mapping)


@dataclass(frozen=True)
class GridSpec:
    """Parameters of a multicenter grid."""

    n_radial: int = 240
    r_min: float = 1e-8
    r_max: float = 80.0
    angular: int = 194
    mapping: str = "log"

    def __post_init__(self):
        if self.angular not in LEBEDEV_ORDERS:
            raise ConfigError(f"angular order must be one of {sorted(LEBEDEV_ORDERS)}")

    @classmethod
    def level(cls, level: int, **overrides) -> "GridSpec":
        presets = {1: dict(n_radial=160, angular=110), 2: dict(n_radial=240, angular=194),
                   3: dict(n_radial=320, angular=302)}
        if level not in presets:
            raise ConfigError("grid level must be 1, 2 or 3")
        return cls(**{**presets[level], **overrides})


@dataclass(frozen=True)
class MulticenterGrid:
    """Atom-centred spherical product grids blended by a Becke partition of unity.

    Points are ordered by owner centre, then radial shell, then angular node.
    ``weights`` already include the partition factor of the owner.
    """

    points: np.ndarray
    weights: np.ndarray
    owner: np.ndarray
    centers: np.ndarray
    radial: RadialGrid
    angular_points: np.ndarray
    angular_weights: np.ndarray
    partition: np.ndarray  # owner's partition factor per point
    spec: GridSpec

    @property
    def size(self) -> int:
        return len(self.weights)

    def translated(self, shift) -> "MulticenterGrid":
        s = np.asarray(shift, dtype=float)
        return MulticenterGrid(self.points + s, self.weights, self.owner, self.centers + s, self.radial,
                               self.angular_points, self.angular_weights, self.partition, self.spec)


def _becke_step(mu: np.ndarray) -> np.ndarray:
    for _ in range(BECKE_ITERATIONS):
        mu = 1.5 * mu - 0.5 * mu**3
    return 0.5 * (1.0 - mu)


def becke_partition(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Normalized Becke cell functions, shape (P, M); rows sum to one."""
    M = len(centers)
    if M == 1:
        return np.ones((len(points), 1))
    dist = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=-1)
    Rab = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    cell = np.ones((len(points), M))
    for i in range(M):
        for j in range(M):
            if i != j:
                cell[:, i] *= _becke_step((dist[:, i] - dist[:, j]) / Rab[i, j])
    return cell / np.sum(cell, axis=1, keepdims=True)


def build_multicenter_grid(centers: Sequence, spec: GridSpec | None = None) -> MulticenterGrid:
    spec = spec or GridSpec()
    C = np.asarray(centers, dtype=float).reshape(-1, 3)
    if len(C) == 0:
        raise ConfigError("multicenter grid needs at least one centre")
    for i in range(len(C)):
        for j in range(i):
            if np.array_equal(C[i], C[j]):
                raise ConfigError(f"identical grid centres {C[i].tolist()}")
    extent = float(np.max(np.abs(C)))
    if spec.mapping == "log" and spec.r_min < 1e-13 * extent:
        # nodes closer than this to a centre round onto the centre itself
        raise ConfigError(f"r_min={spec.r_min:g} is below the coordinate resolution of centres at |x|~{extent:g}")
    rad = build_radial_grid(spec.n_radial, spec.r_max, spec.mapping, r_min=spec.r_min)
    xyz, wang = lebedev_rule(LEBEDEV_ORDERS[spec.angular])
    xyz = xyz.T
    pts, wts, own = [], [], []
    for ic, c in enumerate(C):
        p = c[None, None, :] + rad.r[:, None, None] * xyz[None, :, :]
        pts.append(p.reshape(-1, 3))
        wts.append((rad.weights[:, None] * wang[None, :]).ravel())
        own.append(np.full(p.shape[0] * p.shape[1], ic))
    points = np.concatenate(pts)
    owner = np.concatenate(own)
    part = becke_partition(points, C)[np.arange(len(points)), owner]
    weights = np.concatenate(wts) * part
    return MulticenterGrid(points, weights, owner, C, rad, xyz, wang, part, spec)


def _check_finite(values: np.ndarray, points: np.ndarray) -> None:
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise IntegrationError(f"non-finite integrand at grid point {points[idx[0]].tolist()}")


def integrate(f: Callable[[np.ndarray], np.ndarray], grid: MulticenterGrid) -> float | np.ndarray:
    """Weighted grid sum of f(points); f may return shape (P,) or (P, ...)."""
    vals = np.asarray(f(grid.points))
    _check_finite(vals, grid.points)
    w = grid.weights.reshape((-1,) + (1,) * (vals.ndim - 1))
    out = np.sum(w * vals, axis=0)
    return float(out) if np.ndim(out) == 0 else out


def integrate_products(grid: MulticenterGrid, left: np.ndarray, right: np.ndarray,
                       weight: np.ndarray | None = None) -> np.ndarray:
    """Matrix M_ij = sum_p w_p g_p left[p, i] right[p, j] over the grid."""
    w = grid.weights if weight is None else grid.weights * weight
    _check_finite(w, grid.points)
    return (left * w[:, None]).T @ right


def real_spherical_harmonics(lmax: int, xyz: np.ndarray) -> np.ndarray:
    """Orthonormal real harmonics Y_lm on unit vectors, shape (P, (lmax+1)^2)."""
    z = np.clip(xyz[:, 2], -1.0, 1.0)
    theta = np.arccos(z)
    phi = np.arctan2(xyz[:, 1], xyz[:, 0])
    out = []
    for l in range(lmax + 1):
        for m in range(-l, l + 1):
            y = sph_harm_y(l, abs(m), theta, phi)
            if m > 0:
                out.append(math.sqrt(2.0) * y.real)
            elif m < 0:
                out.append(math.sqrt(2.0) * y.imag)
            else:
                out.append(y.real)
    return np.stack(out, axis=1)


def hartree_potential(grid: MulticenterGrid, rho: np.ndarray, points: np.ndarray, lmax: int = 8) -> np.ndarray:
    """(rho * 1/|.|)(x) by a multipole Poisson solve on each Becke cell.

    For every centre the partitioned density is projected on real harmonics
    shell by shell; the radial Green's-function integrals are spline
    antiderivatives in u = ln r.  Tiny inner shells are dropped for l >= 2,
    where the angular projection is pure roundoff amplified by r^(1-l).
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.size,):
        raise ConfigError("density must hold one value per grid point")
    _check_finite(rho, grid.points)
    lmax = min(lmax, (LEBEDEV_ORDERS[grid.spec.angular] - 1) // 2)
    r = grid.radial.r
    u = np.log(r)
    nr, na = len(r), len(grid.angular_weights)
    Yq = real_spherical_harmonics(lmax, grid.angular_points)  # (na, nlm)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    total = np.zeros(len(pts))
    for ic, c in enumerate(grid.centers):
        sel = grid.owner == ic
        dens = (rho[sel] * grid.partition[sel]).reshape(nr, na)
        rlm = (dens * grid.angular_weights[None, :]) @ Yq  # (nr, nlm)
        d = pts - c
        dist = np.linalg.norm(d, axis=1)
        safe = np.where(dist > 0, dist, 1.0)
        dirs = np.where(dist[:, None] > 0, d / safe[:, None], np.array([0.0, 0.0, 1.0]))
        Ye = real_spherical_harmonics(lmax, dirs)
        ue = np.clip(np.log(np.where(dist > 0, dist, r[0])), u[0], u[-1])
        for l in range(lmax + 1):
            cut = 0.0 if l < 2 else 10.0 ** (-14.0 / (l - 1))
            for m in range(-l, l + 1):
                k = l * l + l + m
                f = np.where(r >= cut, rlm[:, k], 0.0)
                if not np.any(f):
                    continue
                inner = CubicSpline(u, f * np.exp((l + 3) * u)).antiderivative()
                outer = CubicSpline(u, f * np.exp((2 - l) * u)).antiderivative()
                q_in = inner(ue) - inner(u[0])
                q_out = outer(u[-1]) - outer(ue)
                with np.errstate(divide="ignore", invalid="ignore"):
                    term = np.where(dist > 0, q_in / safe ** (l + 1), 0.0) + safe**l * q_out
                if l > 0:
                    term = np.where(dist > 0, term, 0.0)
                total += 4.0 * math.pi / (2 * l + 1) * term * Ye[:, k]
    return total
