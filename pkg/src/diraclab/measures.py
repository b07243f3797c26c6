"""Finite charge distributions and their Coulomb potentials.

A measure is a finite mixture of point charges (atoms), isotropic Gaussian
clouds and uniformly charged balls.  Natural units (m = c = hbar = 1) are used
everywhere; weights are dimensionless couplings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erf

from .errors import MeasureError, ScaleError, SingularPointError

Vec3 = tuple[float, float, float]

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def _vec3(pos: Iterable[float]) -> Vec3:
    v = tuple(float(c) for c in pos)
    if len(v) != 3 or not all(math.isfinite(c) for c in v):
        raise MeasureError(f"position must be a finite 3-vector, got {pos!r}")
    return v  # type: ignore[return-value]


@dataclass(frozen=True)
class PointCharge:
    position: Vec3
    weight: float

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position))
        w = float(self.weight)
        if not (0.0 < w < 1.0):
            raise MeasureError(f"atom weight must lie in (0, 1), got {w}")
        object.__setattr__(self, "weight", w)


@dataclass(frozen=True)
class GaussianCharge:
    """Isotropic Gaussian density of total charge `weight` and standard deviation `width`."""

    position: Vec3
    weight: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position))
        w, s = float(self.weight), float(self.width)
        if not w > 0.0:
            raise MeasureError(f"cloud weight must be positive, got {w}")
        if not s > 0.0:
            raise MeasureError(f"cloud width must be positive, got {s}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "width", s)


@dataclass(frozen=True)
class UniformBall:
    """Charge `weight` spread uniformly over a ball of the given radius."""

    position: Vec3
    weight: float
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position))
        w, r = float(self.weight), float(self.radius)
        if not w > 0.0:
            raise MeasureError(f"ball weight must be positive, got {w}")
        if not r > 0.0:
            raise MeasureError(f"ball radius must be positive, got {r}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "radius", r)


def _merge_atoms(atoms: Sequence[PointCharge]) -> tuple[PointCharge, ...]:
    merged: dict[Vec3, float] = {}
    for a in atoms:
        merged[a.position] = merged.get(a.position, 0.0) + a.weight
    # PointCharge re-validates the merged weight against the < 1 bound
    return tuple(PointCharge(p, w) for p, w in merged.items())


@dataclass(frozen=True)
class ChargeDistribution:
    """Non-negative finite measure made of atoms, Gaussian clouds and uniform balls.

    Atoms sharing a position are merged on construction.
    """

    atoms: tuple[PointCharge, ...] = ()
    clouds: tuple[GaussianCharge, ...] = ()
    balls: tuple[UniformBall, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "atoms", _merge_atoms(tuple(self.atoms)))
        object.__setattr__(self, "clouds", tuple(self.clouds))
        object.__setattr__(self, "balls", tuple(self.balls))

    # -- construction helpers -------------------------------------------------
    @classmethod
    def point(cls, weight: float, position: Iterable[float] = (0.0, 0.0, 0.0)) -> "ChargeDistribution":
        return cls(atoms=(PointCharge(tuple(position), weight),))

    @classmethod
    def from_atoms(cls, positions, weights) -> "ChargeDistribution":
        return cls(atoms=tuple(PointCharge(tuple(p), w) for p, w in zip(positions, weights)))

    @classmethod
    def ball(cls, weight: float, radius: float, position: Iterable[float] = (0.0, 0.0, 0.0)) -> "ChargeDistribution":
        return cls(balls=(UniformBall(tuple(position), weight, radius),))

    @classmethod
    def cloud(cls, weight: float, width: float, position: Iterable[float] = (0.0, 0.0, 0.0)) -> "ChargeDistribution":
        return cls(clouds=(GaussianCharge(tuple(position), weight, width),))

    def __add__(self, other: "ChargeDistribution") -> "ChargeDistribution":
        return ChargeDistribution(self.atoms + other.atoms, self.clouds + other.clouds, self.balls + other.balls)

    # -- basic quantities -----------------------------------------------------
    @property
    def components(self):
        return self.atoms + self.clouds + self.balls

    @property
    def is_empty(self) -> bool:
        return not self.components

    def centers(self) -> list[Vec3]:
        """Distinct component positions, atoms first, in insertion order."""
        out: list[Vec3] = []
        for c in self.components:
            if c.position not in out:
                out.append(c.position)
        return out

    def is_radial(self) -> bool:
        return all(c.position == (0.0, 0.0, 0.0) for c in self.components)

    def to_dict(self) -> dict:
        d: dict = {
            "atoms": [{"pos": list(a.position), "weight": a.weight} for a in self.atoms],
            "clouds": [{"pos": list(c.position), "weight": c.weight, "sigma": c.width} for c in self.clouds],
        }
        if self.balls:
            d["balls"] = [{"pos": list(b.position), "weight": b.weight, "radius": b.radius} for b in self.balls]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ChargeDistribution":
        if not isinstance(data, dict):
            raise MeasureError("measure specification must be a JSON object")
        unknown = set(data) - {"atoms", "clouds", "balls"}
        if unknown:
            raise MeasureError(f"unknown measure keys: {sorted(unknown)}")
        try:
            atoms = tuple(PointCharge(tuple(a["pos"]), a["weight"]) for a in data.get("atoms", []))
            clouds = tuple(GaussianCharge(tuple(c["pos"]), c["weight"], c["sigma"]) for c in data.get("clouds", []))
            balls = tuple(UniformBall(tuple(b["pos"]), b["weight"], b["radius"]) for b in data.get("balls", []))
        except (KeyError, TypeError) as exc:
            raise MeasureError(f"malformed measure entry: {exc!r}") from exc
        return cls(atoms, clouds, balls)


def load_measure(path: str | Path) -> ChargeDistribution:
    """Read a measure specification file (JSON)."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MeasureError(f"cannot read measure file {path}: {exc}") from exc
    return ChargeDistribution.from_dict(data)


@dataclass(frozen=True)
class SignedChargeDistribution:
    """Signed measure mu = mu_plus - mu_minus."""

    positive_part: ChargeDistribution
    negative_part: ChargeDistribution

    @property
    def nu_plus(self) -> float:
        return total_mass(self.positive_part)

    @property
    def nu_minus(self) -> float:
        return total_mass(self.negative_part)


# -- operations ---------------------------------------------------------------

def total_mass(mu: ChargeDistribution) -> float:
    return float(math.fsum(c.weight for c in mu.components))


def nu_max(mu: ChargeDistribution) -> float:
    """Largest atom weight; clouds and balls carry no atoms."""
    return max((a.weight for a in mu.atoms), default=0.0)


def _erf_over_r(r: np.ndarray, width: float) -> np.ndarray:
    """erf(r / (width*sqrt 2)) / r with its finite continuation at r = 0."""
    s = width * math.sqrt(2.0)
    z = r / s
    out = np.empty_like(r)
    small = z < 1e-3
    zs = z[small]
    out[small] = _TWO_OVER_SQRT_PI / s * (1.0 - zs**2 / 3.0 + zs**4 / 10.0 - zs**6 / 42.0)
    big = ~small
    out[big] = erf(z[big]) / r[big]
    return out


def _ball_potential(r: np.ndarray, weight: float, radius: float) -> np.ndarray:
    inside = weight * (3.0 * radius**2 - r**2) / (2.0 * radius**3)
    with np.errstate(divide="ignore"):
        outside = weight / r
    return np.where(r < radius, inside, outside)


def potential(mu: ChargeDistribution, x) -> np.ndarray | float:
    """Coulomb potential V = mu * 1/|x| at one point or an array of points.

    Parameters
    ----------
    mu : ChargeDistribution
    x : array_like, shape (3,) or (..., 3)

    Raises
    ------
    SingularPointError
        If a point coincides with an atom position.
    """
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    v = np.zeros(pts.shape[:-1])
    for a in mu.atoms:
        r = np.linalg.norm(pts - np.asarray(a.position), axis=-1)
        if np.any(r == 0.0):
            raise SingularPointError(f"potential evaluated at atom position {a.position}")
        v += a.weight / r
    for c in mu.clouds:
        r = np.linalg.norm(pts - np.asarray(c.position), axis=-1)
        v += c.weight * _erf_over_r(r, c.width)
    for b in mu.balls:
        r = np.linalg.norm(pts - np.asarray(b.position), axis=-1)
        v += _ball_potential(r, b.weight, b.radius)
    return float(v[0]) if scalar else v


def radial_potential(mu: ChargeDistribution, r) -> np.ndarray | float:
    """Potential of a measure centred at the origin as a function of |x|.

    By Newton's theorem V(r) = mu(B_r)/r + int_{|y|>r} dmu(y)/|y|; for atoms,
    Gaussian clouds and uniform balls this evaluates in closed form.
    """
    if not mu.is_radial():
        raise MeasureError("radial_potential needs every component centred at the origin")
    rr = np.asarray(r, dtype=float)
    scalar = rr.ndim == 0
    rr = np.atleast_1d(rr)
    if np.any(rr < 0):
        raise MeasureError("radius must be non-negative")
    v = np.zeros_like(rr)
    for a in mu.atoms:
        if np.any(rr == 0.0):
            raise SingularPointError("radial potential of an atom at r = 0")
        v += a.weight / rr
    for c in mu.clouds:
        v += c.weight * _erf_over_r(rr, c.width)
    for b in mu.balls:
        v += _ball_potential(rr, b.weight, b.radius)
    return float(v[0]) if scalar else v


def translate(mu: ChargeDistribution, a: Iterable[float]) -> ChargeDistribution:
    shift = np.asarray(_vec3(a))

    def mv(p):
        return tuple(float(c) for c in np.asarray(p) + shift)

    return ChargeDistribution(
        atoms=tuple(PointCharge(mv(x.position), x.weight) for x in mu.atoms),
        clouds=tuple(GaussianCharge(mv(x.position), x.weight, x.width) for x in mu.clouds),
        balls=tuple(UniformBall(mv(x.position), x.weight, x.radius) for x in mu.balls),
    )


def scale_mass(mu: ChargeDistribution, t: float) -> ChargeDistribution:
    """Return t*mu; refuses to create an atom of weight >= 1."""
    t = float(t)
    if not t > 0.0:
        raise ScaleError(f"scale factor must be positive, got {t}")
    if t * nu_max(mu) >= 1.0:
        raise ScaleError(f"scaled largest atom {t * nu_max(mu):.6g} would reach 1")
    return ChargeDistribution(
        atoms=tuple(PointCharge(x.position, t * x.weight) for x in mu.atoms),
        clouds=tuple(GaussianCharge(x.position, t * x.weight, x.width) for x in mu.clouds),
        balls=tuple(UniformBall(x.position, t * x.weight, x.radius) for x in mu.balls),
    )


def support_radius(mu: ChargeDistribution) -> float:
    """Radius of the smallest origin-centred ball holding all component centres
    (plus ball radii and 6 standard deviations for clouds)."""
    r = 0.0
    for a in mu.atoms:
        r = max(r, float(np.linalg.norm(a.position)))
    for c in mu.clouds:
        r = max(r, float(np.linalg.norm(c.position)) + 6.0 * c.width)
    for b in mu.balls:
        r = max(r, float(np.linalg.norm(b.position)) + b.radius)
    return r
