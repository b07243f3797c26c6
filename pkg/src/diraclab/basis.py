"""Even-tempered Gaussian 2-spinor basis and closed-form overlaps.

A spatial primitive is (x - A)_k^l exp(-a |x - A|^2) with l = 0 (s) or l = 1
(p_x, p_y, p_z); it is paired with a constant spin vector e_1 or e_2.
Primitives are left unnormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError

ANGULAR = ("s", "px", "py", "pz")
# a|x-A|^2 beyond this is treated as exactly zero (12 standard deviations)
TAIL_CUTOFF = 144.0


@dataclass(frozen=True)
class BasisFunction:
    center: tuple[float, float, float]
    exponent: float
    angular: str = "s"
    spin: int = 1

    def __post_init__(self):
        if not self.exponent > 0:
            raise ConfigError(f"Gaussian exponent must be positive, got {self.exponent}")
        if self.angular not in ANGULAR:
            raise ConfigError(f"angular label must be one of {ANGULAR}, got {self.angular!r}")
        if self.spin not in (1, 2):
            raise ConfigError(f"spin must be 1 or 2, got {self.spin}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def spatial(self) -> tuple:
        return (self.center, self.exponent, self.angular)


@dataclass(frozen=True)
class EvenTempered:
    a0: float = 0.02
    ratio: float = 2.8
    count: int = 14
    p_type: bool = False

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("even-tempered count must be >= 1")
        if not (self.a0 > 0 and self.ratio > 1):
            raise ConfigError("even-tempered parameters need a0 > 0 and ratio > 1")

    def exponents(self) -> np.ndarray:
        return self.a0 * self.ratio ** np.arange(self.count)


@dataclass
class BasisSet:
    """Spin-major ordered list: all spatial functions with spin 1, then spin 2."""

    spatial: list[tuple] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def functions(self) -> list[BasisFunction]:
        return [BasisFunction(c, a, l, s) for s in (1, 2) for (c, a, l) in self.spatial]

    def __len__(self) -> int:
        return 2 * len(self.spatial)

    @property
    def n_spatial(self) -> int:
        return len(self.spatial)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        centers = np.array([c for c, _, _ in self.spatial], dtype=float).reshape(-1, 3)
        exps = np.array([a for _, a, _ in self.spatial], dtype=float)
        kinds = np.array([ANGULAR.index(l) for _, _, l in self.spatial], dtype=int)
        return centers, exps, kinds

    def translated(self, shift) -> "BasisSet":
        s = np.asarray(shift, dtype=float)
        moved = [(tuple(float(v) for v in np.asarray(c) + s), a, l) for c, a, l in self.spatial]
        return BasisSet(moved, dict(self.provenance))

    def is_subset_of(self, other: "BasisSet") -> bool:
        return set(self.spatial) <= set(other.spatial)


def basis_from_centers(centers: Sequence, params: EvenTempered) -> BasisSet:
    spatial: list[tuple] = []
    seen = set()
    labels = ANGULAR if params.p_type else ("s",)
    for c in centers:
        c = tuple(float(v) for v in c)
        for a in params.exponents():
            for lab in labels:
                key = (c, float(a), lab)
                if key not in seen:
                    seen.add(key)
                    spatial.append(key)
    prov = {"a0": params.a0, "ratio": params.ratio, "count": params.count, "p_type": params.p_type,
            "centers": [list(map(float, c)) for c in centers]}
    return BasisSet(spatial, prov)


def _pair_arrays(basis: BasisSet):
    C, a, k = basis.arrays()
    p = a[:, None] + a[None, :]
    P = (a[:, None, None] * C[:, None, :] + a[None, :, None] * C[None, :, :]) / p[..., None]
    d2 = np.sum((C[:, None, :] - C[None, :, :]) ** 2, axis=-1)
    K = np.exp(-a[:, None] * a[None, :] / p * d2)
    return C, a, k, p, P, K


def overlap_matrix(basis: BasisSet) -> np.ndarray:
    """Closed-form spatial overlap matrix of the primitives (Gaussian product rule)."""
    C, a, k, p, P, K = _pair_arrays(basis)
    I0 = (math.pi / p) ** 1.5 * K
    PA = P - C[:, None, :]  # (P - A_i)
    PB = P - C[None, :, :]  # (P - B_j)
    n = len(a)
    ki = np.broadcast_to(k[:, None], (n, n))
    kj = np.broadcast_to(k[None, :], (n, n))
    fi = np.where(ki > 0, np.take_along_axis(PA, np.clip(ki - 1, 0, 2)[..., None], axis=-1)[..., 0], 1.0)
    fj = np.where(kj > 0, np.take_along_axis(PB, np.clip(kj - 1, 0, 2)[..., None], axis=-1)[..., 0], 1.0)
    both = (ki > 0) & (kj > 0)
    S = I0 * fi * fj + np.where(both & (ki == kj), I0 / (2.0 * p), 0.0)
    return 0.5 * (S + S.T)


def _displacements(points: np.ndarray, C: np.ndarray, a: np.ndarray):
    d = points[:, None, :] - C[None, :, :]
    ar2 = a[None, :] * np.sum(d * d, axis=-1)
    g = np.where(ar2 < TAIL_CUTOFF, np.exp(-np.minimum(ar2, TAIL_CUTOFF)), 0.0)
    return d, g


def scalar_values(points: np.ndarray, functions) -> np.ndarray:
    """Values of the spatial primitives, shape (P, N)."""
    C, a, k = _unpack(functions)
    d, g = _displacements(points, C, a)
    poly = np.ones_like(g)
    for lab in (1, 2, 3):
        m = k == lab
        poly[:, m] = d[:, m, lab - 1]
    return poly * g


def scalar_gradients(points: np.ndarray, functions) -> np.ndarray:
    """Gradients of the spatial primitives, shape (P, N, 3)."""
    C, a, k = _unpack(functions)
    d, g = _displacements(points, C, a)
    poly = np.ones_like(g)
    for lab in (1, 2, 3):
        m = k == lab
        poly[:, m] = d[:, m, lab - 1]
    grad = (-2.0 * a[None, :, None]) * d * (poly * g)[..., None]
    for lab in (1, 2, 3):
        m = k == lab
        grad[:, m, lab - 1] += g[:, m]
    return grad


def _unpack(functions):
    if isinstance(functions, BasisSet):
        return functions.arrays()
    fl = list(functions)
    C = np.array([f.center for f in fl], dtype=float).reshape(-1, 3)
    a = np.array([f.exponent for f in fl], dtype=float)
    k = np.array([ANGULAR.index(f.angular) for f in fl], dtype=int)
    return C, a, k
