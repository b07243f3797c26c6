"""Symmetric-definite pencils and the lambda root search shared by both backends.

For a Galerkin space with overlap S, potential form U and weighted kinetic
form T(lam), the reduced form is A(lam) = T(lam) + (1 - lam) S - U.  The first
eigenvalue lambda_1 is the root of e1(lam) = min eig(A(lam), S), which is
strictly decreasing in lam on (-1, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import brentq

from .errors import GapBottomError, SolverError


class CanonicalOrthogonalizer:
    """Maps a possibly near-singular overlap onto an orthonormal subspace.

    The overlap is first scaled to unit diagonal, then eigen-directions with
    eigenvalue below ``threshold`` are dropped.
    """

    def __init__(self, S: np.ndarray, threshold: float = 1e-10):
        S = 0.5 * (S + S.conj().T)
        d = np.real(np.diag(S)).copy()
        if np.any(d <= 0) or not np.all(np.isfinite(S)):
            raise SolverError("overlap matrix has non-positive diagonal or non-finite entries")
        self.scale = 1.0 / np.sqrt(d)
        Sn = S * np.outer(self.scale, self.scale)
        s, V = np.linalg.eigh(Sn)
        if s[-1] <= 0:
            raise SolverError("overlap matrix is not positive definite")
        keep = s > threshold * s[-1]
        self.overlap_eigenvalues = s
        self.condition = float(s[-1] / s[0]) if s[0] > 0 else float("inf")
        self.n_dropped = int(np.count_nonzero(~keep))
        self.X = (V[:, keep] / np.sqrt(s[keep])) * self.scale[:, None]

    @property
    def rank(self) -> int:
        return self.X.shape[1]

    def project(self, A: np.ndarray) -> np.ndarray:
        Ap = self.X.conj().T @ A @ self.X
        return 0.5 * (Ap + Ap.conj().T)

    def lowest(self, A: np.ndarray) -> tuple[float, np.ndarray]:
        """Smallest generalized eigenvalue of (A, S) and its coefficient vector."""
        Ap = self.project(A)
        try:
            w, v = eigh(Ap, subset_by_index=[0, 0])
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"eigensolver failed (overlap condition {self.condition:.3e})") from exc
        return float(w[0]), self.X @ v[:, 0]


def generalized_lowest(H: np.ndarray, M: np.ndarray, threshold: float = 1e-10) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue of H w = theta M w for Hermitian H and positive M."""
    return CanonicalOrthogonalizer(M, threshold).lowest(H)


@dataclass
class RootSearch:
    """Outcome of the lambda_1 root search."""

    lambda1: float
    bound_state_found: bool
    residual: float
    history: list[tuple[float, float]] = field(default_factory=list)


def find_lambda1(e1: Callable[[float], float], delta: float = 1e-6, tol: float = 1e-9) -> RootSearch:
    """Locate the unique root of the decreasing function e1 on (-1+delta, 1-delta).

    Brent's method combines the bisection bracket with secant/inverse-quadratic
    steps, so the bracket is never lost.
    """
    history: list[tuple[float, float]] = []

    def f(lam: float) -> float:
        val = e1(lam)
        if not np.isfinite(val):
            raise SolverError(f"non-finite form eigenvalue at lambda={lam}")
        history.append((lam, val))
        return val

    lo, hi = -1.0 + delta, 1.0 - delta
    f_hi = f(hi)
    if f_hi > 0.0:
        return RootSearch(1.0, False, abs(f_hi), history)
    f_lo = f(lo)
    if f_lo < 0.0:
        raise GapBottomError("eigenvalue at or below gap bottom: e1(-1+delta) < 0")
    root = brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
    res = abs(f(root))
    return RootSearch(float(root), True, res, history)
