"""Pauli and Dirac matrices (standard representation) and sigma . grad on the basis."""

from __future__ import annotations

import numpy as np

from .basis import BasisFunction, scalar_gradients

_I2 = np.eye(2, dtype=complex)
_Z2 = np.zeros((2, 2), dtype=complex)

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
BETA = np.block([[_I2, _Z2], [_Z2, -_I2]])
ALPHA = np.array([np.block([[_Z2, s], [s, _Z2]]) for s in PAULI])


def _check_index(k: int) -> int:
    if k not in (1, 2, 3):
        raise IndexError(f"matrix index must be 1, 2 or 3, got {k!r}")
    return k - 1


def pauli(k: int) -> np.ndarray:
    return PAULI[_check_index(k)].copy()


def alpha(k: int) -> np.ndarray:
    return ALPHA[_check_index(k)].copy()


def beta() -> np.ndarray:
    return BETA.copy()


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def clifford_residuals() -> dict[str, float]:
    """Max-norm deviation of every anticommutation relation of the Dirac matrices."""
    out = {}
    for k in range(3):
        for l in range(k, 3):
            target = 2.0 * np.eye(4) if k == l else np.zeros((4, 4))
            out[f"alpha{k + 1}alpha{l + 1}"] = float(np.max(np.abs(anticommutator(ALPHA[k], ALPHA[l]) - target)))
        out[f"alpha{k + 1}beta"] = float(np.max(np.abs(anticommutator(ALPHA[k], BETA))))
    out["beta2"] = float(np.max(np.abs(BETA @ BETA - np.eye(4))))
    return out


def spin_vector(spin: int) -> np.ndarray:
    if spin not in (1, 2):
        raise IndexError(f"spin component must be 1 or 2, got {spin!r}")
    return _I2[spin - 1]


def sigma_dot(grad: np.ndarray) -> np.ndarray:
    """sigma . g for real vectors g of shape (..., 3); returns (..., 2, 2)."""
    return np.einsum("...k,kab->...ab", grad, PAULI)


def sigma_grad_basis(b: BasisFunction, x) -> np.ndarray:
    """(sigma . grad phi_b)(x) for a Gaussian 2-spinor basis function.

    Returns a complex array of shape (2,) for a single point or (P, 2).
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    grad = scalar_gradients(np.atleast_2d(pts), [b])[:, 0, :]  # (P, 3)
    out = sigma_dot(grad) @ spin_vector(b.spin)
    return out[0] if single else out
