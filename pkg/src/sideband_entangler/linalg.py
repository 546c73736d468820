"""Dense complex kernel: Hermitian eigensolver, trace norm, PSD square root, RK4.

Matrices are plain 2-D ``numpy`` arrays (C order, complex128).
"""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .errors import NoConvergence, NotHermitian, NotPSD

HERMITIAN_TOL = 1e-10
OFFDIAG_TOL = 1e-12
MAX_SWEEPS = 100
PSD_CLIP = 1e-12
PSD_FAIL = 1e-9
# above this dimension the eigensolver defers to LAPACK (see ``hermitian_eigen``)
JACOBI_MAX_DIM = 64


class HermitianEigenResult(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def check_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    dev = np.max(np.abs(m - m.conj().T))
    if dev > tol:
        raise NotHermitian(f"max |M - M^dagger| = {dev:.3e} exceeds {tol:.0e}")


def _offdiag_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def jacobi_eigen(m, max_sweeps: int = MAX_SWEEPS, tol: float = OFFDIAG_TOL) -> HermitianEigenResult:
    """Cyclic complex Jacobi diagonalization of a Hermitian matrix.

    Each (p, q) rotation first removes the phase of ``a[p, q]`` and then applies
    the classical real Jacobi rotation. Converged when the off-diagonal Frobenius
    norm drops below ``tol * max(1, ||M||_F)``.
    """
    a = as_matrix(m)
    check_hermitian(a)
    n = a.shape[0]
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))

    for _ in range(max_sweeps + 1):
        if _offdiag_norm(a) < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                diff = a[q, q].real - a[p, p].real
                # rotation angle below 1e-16: dropping the entry is exact to round-off
                if mag < 1e-300 or abs(diff) > 1e16 * mag:
                    a[p, q] = a[q, p] = 0.0
                    continue
                phase = apq / mag
                tau = diff / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                g = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                cols = a[:, [p, q]] @ g
                a[:, p], a[:, q] = cols[:, 0], cols[:, 1]
                rows = g.conj().T @ a[[p, q], :]
                a[p, :], a[q, :] = rows[0], rows[1]
                a[p, q] = a[q, p] = 0.0
                vc = v[:, [p, q]] @ g
                v[:, p], v[:, q] = vc[:, 0], vc[:, 1]
    else:
        raise NoConvergence(
            f"off-diagonal norm {_offdiag_norm(a):.3e} after {max_sweeps} sweeps"
        )

    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return HermitianEigenResult(w[order], v[:, order])


def hermitian_eigen(m, method: str = "auto") -> HermitianEigenResult:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    ``method`` is ``"jacobi"``, ``"lapack"`` or ``"auto"`` (Jacobi up to
    ``JACOBI_MAX_DIM``, LAPACK ``zheevd`` beyond; the pure-Python rotation loop
    is too slow for the few-hundred-dimensional partial transposes).
    """
    a = as_matrix(m)
    if method == "auto":
        method = "jacobi" if a.shape[0] <= JACOBI_MAX_DIM else "lapack"
    if method == "jacobi":
        return jacobi_eigen(a)
    if method == "lapack":
        check_hermitian(a)
        w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
        return HermitianEigenResult(w, v)
    raise ValueError(f"unknown eigen method {method!r}")


def hermitian_eigvals(m, method: str = "auto") -> np.ndarray:
    a = as_matrix(m)
    if method == "auto" and a.shape[0] > JACOBI_MAX_DIM:
        check_hermitian(a)
        return np.linalg.eigvalsh(0.5 * (a + a.conj().T))
    return hermitian_eigen(a, method).eigenvalues


def trace_norm_hermitian(m, method: str = "auto") -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    return float(np.sum(np.abs(hermitian_eigvals(m, method))))


def matrix_sqrt_psd(m, method: str = "auto") -> np.ndarray:
    a = as_matrix(m)
    w, v = hermitian_eigen(a, method)
    if w[0] < -PSD_FAIL:
        raise NotPSD(f"minimum eigenvalue {w[0]:.3e} below {-PSD_FAIL:.0e}")
    w = np.where(w < PSD_CLIP, np.clip(w, 0.0, None), w)
    s = (v * np.sqrt(w)) @ v.conj().T
    return 0.5 * (s + s.conj().T)


def rk4_step(
    deriv: Callable[[float, np.ndarray], np.ndarray],
    psi: np.ndarray,
    t: float,
    h: float,
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of ``dpsi/dt = deriv(t, psi)``.

    ``psi`` may be a vector or a matrix of column states.
    """
    k1 = deriv(t, psi)
    k2 = deriv(t + 0.5 * h, psi + 0.5 * h * k1)
    k3 = deriv(t + 0.5 * h, psi + 0.5 * h * k2)
    k4 = deriv(t + h, psi + h * k3)
    return psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
