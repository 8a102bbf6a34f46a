"""Dense complex linear algebra for small Hermitian systems.

Everything here operates on full 2^Q x 2^Q complex matrices (Q <= 4), so
LAPACK's Hermitian eigensolver is used throughout.  Propagators and their
directional derivatives are computed in the eigenbasis; the derivative of
the matrix exponential uses the divided-difference (Loewner) formula with
an analytic limit for (near-)degenerate eigenvalue pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Default numerical tolerances, overridable by tests."""

    hermiticity: float = 1e-12
    state_norm: float = 1e-10
    eig_reconstruction: float = 1e-9
    unitarity: float = 1e-10
    degenerate_gap: float = 1e-10
    # wider switch point for second divided differences, where straight
    # evaluation loses ~gap worth of significant digits
    degenerate_gap_second: float = 1e-6
    prob_clip: float = 1e-12


TOL = Tolerances()


class LinalgError(ValueError):
    """Raised on malformed matrix input."""


class EigensolverError(RuntimeError):
    """Raised when the Hermitian eigensolver fails to converge."""


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # real, ascending
    eigenvectors: np.ndarray  # unitary, columns


def _as_square(a, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LinalgError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinalgError(f"{name} contains non-finite entries")
    return a


def hermitian_from_parts(sym, antisym, tol: float = TOL.hermiticity) -> np.ndarray:
    """Build H = sym + i*antisym from a symmetric and an antisymmetric real matrix."""
    sym = _as_square(np.asarray(sym, dtype=float), "sym")
    antisym = _as_square(np.asarray(antisym, dtype=float), "antisym")
    if sym.shape != antisym.shape:
        raise LinalgError(f"dimension mismatch: {sym.shape} vs {antisym.shape}")
    if np.max(np.abs(sym - sym.T), initial=0.0) > tol:
        raise LinalgError("sym part is not symmetric")
    if np.max(np.abs(antisym + antisym.T), initial=0.0) > tol:
        raise LinalgError("antisym part is not antisymmetric")
    return sym + 1j * antisym


def check_hermitian(H, tol: float = TOL.hermiticity) -> np.ndarray:
    H = _as_square(np.asarray(H, dtype=complex), "H")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > tol:
        raise LinalgError("matrix is not Hermitian")
    return H


def eig_hermitian(H) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    H = check_hermitian(H)
    try:
        w, v = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails here
        scale = np.linalg.norm(H)
        raise EigensolverError(
            f"eigh failed to converge (dim={H.shape[0]}, frobenius norm={scale:.3e}): {exc}"
        ) from exc
    return EigenDecomposition(w, v)


def propagator(H, T: float) -> np.ndarray:
    """Unitary e^{-iHT} via eigendecomposition."""
    w, v = eig_hermitian(H)
    phase = np.exp(-1j * w * T)
    return (v * phase) @ v.conj().T


def evolve_unitary(H, T: float, psi0) -> np.ndarray:
    """Apply e^{-iHT} to a state vector."""
    if T < 0:
        raise LinalgError("duration T must be non-negative")
    psi0 = np.asarray(psi0, dtype=complex)
    w, v = eig_hermitian(H)
    if psi0.shape != (w.size,):
        raise LinalgError(f"state has length {psi0.shape}, expected ({w.size},)")
    phase = np.exp(-1j * w * T)
    return v @ (phase * (v.conj().T @ psi0))


def loewner_matrix(w: np.ndarray, T: float, gap: float = TOL.degenerate_gap) -> np.ndarray:
    """Divided differences of f(x) = e^{-ixT} over an eigenvalue vector.

    Entry (i, j) is (f(w_i) - f(w_j)) / (w_i - w_j), with the limit
    -iT e^{-i w_i T} when |w_i - w_j| < gap.  Supports a batch of
    eigenvalue vectors in the leading dimensions.
    """
    w = np.asarray(w, dtype=float)
    f = np.exp(-1j * w * T)
    num = f[..., :, None] - f[..., None, :]
    den = w[..., :, None] - w[..., None, :]
    degenerate = np.abs(den) < gap
    safe_den = np.where(degenerate, 1.0, den)
    limit = -1j * T * f[..., :, None] * np.ones_like(den)
    return np.where(degenerate, limit, num / safe_den)


def second_divided_difference(
    w: np.ndarray, T: float, gap: float = TOL.degenerate_gap_second
) -> np.ndarray:
    """Second divided differences f[w_i, w_l, w_j] of f(x) = e^{-ixT}.

    Returns a (..., n, n, n) tensor indexed [i, l, j].  Near-degenerate
    arguments switch to the analytic confluent limits to avoid
    cancellation.  Supports batched eigenvalue vectors.
    """
    w = np.asarray(w, dtype=float)
    f = np.exp(-1j * w * T)
    fp = -1j * T * f
    fpp = (-1j * T) ** 2 * f

    x = w[..., :, None, None]  # i
    y = w[..., None, :, None]  # l
    z = w[..., None, None, :]  # j
    fx = f[..., :, None, None]
    fy = f[..., None, :, None]
    fz = f[..., None, None, :]
    fpx = fp[..., :, None, None]
    fppx = fpp[..., :, None, None]

    dxz = x - z
    dxy = x - y
    dyz = y - z

    # generic: (f[x,y] - f[y,z]) / (x - z)
    safe_dxy = np.where(np.abs(dxy) < gap, 1.0, dxy)
    safe_dyz = np.where(np.abs(dyz) < gap, 1.0, dyz)
    fxy = np.where(np.abs(dxy) < gap, fpx, (fx - fy) / safe_dxy)
    fyz = np.where(np.abs(dyz) < gap, fp[..., None, :, None], (fy - fz) / safe_dyz)
    safe_dxz = np.where(np.abs(dxz) < gap, 1.0, dxz)
    generic = (fxy - fyz) / safe_dxz

    # x ~= z, y distinct: limit (f'(x)(x-y) - f(x) + f(y)) / (x-y)^2
    confluent_xz = (fpx * dxy - fx + fy) / np.where(np.abs(dxy) < gap, 1.0, dxy) ** 2

    # all three coincide: f''(x)/2
    triple = np.broadcast_to(fppx / 2.0, generic.shape)

    out = np.where(np.abs(dxz) < gap, np.where(np.abs(dxy) < gap, triple, confluent_xz), generic)
    return out


def dexp_frechet(H, T: float, dH, gap: float = TOL.degenerate_gap) -> np.ndarray:
    """Directional derivative of e^{-iHT} along a Hermitian direction dH."""
    dH = check_hermitian(dH)
    w, v = eig_hermitian(H)
    if dH.shape != v.shape:
        raise LinalgError(f"dimension mismatch: {v.shape} vs {dH.shape}")
    phi = loewner_matrix(w, T, gap=gap)
    c = v.conj().T @ dH @ v
    return v @ (phi * c) @ v.conj().T
