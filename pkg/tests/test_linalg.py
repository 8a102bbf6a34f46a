"""Eigensolver wrappers, propagators, and Frechet derivatives."""

import numpy as np
import pytest
from scipy.linalg import expm

from steady.linalg import (
    LinalgError,
    dexp_frechet,
    eig_hermitian,
    evolve_unitary,
    hermitian_from_parts,
    propagator,
)


def random_hermitian(n, rng):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def test_eig_reconstructs():
    rng = np.random.default_rng(3)
    for n in (2, 4, 8):
        H = random_hermitian(n, rng)
        w, v = eig_hermitian(H)
        assert np.allclose(v @ np.diag(w) @ v.conj().T, H, atol=1e-12)
        assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-12)


def test_eigenvalues_match_lapack():
    rng = np.random.default_rng(4)
    H = random_hermitian(6, rng)
    w, _ = eig_hermitian(H)
    assert np.allclose(w, np.linalg.eigvalsh(H))


def test_propagator_vs_expm():
    rng = np.random.default_rng(5)
    H = random_hermitian(5, rng)
    for T in (0.1, 1.0, 3.7):
        U = propagator(H, T)
        assert np.allclose(U, expm(-1j * T * H), atol=1e-12)


def test_propagator_unitary():
    rng = np.random.default_rng(6)
    H = random_hermitian(8, rng)
    U = propagator(H, 2.3)
    assert np.max(np.abs(U @ U.conj().T - np.eye(8))) < 1e-12


def test_evolve_unitary_norm():
    rng = np.random.default_rng(7)
    H = random_hermitian(4, rng)
    psi0 = np.zeros(4, dtype=complex)
    psi0[0] = 1.0
    psi = evolve_unitary(H, 1.0, psi0)
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-12


def test_hermitian_from_parts():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((5, 5))
    sym = 0.5 * (a + a.T)
    b = rng.standard_normal((5, 5))
    antisym = 0.5 * (b - b.T)
    H = hermitian_from_parts(sym, antisym)
    assert np.allclose(H, H.conj().T)
    assert np.allclose(H.real, sym)
    assert np.allclose(H.imag, antisym)


def test_hermitian_from_parts_rejects_bad_input():
    with pytest.raises(LinalgError):
        hermitian_from_parts(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((2, 2)))


def test_frechet_vs_expm_difference():
    """dexp along dH matches the directional difference quotient of expm."""
    rng = np.random.default_rng(9)
    H = random_hermitian(4, rng)
    dH = random_hermitian(4, rng)
    T = 1.3
    got = dexp_frechet(H, T, dH)
    h = 1e-6
    fd = (expm(-1j * T * (H + h * dH)) - expm(-1j * T * (H - h * dH))) / (2 * h)
    assert np.max(np.abs(got - fd)) < 1e-7


def test_frechet_degenerate_spectrum():
    """Repeated eigenvalues must not blow up the divided differences."""
    rng = np.random.default_rng(10)
    w = np.array([1.0, 1.0, 2.0, 2.0])
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    H = q @ np.diag(w) @ q.conj().T
    dH = random_hermitian(4, rng)
    got = dexp_frechet(H, 0.8, dH)
    h = 1e-6
    fd = (expm(-1j * 0.8 * (H + h * dH)) - expm(-1j * 0.8 * (H - h * dH))) / (2 * h)
    assert np.max(np.abs(got - fd)) < 1e-7


def test_frechet_linearity():
    rng = np.random.default_rng(11)
    H = random_hermitian(3, rng)
    d1 = random_hermitian(3, rng)
    d2 = random_hermitian(3, rng)
    lhs = dexp_frechet(H, 1.0, 2.0 * d1 + 0.5 * d2)
    rhs = 2.0 * dexp_frechet(H, 1.0, d1) + 0.5 * dexp_frechet(H, 1.0, d2)
    assert np.max(np.abs(lhs - rhs)) < 1e-12
