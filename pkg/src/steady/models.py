"""Parameterized dynamical models: (parameters, drive) -> Hamiltonian/Lindbladian.

Two Hamiltonian parametrizations are supported:

* linear mix: H(a) = sum_k a_k A_k over a fixed Hermitian operator basis,
  with a_k = sum_l alpha_kl d_l + beta_k;
* general: H_ij = h_ij + sum_k sigma_ijk d_k, Hermiticity enforced by
  splitting every matrix into a symmetric and an antisymmetric real part.

Forward prediction returns Born probabilities of the computational basis
starting from |0...0>.  Gradients with respect to all model parameters are
analytic: the unitary path differentiates the propagator in the eigenbasis
(divided differences), the Lindblad path integrates forward sensitivities
with the same RK4 stages as the state itself, so gradients are exact for
the discretized map.

All heavy routines are batched over pulses (leading axis B).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    TOL,
    LinalgError,
    check_hermitian,
    loewner_matrix,
    second_divided_difference,
)


class IntegrationError(RuntimeError):
    """Non-finite state encountered during master-equation integration."""


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class OperatorBasis:
    """Fixed list of Hermitian operators A_k with human-readable labels."""

    ops: np.ndarray  # (M, n, n) complex
    labels: tuple[str, ...]

    def __post_init__(self):
        ops = np.asarray(self.ops, dtype=complex)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise LinalgError(f"basis ops must have shape (M, n, n), got {ops.shape}")
        for k in range(ops.shape[0]):
            check_hermitian(ops[k])
        if len(self.labels) != ops.shape[0]:
            raise LinalgError("one label per operator required")
        object.__setattr__(self, "ops", ops)

    @property
    def size(self) -> int:
        return self.ops.shape[0]

    @property
    def dim(self) -> int:
        return self.ops.shape[1]


@dataclass(frozen=True)
class LinearMixParams:
    """Drive mixing matrix alpha (M x D) and drift vector beta (M)."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1 or beta.shape[0] != alpha.shape[0]:
            raise LinalgError(
                f"beta length {beta.shape} inconsistent with alpha shape {alpha.shape}"
            )
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
            raise LinalgError("non-finite parameter entries")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n_ops(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_drives(self) -> int:
        return self.alpha.shape[1]


@dataclass(frozen=True)
class GeneralParams:
    """Fully general drift + per-drive control Hamiltonians.

    h_sym/h_antisym are (n, n); sigma_sym/sigma_antisym are (n, n, D).
    The Hamiltonian is (h_sym + i h_antisym) + sum_k (sigma_sym_k + i sigma_antisym_k) d_k.
    """

    h_sym: np.ndarray
    h_antisym: np.ndarray
    sigma_sym: np.ndarray
    sigma_antisym: np.ndarray

    def __post_init__(self):
        hs = np.asarray(self.h_sym, dtype=float)
        ha = np.asarray(self.h_antisym, dtype=float)
        ss = np.asarray(self.sigma_sym, dtype=float)
        sa = np.asarray(self.sigma_antisym, dtype=float)
        n = hs.shape[0]
        if hs.shape != (n, n) or ha.shape != (n, n):
            raise LinalgError("h parts must be square and equally sized")
        if ss.ndim != 3 or ss.shape[:2] != (n, n) or sa.shape != ss.shape:
            raise LinalgError("sigma parts must have shape (n, n, D)")
        if np.max(np.abs(hs - hs.T), initial=0.0) > TOL.hermiticity:
            raise LinalgError("h_sym is not symmetric")
        if np.max(np.abs(ha + ha.T), initial=0.0) > TOL.hermiticity:
            raise LinalgError("h_antisym is not antisymmetric")
        if np.max(np.abs(ss - ss.transpose(1, 0, 2)), initial=0.0) > TOL.hermiticity:
            raise LinalgError("sigma_sym is not symmetric")
        if np.max(np.abs(sa + sa.transpose(1, 0, 2)), initial=0.0) > TOL.hermiticity:
            raise LinalgError("sigma_antisym is not antisymmetric")
        object.__setattr__(self, "h_sym", hs)
        object.__setattr__(self, "h_antisym", ha)
        object.__setattr__(self, "sigma_sym", ss)
        object.__setattr__(self, "sigma_antisym", sa)

    @property
    def dim(self) -> int:
        return self.h_sym.shape[0]

    @property
    def n_drives(self) -> int:
        return self.sigma_sym.shape[2]


@dataclass(frozen=True)
class LindbladParams:
    """Hamiltonian parameters plus fixed collapse operators with strengths c >= 0."""

    hamiltonian: LinearMixParams | GeneralParams
    collapse_ops: np.ndarray  # (C, n, n) complex
    strengths: np.ndarray  # (C,)

    def __post_init__(self):
        ops = np.asarray(self.collapse_ops, dtype=complex)
        c = np.asarray(self.strengths, dtype=float)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise LinalgError("collapse ops must have shape (C, n, n)")
        if c.shape != (ops.shape[0],):
            raise LinalgError("one strength per collapse operator required")
        if np.any(c < 0):
            raise LinalgError("collapse strengths must be non-negative")
        object.__setattr__(self, "collapse_ops", ops)
        object.__setattr__(self, "strengths", c)


@dataclass(frozen=True)
class ControlPulse:
    """Constant (D,) or piecewise-constant (Theta, D) drive amplitudes."""

    amplitudes: np.ndarray
    duration: float = 1.0

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=float)
        if amp.ndim not in (1, 2) or amp.size == 0:
            raise LinalgError(f"amplitudes must be (D,) or (Theta, D), got {amp.shape}")
        if not np.all(np.isfinite(amp)):
            raise LinalgError("non-finite pulse amplitudes")
        if self.duration <= 0:
            raise LinalgError("pulse duration must be positive")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def n_segments(self) -> int:
        return 1 if self.amplitudes.ndim == 1 else self.amplitudes.shape[0]


# ---------------------------------------------------------------------------
# flat parameter vector layout
#
# linear mix: [alpha row-major (M*D), beta (M), strengths (C)]
# general:    [h_sym upper triangle incl. diagonal (row-major),
#              h_antisym strict upper triangle,
#              per drive k: sigma_sym[:, :, k] upper, sigma_antisym[:, :, k] strict upper,
#              strengths (C)]


def pack_linear(params: LinearMixParams, strengths=None) -> np.ndarray:
    parts = [params.alpha.ravel(), params.beta]
    if strengths is not None:
        parts.append(np.asarray(strengths, dtype=float))
    return np.concatenate(parts)


def unpack_linear(vec, n_ops: int, n_drives: int, n_collapse: int = 0):
    vec = np.asarray(vec, dtype=float)
    expect = n_ops * (n_drives + 1) + n_collapse
    if vec.shape != (expect,):
        raise LinalgError(f"parameter vector has length {vec.shape}, expected ({expect},)")
    alpha = vec[: n_ops * n_drives].reshape(n_ops, n_drives)
    beta = vec[n_ops * n_drives : n_ops * (n_drives + 1)]
    params = LinearMixParams(alpha, beta)
    if n_collapse:
        return params, vec[-n_collapse:]
    return params


def _triangle_indices(n: int):
    iu = np.triu_indices(n)  # includes diagonal
    ius = np.triu_indices(n, k=1)  # strict
    return iu, ius


def _pack_sym(m: np.ndarray) -> np.ndarray:
    iu, _ = _triangle_indices(m.shape[0])
    return m[iu]


def _pack_antisym(m: np.ndarray) -> np.ndarray:
    _, ius = _triangle_indices(m.shape[0])
    return m[ius]


def _unpack_sym(vec: np.ndarray, n: int) -> np.ndarray:
    iu, _ = _triangle_indices(n)
    m = np.zeros((n, n))
    m[iu] = vec
    return m + np.triu(m, k=1).T


def _unpack_antisym(vec: np.ndarray, n: int) -> np.ndarray:
    _, ius = _triangle_indices(n)
    m = np.zeros((n, n))
    m[ius] = vec
    return m - m.T


def pack_general(params: GeneralParams, strengths=None) -> np.ndarray:
    parts = [_pack_sym(params.h_sym), _pack_antisym(params.h_antisym)]
    for k in range(params.n_drives):
        parts.append(_pack_sym(params.sigma_sym[:, :, k]))
        parts.append(_pack_antisym(params.sigma_antisym[:, :, k]))
    if strengths is not None:
        parts.append(np.asarray(strengths, dtype=float))
    return np.concatenate(parts)


def unpack_general(vec, dim: int, n_drives: int, n_collapse: int = 0):
    vec = np.asarray(vec, dtype=float)
    n_sym = dim * (dim + 1) // 2
    n_anti = dim * (dim - 1) // 2
    expect = dim * dim * (n_drives + 1) + n_collapse
    if vec.shape != (expect,):
        raise LinalgError(f"parameter vector has length {vec.shape}, expected ({expect},)")
    pos = 0

    def take(count):
        nonlocal pos
        out = vec[pos : pos + count]
        pos += count
        return out

    h_sym = _unpack_sym(take(n_sym), dim)
    h_anti = _unpack_antisym(take(n_anti), dim)
    sigma_sym = np.zeros((dim, dim, n_drives))
    sigma_anti = np.zeros((dim, dim, n_drives))
    for k in range(n_drives):
        sigma_sym[:, :, k] = _unpack_sym(take(n_sym), dim)
        sigma_anti[:, :, k] = _unpack_antisym(take(n_anti), dim)
    params = GeneralParams(h_sym, h_anti, sigma_sym, sigma_anti)
    if n_collapse:
        return params, vec[pos:]
    return params


# ---------------------------------------------------------------------------
# Hamiltonian assembly


def hamiltonian_at(params, basis: OperatorBasis | None, d) -> np.ndarray:
    """Model Hamiltonian for drive amplitudes d."""
    d = np.asarray(d, dtype=float)
    if isinstance(params, LindbladParams):
        return hamiltonian_at(params.hamiltonian, basis, d)
    if isinstance(params, LinearMixParams):
        if basis is None or basis.size != params.n_ops:
            raise LinalgError("basis size must match the number of mixing rows")
        if d.shape != (params.n_drives,):
            raise LinalgError(f"drive has shape {d.shape}, expected ({params.n_drives},)")
        a = params.alpha @ d + params.beta
        return np.einsum("m,mij->ij", a, basis.ops)
    if isinstance(params, GeneralParams):
        if d.shape != (params.n_drives,):
            raise LinalgError(f"drive has shape {d.shape}, expected ({params.n_drives},)")
        sym = params.h_sym + params.sigma_sym @ d
        anti = params.h_antisym + params.sigma_antisym @ d
        return sym + 1j * anti
    raise LinalgError(f"unsupported parameter type {type(params)!r}")


def _hamiltonians_batch(params, basis: OperatorBasis | None, pulses: np.ndarray) -> np.ndarray:
    """(B, n, n) Hamiltonians for a (B, D) batch of constant drives."""
    if isinstance(params, LinearMixParams):
        a = pulses @ params.alpha.T + params.beta
        return np.einsum("bm,mij->bij", a, basis.ops)
    if isinstance(params, GeneralParams):
        sym = params.h_sym[None] + np.einsum("ijk,bk->bij", params.sigma_sym, pulses)
        anti = params.h_antisym[None] + np.einsum("ijk,bk->bij", params.sigma_antisym, pulses)
        return sym + 1j * anti
    raise LinalgError(f"unsupported parameter type {type(params)!r}")


# ---------------------------------------------------------------------------
# batched unitary engine


def _eigh_batch(H: np.ndarray):
    return np.linalg.eigh(H)


def _unitary_state_batch(H: np.ndarray, T: float):
    """Final state u = e^{-iHT}|0> for a batch of Hamiltonians.

    Returns (w, v, phase, bvec, u): eigensystem, e^{-i w T}, V^dag |0>,
    and the final state, all batched.
    """
    w, v = _eigh_batch(H)
    phase = np.exp(-1j * w * T)
    bvec = v[:, 0, :].conj()  # V^dag e_0
    u = np.einsum("bij,bj->bi", v, phase * bvec)
    return w, v, phase, bvec, u


def _grad_directions_batch(w, v, phase, bvec, u, T, directions):
    """d p_k / d eps for H -> H + eps * direction, batched over pulses.

    directions: (R, n, n) shared across the batch, or (B, R, n, n).
    Returns (B, K, R) real.
    """
    phi = loewner_matrix(w, T)
    if directions.ndim == 3:
        tmp = np.einsum("rkl,blj->brkj", directions, v)
    else:
        tmp = np.einsum("brkl,blj->brkj", directions, v)
    c = np.einsum("bki,brkj->brij", v.conj(), tmp)  # V^dag dH V
    du = np.einsum("bki,bij,brij,bj->bkr", v, phi, c, bvec, optimize=True)
    return 2.0 * np.real(u.conj()[:, :, None] * du)


def _adjoint_matrix_grad(w, v, phase, bvec, u, T):
    """GH with dp_k = 2 Re sum_ab GH[b,k,a,b'] dH_{ab'} for Hermitian dH.

    Returns (B, K, n, n) complex.
    """
    phi = loewner_matrix(w, T)
    r = np.einsum("bk,bki,bij,bj->bkij", u.conj(), v, phi, bvec)
    return np.einsum("bai,bkij,bcj->bkac", v.conj(), r, v)


def probs_unitary_batch(params, basis, pulses: np.ndarray, T: float) -> np.ndarray:
    H = _hamiltonians_batch(params, basis, pulses)
    *_, u = _unitary_state_batch(H, T)
    return np.abs(u) ** 2


def probs_grad_mix_batch(params: LinearMixParams, basis, pulses, T: float):
    """Probabilities and gradient w.r.t. the mixing coefficients a_m.

    Returns p (B, K) and dpda (B, K, M); gradients w.r.t. alpha/beta follow
    by the chain rule d a_m / d alpha_ml = d_l, d a_m / d beta_m = 1.
    """
    H = _hamiltonians_batch(params, basis, pulses)
    w, v, phase, bvec, u = _unitary_state_batch(H, T)
    dpda = _grad_directions_batch(w, v, phase, bvec, u, T, basis.ops)
    return np.abs(u) ** 2, dpda


def chain_mix_to_flat(dpda: np.ndarray, pulses: np.ndarray, n_collapse: int = 0) -> np.ndarray:
    """Expand (B, K, M) a-space gradients to the flat linear-mix layout."""
    b, k, m = dpda.shape
    d = pulses.shape[1]
    grad_alpha = np.einsum("bkm,bl->bkml", dpda, pulses).reshape(b, k, m * d)
    out = np.concatenate([grad_alpha, dpda], axis=2)
    if n_collapse:
        out = np.concatenate([out, np.zeros((b, k, n_collapse))], axis=2)
    return out


def _general_flat_grad(gh: np.ndarray, pulses: np.ndarray, dim: int) -> np.ndarray:
    """Map the adjoint matrix gradient to the flat general layout.

    gh: (B, K, n, n) with dp = 2 Re sum GH_ab dH_ab.
    """
    iu, ius = _triangle_indices(dim)
    g2 = 2.0 * np.real(gh)
    gi = 2.0 * np.imag(gh)
    # symmetric component (a, b), a < b: direction E_ab + E_ba; diagonal: E_aa
    sym_grad = g2[:, :, iu[0], iu[1]] + g2[:, :, iu[1], iu[0]]
    diag_positions = np.where(iu[0] == iu[1])[0]
    diag = iu[0][diag_positions]
    sym_grad[:, :, diag_positions] = g2[:, :, diag, diag]
    # antisymmetric (a, b), a < b: direction i (E_ab - E_ba)
    anti_grad = -(gi[:, :, ius[0], ius[1]] - gi[:, :, ius[1], ius[0]])

    base = np.concatenate([sym_grad, anti_grad], axis=2)  # gradient of the drift block
    blocks = [base]
    for kdrive in range(pulses.shape[1]):
        blocks.append(base * pulses[:, None, None, kdrive])
    return np.concatenate(blocks, axis=2)


def probs_grad_hess_mix_batch(params: LinearMixParams, basis, pulses, T: float):
    """p, dp/da, and d2p/dada for the linear-mix unitary model.

    Second derivatives use the second divided differences of e^{-i x T}
    (Daleckii-Krein).  Shapes: (B, K), (B, K, M), (B, K, M, M).
    """
    H = _hamiltonians_batch(params, basis, pulses)
    w, v, phase, bvec, u = _unitary_state_batch(H, T)
    phi = loewner_matrix(w, T)
    ops = basis.ops
    tmp = np.einsum("mkl,blj->bmkj", ops, v)
    c = np.einsum("bki,bmkj->bmij", v.conj(), tmp)  # (B, M, n, n)
    du = np.einsum("bki,bij,bmij,bj->bkm", v, phi, c, bvec)
    p = np.abs(u) ** 2
    g = 2.0 * np.real(u.conj()[:, :, None] * du)

    phi2 = second_divided_difference(w, T)  # (B, n, n, n) indexed [i, l, j]
    wgt = phi2 * bvec[:, None, None, :]
    s = np.einsum("bmil,bqlj,bilj->bmqi", c, c, wgt, optimize=True)
    s = s + np.transpose(s, (0, 2, 1, 3))
    d2u = np.einsum("bki,bmqi->bkmq", v, s)
    h = 2.0 * np.real(
        du[:, :, :, None].conj() * du[:, :, None, :] + u.conj()[:, :, None, None] * d2u
    )
    return p, g, h


# ---------------------------------------------------------------------------
# public single-pulse operations


def _as_constant_drive(pulse: ControlPulse) -> np.ndarray:
    if pulse.amplitudes.ndim != 1:
        raise LinalgError("constant pulse required")
    return pulse.amplitudes


def predict_probs(params, basis: OperatorBasis | None, pulse: ControlPulse) -> np.ndarray:
    """Born probabilities |<k| e^{-iH(d)T} |0>|^2 for a constant pulse."""
    if isinstance(params, LindbladParams):
        rho = evolve_lindblad(params, basis, pulse.amplitudes, pulse.duration)
        return np.real(np.diag(rho))
    d = _as_constant_drive(pulse)
    return probs_unitary_batch(params, basis, d[None], pulse.duration)[0]


def predict_probs_grad(params, basis: OperatorBasis | None, pulse: ControlPulse):
    """Probabilities and their gradient over the flat parameter layout."""
    d = _as_constant_drive(pulse)[None]
    T = pulse.duration
    if isinstance(params, LindbladParams):
        p, gflat = _lindblad_probs_grad(params, basis, d, T)
        return p[0], gflat[0]
    if isinstance(params, LinearMixParams):
        p, dpda = probs_grad_mix_batch(params, basis, d, T)
        return p[0], chain_mix_to_flat(dpda, d)[0]
    if isinstance(params, GeneralParams):
        H = _hamiltonians_batch(params, None, d)
        w, v, phase, bvec, u = _unitary_state_batch(H, T)
        gh = _adjoint_matrix_grad(w, v, phase, bvec, u, T)
        return (np.abs(u) ** 2)[0], _general_flat_grad(gh, d, params.dim)[0]
    raise LinalgError(f"unsupported parameter type {type(params)!r}")


def evolve_piecewise(params, basis: OperatorBasis | None, schedule, T: float) -> np.ndarray:
    """Apply the product of per-segment propagators to |0...0>."""
    schedule = np.atleast_2d(np.asarray(schedule, dtype=float))
    n_seg = schedule.shape[0]
    H = _hamiltonians_batch(params, basis, schedule)
    w, v = _eigh_batch(H)
    dt = T / n_seg
    dim = H.shape[1]
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    for seg in range(n_seg):
        psi = v[seg] @ (np.exp(-1j * w[seg] * dt) * (v[seg].conj().T @ psi))
    return psi


# ---------------------------------------------------------------------------
# Lindblad dynamics


def default_lindblad_steps(T: float) -> int:
    return max(100, int(np.ceil(100.0 * T)))


def _commutator_superop(ops) -> np.ndarray:
    """vec-form superoperators -i(A x - x A) for a stack of operators.

    Row-major vec convention: vec(A X B) = (A kron B^T) vec(X).
    """
    ops = np.asarray(ops, dtype=complex)
    n = ops.shape[-1]
    eye = np.eye(n)
    left = np.einsum("mik,jl->mijkl", ops, eye)
    right = np.einsum("ik,mlj->mijkl", eye, ops)
    return (-1j * (left - right)).reshape(ops.shape[0], n * n, n * n)


def _dissipator_superop(L) -> np.ndarray:
    """vec-form superoperator of L x L^dag - (L^dag L x + x L^dag L)/2."""
    L = np.asarray(L, dtype=complex)
    n = L.shape[0]
    LdL = L.conj().T @ L
    eye = np.eye(n)
    return (
        np.kron(L, L.conj())
        - 0.5 * np.kron(LdL, eye)
        - 0.5 * np.kron(eye, LdL.T)
    )


def _liouvillian_superop(H, collapse, strengths) -> np.ndarray:
    """Batched (B, n^2, n^2) generator for Hamiltonians H (B, n, n)."""
    n = H.shape[-1]
    out = _commutator_superop(H)
    for ci, L in zip(strengths, collapse):
        if ci != 0.0:
            out = out + ci * _dissipator_superop(L)
    return out


def _rk4_vec(lsup_t, y, dt, steps, coupling=None):
    """RK4 on dy/dt = L y (+ coupling from the state row into the others).

    y has shape (B, R, n^2); lsup_t is the transposed generator (B, n^2, n^2)
    so each application is one batched matmul.  `coupling` is an optional
    (n^2, (R-1) * n^2) matrix feeding row 0 (the state) into rows 1..R-1
    (the parameter sensitivities).
    """
    b, r, n2 = y.shape

    def rhs(z):
        dz = np.matmul(z, lsup_t)
        if coupling is not None:
            dz[:, 1:, :] += (z[:, 0] @ coupling).reshape(b, r - 1, n2)
        return dz

    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def _integrate_lindblad(H, collapse, strengths, rho0, dt, steps, method):
    b, n = rho0.shape[0], rho0.shape[-1]
    lsup = _liouvillian_superop(H, collapse, strengths)
    lsup_t = np.ascontiguousarray(lsup.transpose(0, 2, 1))
    y = rho0.reshape(b, 1, n * n)
    if method == "rk4":
        y = _rk4_vec(lsup_t, y, dt, steps)
    elif method == "euler":
        for _ in range(steps):
            y = y + dt * np.matmul(y, lsup_t)
    else:
        raise LinalgError(f"unknown integration method {method!r}")
    rho = y.reshape(b, n, n)
    if not np.all(np.isfinite(rho)):
        raise IntegrationError(
            f"non-finite density matrix after {steps} {method} steps (dt={dt:.3e}); "
            "reduce the step size"
        )
    return rho


def evolve_lindblad(
    params: LindbladParams,
    basis: OperatorBasis | None,
    schedule,
    T: float,
    steps: int | None = None,
    method: str = "rk4",
) -> np.ndarray:
    """Integrate the master equation from |0...0><0...0| over a schedule."""
    if steps is None:
        steps = default_lindblad_steps(T)
    if steps < 1:
        raise LinalgError("steps must be >= 1")
    schedule = np.atleast_2d(np.asarray(schedule, dtype=float))
    n_seg = schedule.shape[0]
    H = _hamiltonians_batch(params.hamiltonian, basis, schedule)
    dim = H.shape[1]
    rho = np.zeros((1, dim, dim), dtype=complex)
    rho[0, 0, 0] = 1.0
    seg_steps = max(1, int(np.ceil(steps / n_seg)))
    dt = (T / n_seg) / seg_steps
    for seg in range(n_seg):
        rho = _integrate_lindblad(
            H[seg : seg + 1], params.collapse_ops, params.strengths, rho, dt, seg_steps, method
        )
    return rho[0]


def lindblad_probs_grad_batch(
    ham_params: LinearMixParams,
    basis: OperatorBasis,
    collapse,
    strengths,
    pulses: np.ndarray,
    T: float,
    steps: int | None = None,
    rho0: np.ndarray | None = None,
):
    """Diagonal populations and their gradients for constant pulses.

    Integrates forward sensitivities w.r.t. the mixing coefficients a_m and
    the collapse strengths c_i alongside the state, using identical RK4
    stages, so the returned gradients are exact for the discrete map.

    Returns p (B, K), dpda (B, K, M), dpdc (B, K, C).
    """
    if steps is None:
        steps = default_lindblad_steps(T)
    collapse = np.asarray(collapse, dtype=complex)
    strengths = np.asarray(strengths, dtype=float)
    H = _hamiltonians_batch(ham_params, basis, pulses)
    b, dim = H.shape[0], H.shape[1]
    m = basis.size
    c = collapse.shape[0]
    ops = basis.ops

    n2 = dim * dim
    y = np.zeros((b, 1 + m + c, n2), dtype=complex)
    if rho0 is None:
        y[:, 0, 0] = 1.0
    else:
        y[:, 0] = np.asarray(rho0, dtype=complex).reshape(-1, n2)
    dt = T / steps

    lsup = _liouvillian_superop(H, collapse, strengths)
    lsup_t = np.ascontiguousarray(lsup.transpose(0, 2, 1))
    # d(generator)/da_m and d(generator)/dc_i, feeding the state into the
    # sensitivity rows; pulse-independent, so built once per call
    ksup = np.concatenate(
        [_commutator_superop(ops)]
        + ([np.stack([_dissipator_superop(L) for L in collapse])] if c else []),
        axis=0,
    )
    coupling = np.ascontiguousarray(ksup.reshape((m + c) * n2, n2).T)

    y = _rk4_vec(lsup_t, y, dt, steps, coupling=coupling)

    if not np.all(np.isfinite(y)):
        raise IntegrationError(
            f"non-finite Lindblad sensitivities after {steps} steps (dt={dt:.3e})"
        )
    diag = np.arange(dim) * (dim + 1)
    p = np.real(y[:, 0, diag])
    dp = np.real(y[:, 1:, :][:, :, diag])  # (B, M+C, K)
    dpda = np.transpose(dp[:, :m], (0, 2, 1))
    dpdc = np.transpose(dp[:, m:], (0, 2, 1))
    return p, dpda, dpdc


def _lindblad_probs_grad(params: LindbladParams, basis, pulses, T):
    """Flat-layout probabilities/gradients for a LindbladParams model."""
    if not isinstance(params.hamiltonian, LinearMixParams):
        raise LinalgError("Lindblad gradients are implemented for the linear-mix model")
    p, dpda, dpdc = lindblad_probs_grad_batch(
        params.hamiltonian, basis, params.collapse_ops, params.strengths, pulses, T
    )
    gflat = chain_mix_to_flat(dpda, pulses)
    return p, np.concatenate([gflat, dpdc], axis=2)


# ---------------------------------------------------------------------------
# flat-parameter forward model used by the estimation and design modules


@dataclass
class ForwardModel:
    """Prediction engine over a flat parameter vector.

    kind "linear" parameters: [alpha (M*D), beta (M), strengths (C)];
    kind "general" parameters: triangle layout (see pack_general) plus strengths.
    """

    basis: OperatorBasis
    n_drives: int
    kind: str = "linear"
    duration: float = 1.0
    collapse_ops: np.ndarray | None = None
    lindblad_steps: int | None = None
    label: str = ""
    _elementary: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def n_collapse(self) -> int:
        return 0 if self.collapse_ops is None else len(self.collapse_ops)

    @property
    def n_params(self) -> int:
        if self.kind == "linear":
            core = self.basis.size * (self.n_drives + 1)
        elif self.kind == "general":
            core = self.dim * self.dim * (self.n_drives + 1)
        else:
            raise LinalgError(f"unknown model kind {self.kind!r}")
        return core + self.n_collapse

    # -- packing ----------------------------------------------------------
    def pack(self, params, strengths=None) -> np.ndarray:
        if self.kind == "linear":
            return pack_linear(params, strengths if self.n_collapse else None)
        return pack_general(params, strengths if self.n_collapse else None)

    def unpack(self, omega: np.ndarray):
        if self.kind == "linear":
            return unpack_linear(omega, self.basis.size, self.n_drives, self.n_collapse)
        return unpack_general(omega, self.dim, self.n_drives, self.n_collapse)

    def _split(self, omega):
        if self.n_collapse:
            params, strengths = self.unpack(omega)
        else:
            params, strengths = self.unpack(omega), None
        return params, strengths

    # -- forward ----------------------------------------------------------
    def probs(self, omega: np.ndarray, pulses: np.ndarray) -> np.ndarray:
        params, strengths = self._split(omega)
        pulses = np.atleast_2d(np.asarray(pulses, dtype=float))
        if self.n_collapse:
            # batched RK4 without sensitivities
            H = _hamiltonians_batch(params, self.basis if self.kind == "linear" else None, pulses)
            steps = self.lindblad_steps or default_lindblad_steps(self.duration)
            rho = np.zeros((pulses.shape[0], self.dim, self.dim), dtype=complex)
            rho[:, 0, 0] = 1.0
            rho = _integrate_lindblad(
                H,
                np.asarray(self.collapse_ops, dtype=complex),
                np.abs(strengths),
                rho,
                self.duration / steps,
                steps,
                "rk4",
            )
            diag = np.arange(self.dim)
            return np.real(rho[:, diag, diag])
        basis = self.basis if self.kind == "linear" else None
        return probs_unitary_batch(params, basis, pulses, self.duration)

    def probs_and_grad(self, omega: np.ndarray, pulses: np.ndarray):
        """Returns p (B, K) and dp/domega (B, K, W) over the flat layout."""
        params, strengths = self._split(omega)
        pulses = np.atleast_2d(np.asarray(pulses, dtype=float))
        if self.n_collapse:
            if self.kind != "linear":
                raise LinalgError("Lindblad gradients require the linear-mix model")
            p, dpda, dpdc = lindblad_probs_grad_batch(
                params,
                self.basis,
                self.collapse_ops,
                np.abs(strengths),
                pulses,
                self.duration,
                self.lindblad_steps,
            )
            dpdc = dpdc * np.sign(strengths + (strengths == 0.0))
            gflat = chain_mix_to_flat(dpda, pulses)
            return p, np.concatenate([gflat, dpdc], axis=2)
        if self.kind == "linear":
            p, dpda = probs_grad_mix_batch(params, self.basis, pulses, self.duration)
            return p, chain_mix_to_flat(dpda, pulses)
        H = _hamiltonians_batch(params, None, pulses)
        w, v, phase, bvec, u = _unitary_state_batch(H, self.duration)
        gh = _adjoint_matrix_grad(w, v, phase, bvec, u, self.duration)
        return np.abs(u) ** 2, _general_flat_grad(gh, pulses, self.dim)

    def probs_grad_mix(self, omega: np.ndarray, pulses: np.ndarray):
        """Fast a-space gradients (linear unitary path only)."""
        params, strengths = self._split(omega)
        pulses = np.atleast_2d(np.asarray(pulses, dtype=float))
        if self.kind != "linear":
            raise LinalgError("a-space gradients are defined for the linear-mix model")
        if self.n_collapse:
            return lindblad_probs_grad_batch(
                params,
                self.basis,
                self.collapse_ops,
                np.abs(strengths),
                pulses,
                self.duration,
                self.lindblad_steps,
            )
        p, dpda = probs_grad_mix_batch(params, self.basis, pulses, self.duration)
        return p, dpda, None
