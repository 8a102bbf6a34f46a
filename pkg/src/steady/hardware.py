"""Simulated ground truth: the 3-qubit test system, SPAM, shots, datasets.

The default mock system has Pauli drives (X, Y, Z per qubit) and
nearest-neighbor exchange couplings, M = D = 12 for Q = 3.  Truth
constants are drawn uniformly in [0.5, 1.5] from a fixed seed; alpha is
diagonal and beta is nonzero only on the Z and exchange rows.

Intrinsic SPAM uses a single per-qubit flip probability s, applied both as
a preparation mixture and as a Hamming-1 confusion matrix at readout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import LinalgError
from .models import (
    LinearMixParams,
    OperatorBasis,
    _hamiltonians_batch,
    _integrate_lindblad,
    _unitary_state_batch,
    default_lindblad_steps,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0| adjoint: lowers |1> -> |0>
IDENTITY_2 = np.eye(2, dtype=complex)


def _kron_chain(mats) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def single_qubit_op(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    mats = [IDENTITY_2] * n_qubits
    mats[qubit] = op
    return _kron_chain(mats)


def exchange_op(i: int, j: int, n_qubits: int) -> np.ndarray:
    """sigma_i^+ sigma_j^- + h.c. embedded in the full register."""
    plus = SIGMA_MINUS.conj().T
    a = single_qubit_op(plus, i, n_qubits) @ single_qubit_op(SIGMA_MINUS, j, n_qubits)
    return a + a.conj().T


def pauli_exchange_basis(n_qubits: int = 3) -> OperatorBasis:
    """X/Y/Z per qubit plus nearest-neighbor exchange ops (ring for Q=3)."""
    ops = []
    labels = []
    for name, op in (("X", SIGMA_X), ("Y", SIGMA_Y), ("Z", SIGMA_Z)):
        for q in range(n_qubits):
            ops.append(single_qubit_op(op, q, n_qubits))
            labels.append(f"{name}{q + 1}")
    if n_qubits == 1:
        pairs = []
    elif n_qubits == 2:
        pairs = [(0, 1)]
    else:
        pairs = [(q, (q + 1) % n_qubits) for q in range(n_qubits)]
    for i, j in pairs:
        ops.append(exchange_op(i, j, n_qubits))
        labels.append(f"{i + 1}{j + 1}")
    return OperatorBasis(np.array(ops), tuple(labels))


@dataclass(frozen=True)
class TrueSystem:
    """Ground-truth parameters used to generate mock measurement data."""

    basis: OperatorBasis
    truth: LinearMixParams
    n_qubits: int
    seed: int
    collapse_ops: np.ndarray | None = None
    decay_strengths: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def has_decay(self) -> bool:
        return self.decay_strengths is not None and np.any(self.decay_strengths > 0)


def build_true_system(n_qubits: int = 3, seed: int = 2024, decay: float | None = None) -> TrueSystem:
    """Draw the truth constants (kappa, epsilon, eta) uniformly in [0.5, 1.5].

    With `decay`, each qubit additionally suffers amplitude damping with the
    given strength (collapse operator sigma^- per qubit).
    """
    basis = pauli_exchange_basis(n_qubits)
    m = basis.size
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    kappa = rng.uniform(0.5, 1.5, size=m)
    eps = rng.uniform(0.5, 1.5, size=n_qubits)
    eta = rng.uniform(0.5, 1.5, size=m - 3 * n_qubits)
    beta = np.zeros(m)
    beta[2 * n_qubits : 3 * n_qubits] = eps  # Z rows
    beta[3 * n_qubits :] = eta  # exchange rows
    truth = LinearMixParams(np.diag(kappa), beta)
    collapse = None
    strengths = None
    if decay is not None:
        collapse = np.array(
            [single_qubit_op(SIGMA_MINUS, q, n_qubits) for q in range(n_qubits)]
        )
        strengths = np.full(n_qubits, float(decay))
    return TrueSystem(basis, truth, n_qubits, seed, collapse, strengths)


# ---------------------------------------------------------------------------
# SPAM


def spam_confusion_matrix(n_qubits: int, s: float) -> np.ndarray:
    """Column-stochastic confusion matrix (1 - Qs) I + s on Hamming-1 pairs."""
    if not 0.0 <= s < 1.0 / n_qubits:
        raise LinalgError(f"SPAM rate s={s} must satisfy 0 <= s < 1/Q")
    dim = 2**n_qubits
    mat = (1.0 - n_qubits * s) * np.eye(dim)
    for i in range(dim):
        for q in range(n_qubits):
            mat[i ^ (1 << q), i] += s
    return mat


def _prep_branch_indices(n_qubits: int) -> np.ndarray:
    """Basis-state indices of |0..0> and the Q single-flip preparations."""
    # qubit q flips the bit at position (n_qubits - 1 - q) in the kron ordering
    return np.array([0] + [1 << (n_qubits - 1 - q) for q in range(n_qubits)])


def true_probs(
    system: TrueSystem,
    s: float,
    pulses: np.ndarray,
    duration: float = 1.0,
    lindblad_steps: int | None = None,
) -> np.ndarray:
    """SPAM-corrupted outcome probabilities of the true system, batched.

    The preparation mixture (1 - Qs)|0..0> + s sum_q |..1_q..> is evolved
    branch by branch (the branches are orthogonal basis states, and only
    populations are read out), then the readout confusion matrix is applied.
    """
    pulses = np.atleast_2d(np.asarray(pulses, dtype=float))
    q = system.n_qubits
    branch_idx = _prep_branch_indices(q)
    weights = np.concatenate([[1.0 - q * s], np.full(q, s)])
    H = _hamiltonians_batch(system.truth, system.basis, pulses)

    if system.has_decay:
        dim = system.dim
        rho = np.zeros((pulses.shape[0], dim, dim), dtype=complex)
        for w, idx in zip(weights, branch_idx):
            rho[:, idx, idx] += w
        steps = lindblad_steps or default_lindblad_steps(duration)
        rho = _integrate_lindblad(
            H, system.collapse_ops, system.decay_strengths, rho, duration / steps, steps, "rk4"
        )
        mixed = np.real(np.einsum("bkk->bk", rho))
    else:
        w, v = np.linalg.eigh(H)
        phase = np.exp(-1j * w * duration)
        # populations of every evolved basis state: |U[:, j]|^2 columnwise
        cols = np.einsum("bki,bi,bji->bkj", v, phase, v.conj())  # U (B, n, n)
        pops = np.abs(cols) ** 2
        mixed = np.einsum("bkj,j->bk", pops[:, :, branch_idx], weights)

    if s > 0.0:
        conf = spam_confusion_matrix(q, s)
        mixed = mixed @ conf.T
    return mixed


# ---------------------------------------------------------------------------
# sampling and datasets


def _pulse_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, index)))


def sample_measurements(p: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial counts via CDF inversion of `shots` uniform draws."""
    p = np.asarray(p, dtype=float)
    if shots < 1:
        raise LinalgError("shots must be >= 1")
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise LinalgError("invalid probability vector")
    cdf = np.cumsum(np.clip(p, 0.0, None))
    cdf[-1] = 1.0
    draws = np.searchsorted(cdf, rng.random(shots), side="right")
    return np.bincount(draws, minlength=p.size)


@dataclass
class Dataset:
    """Random-pulse measurement record; shots == 0 encodes exact probabilities."""

    pulses: np.ndarray  # (P, D)
    observations: np.ndarray  # (P, 2^Q) counts or exact probabilities
    shots: int
    meta: dict = field(default_factory=dict)

    @property
    def n_pulses(self) -> int:
        return self.pulses.shape[0]

    @property
    def exact(self) -> bool:
        return self.shots == 0

    def estimated_probs(self) -> np.ndarray:
        if self.exact:
            return self.observations
        return self.observations / float(self.shots)


def generate_dataset(
    system: TrueSystem,
    s: float,
    n_pulses: int,
    shots: int,
    duration: float = 1.0,
    seed: int = 0,
    designed_pulses: np.ndarray | None = None,
) -> Dataset:
    """Draw P pulses i.i.d. N(0, 1) (or use designed ones) and measure them.

    shots == 0 records the exact outcome probabilities (the S = infinity
    limit).  Per-pulse shot noise comes from independent substreams keyed by
    (seed, pulse index), so datasets are reproducible under any scheduling.
    """
    if n_pulses < 1:
        raise LinalgError("need at least one pulse")
    if designed_pulses is not None:
        pulses = np.asarray(designed_pulses, dtype=float)
        if pulses.shape[0] != n_pulses:
            raise LinalgError("designed pulse list size mismatch")
    else:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
        pulses = rng.standard_normal((n_pulses, system.basis.size))
    probs = true_probs(system, s, pulses, duration)
    if shots == 0:
        observations = probs
    else:
        observations = np.empty_like(probs, dtype=np.int64)
        for i in range(n_pulses):
            observations[i] = sample_measurements(probs[i], shots, _pulse_rng(seed, i))
    meta = {
        "seed": int(seed),
        "T": float(duration),
        "S": int(shots),
        "P": int(n_pulses),
        "s": float(s),
        "system": f"pauli-exchange-q{system.n_qubits}-seed{system.seed}"
        + (f"-decay{system.decay_strengths[0]:g}" if system.has_decay else ""),
    }
    return Dataset(pulses, observations, shots, meta)


def nominal_params(n_qubits: int = 3) -> LinearMixParams:
    """Design-nominal parameters of the mock device (its datasheet values).

    The truth constants are drawn from U[0.5, 1.5] around unit couplings, so
    the nominal point (identity alpha, unit Z/exchange drift) is the natural
    data-independent initialization for estimators.
    """
    m = pauli_exchange_basis(n_qubits).size
    beta = np.zeros(m)
    beta[2 * n_qubits :] = 1.0
    return LinearMixParams(np.eye(m), beta)


def gauge_rotate_alpha(alpha: np.ndarray, theta: float, n_qubits: int = 3) -> np.ndarray:
    """Apply the simultaneous-z-rotation gauge to the X/Y rows of alpha.

    Conjugating the Hamiltonian by exp(-i theta sum_q Z_q / 2) maps the
    (X_q, Y_q) coefficient pair to (c x - s y, s x + c y) and leaves the Z
    and exchange rows unchanged.
    """
    out = np.array(alpha, dtype=float)
    c, sn = np.cos(theta), np.sin(theta)
    x_rows = slice(0, n_qubits)
    y_rows = slice(n_qubits, 2 * n_qubits)
    out[x_rows] = c * alpha[x_rows] - sn * alpha[y_rows]
    out[y_rows] = sn * alpha[x_rows] + c * alpha[y_rows]
    return out
