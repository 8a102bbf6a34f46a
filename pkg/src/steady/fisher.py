"""Fisher information, Cramer-Rao diagnostics, and D-optimal pulse design.

The per-measurement Fisher matrix uses the multinomial outer-product form
sum_k (1/p_k) (dp_k/dw_i) (dp_k/dw_j), which is exact given the analytic
probability gradients (no Hessians of the likelihood are needed).  Pulse
design runs gradient ascent on log det of the summed per-pulse Fisher
matrices, holding the mean-square pulse amplitude fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import TOL, LinalgError
from .models import ControlPulse, ForwardModel, probs_grad_hess_mix_batch, chain_mix_to_flat


@dataclass(frozen=True)
class FisherMatrix:
    matrix: np.ndarray  # (W, W) real symmetric PSD
    pulse_count: int
    shots: int


def _fisher_from_grads(p: np.ndarray, grads: np.ndarray, eps_clip: float = TOL.prob_clip):
    """Per-pulse Fisher matrices from p (B, K) and dp/dw (B, K, W)."""
    weights = 1.0 / np.clip(p, eps_clip, None)
    return np.einsum("bk,bkw,bkv->bwv", weights, grads, grads)


def fisher_per_pulse(omega: np.ndarray, model: ForwardModel, pulse) -> FisherMatrix:
    """Fisher information of a single projective measurement of one pulse."""
    amplitudes = pulse.amplitudes if isinstance(pulse, ControlPulse) else np.asarray(pulse)
    p, grads = model.probs_and_grad(omega, amplitudes[None])
    mat = _fisher_from_grads(p, grads)[0]
    return FisherMatrix(0.5 * (mat + mat.T), pulse_count=1, shots=1)


def fisher_total(omega: np.ndarray, model: ForwardModel, pulses, shots: int = 1) -> FisherMatrix:
    """S * sum_i per-pulse Fisher; equals P*S*(average per-pulse Fisher)."""
    pulses = np.atleast_2d(np.asarray(pulses, dtype=float))
    p, grads = model.probs_and_grad(omega, pulses)
    mat = shots * np.sum(_fisher_from_grads(p, grads), axis=0)
    return FisherMatrix(0.5 * (mat + mat.T), pulse_count=pulses.shape[0], shots=shots)


@dataclass(frozen=True)
class CRBReport:
    """Per-parameter variance (or MSE, with bias inputs) lower bounds."""

    bounds: np.ndarray
    flagged: np.ndarray  # True where the parameter overlaps a Fisher null direction
    null_space: np.ndarray  # (W, n_null) orthonormal null directions


def crb_report(
    fisher: FisherMatrix,
    bias: np.ndarray | None = None,
    bias_grad: np.ndarray | None = None,
    null_cutoff: float = 1e-10,
) -> CRBReport:
    """Cramer-Rao lower bounds from the pseudo-inverse of the Fisher matrix.

    Eigenvalues below null_cutoff * lambda_max are treated as gauge-null
    directions: they are excluded from the pseudo-inverse and any parameter
    with significant overlap onto them is flagged as unbounded.
    """
    mat = fisher.matrix
    w, v = np.linalg.eigh(0.5 * (mat + mat.T))
    lam_max = max(w.max(initial=0.0), 0.0)
    keep = w > null_cutoff * max(lam_max, 1e-300)
    if not np.any(keep):
        raise LinalgError("Fisher matrix has no informative directions")
    pinv_diag = np.einsum("wj,j,wj->w", v[:, keep], 1.0 / w[keep], v[:, keep])
    null_space = v[:, ~keep]
    flagged = np.linalg.norm(null_space, axis=1) > 1e-6 if null_space.size else np.zeros(
        mat.shape[0], dtype=bool
    )
    bounds = pinv_diag
    if bias is not None:
        bias = np.asarray(bias, dtype=float)
        slope = np.zeros_like(bias) if bias_grad is None else np.asarray(bias_grad, dtype=float)
        bounds = (1.0 - slope) ** 2 * pinv_diag + bias**2
    return CRBReport(bounds, flagged, null_space)


# ---------------------------------------------------------------------------
# D-optimal design


def _logdet_fisher_and_grad(
    omega: np.ndarray,
    model: ForwardModel,
    pulses: np.ndarray,
    ridge: float = 1e-8,
    eps_clip: float = TOL.prob_clip,
    durations: list[float] | None = None,
    metric: np.ndarray | None = None,
):
    """Design objective over the summed Fisher matrix K and its pulse gradient.

    Default (metric=None): log det(K + ridge I), the D-optimality criterion.
    With a PSD `metric` G: returns -tr(G K^-1), whose maximization minimizes
    the predicted validation error (A-optimality in the G norm).

    Linear-mix unitary models only: uses analytic second derivatives of the
    probabilities w.r.t. the mixing coefficients for the dependence of the
    per-pulse Fisher matrix on the pulse.  With `durations`, each pulse is
    measured at every listed duration and the per-duration Fisher matrices
    add (matching an experiment that records a duration ladder).
    """
    if model.kind != "linear" or model.n_collapse:
        raise LinalgError("pulse design requires the unitary linear-mix model")
    params = model.unpack(omega)
    alpha = params.alpha
    if durations is None:
        durations = [model.duration]

    per_t = []
    n_w = omega.size
    total = ridge * np.eye(n_w)
    for t in durations:
        p, g, h = probs_grad_hess_mix_batch(params, model.basis, pulses, t)
        inv_p = 1.0 / np.clip(p, eps_clip, None)
        grads = chain_mix_to_flat(g, pulses)  # J: (B, K, W)
        contrib = np.einsum("bk,bkw,bkv->wv", inv_p, grads, grads)
        total += 0.5 * (contrib + contrib.T)
        per_t.append((g, h, inv_p, grads))
    sign, logdet = np.linalg.slogdet(total)
    if sign <= 0:
        raise LinalgError("total Fisher matrix is not positive definite")
    kinv = np.linalg.inv(total)
    if metric is None:
        value = float(logdet)
        weight = kinv  # d logdet / dK
    else:
        value = -float(np.sum(metric * kinv))  # -tr(G K^-1)
        # d(-tr(G K^-1)) / dK = K^-1 G K^-1
        weight = kinv @ metric @ kinv
        weight = 0.5 * (weight + weight.T)

    n_ops, n_drives = alpha.shape
    grad = np.zeros_like(pulses)
    for g, h, inv_p, grads in per_t:
        a_block = np.einsum("bkw,wv->bkv", grads, weight)  # J * dObj/dK
        a_alpha = a_block[:, :, : n_ops * n_drives].reshape(
            pulses.shape[0], g.shape[1], n_ops, n_drives
        )
        a_beta = a_block[:, :, n_ops * n_drives : n_ops * (n_drives + 1)]

        gd = np.einsum("bkmq,ql->bkml", h, alpha)  # d g / d d_l
        dp_d = np.einsum("bkq,ql->bkl", g, alpha)  # d p / d d_l

        ad = np.einsum("bkmr,br->bkm", a_alpha, pulses)
        t1 = np.einsum("bkm,bkml,bk->bl", ad + a_beta, gd, inv_p, optimize=True)
        t2 = np.einsum("bkml,bkm,bk->bl", a_alpha, g, inv_p, optimize=True)
        m2 = np.einsum("bkv,bkv->bk", a_block, grads)
        t3 = np.einsum("bk,bkl->bl", m2 * inv_p**2, dp_d)
        grad += 2.0 * (t1 + t2) - t3
    return value, grad


def validation_metric(
    omega: np.ndarray, model: ForwardModel, n_pulses: int = 256, seed: int = 7
) -> np.ndarray:
    """Gauss-Newton metric of the validation error over random unit pulses.

    The expected validation MSE of an estimate near omega is a quadratic form
    in the parameter error with this (PSD) Hessian, so it is the natural
    metric for A-optimal pulse design.  Uses its own seeded pulse sample.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(4,)))
    pulses = rng.standard_normal((n_pulses, model.n_drives))
    _, grads = model.probs_and_grad(omega, pulses)
    mat = 2.0 * np.einsum("bkw,bkv->wv", grads, grads) / n_pulses
    return 0.5 * (mat + mat.T)


def _rescale_power(pulses: np.ndarray, power: float) -> np.ndarray:
    ms = np.mean(pulses**2)
    return pulses * np.sqrt(power / ms)


def design_pulses(
    omega: np.ndarray,
    model: ForwardModel,
    n_pulses: int,
    power: float = 1.0,
    steps: int = 60,
    lr: float = 0.05,
    seed: int = 0,
    ridge: float = 1e-8,
    durations: list[float] | None = None,
    metric: np.ndarray | None = None,
) -> np.ndarray:
    """Gradient ascent on the design objective over the pulse amplitudes.

    The default objective is log det Fisher (D-optimality); passing a PSD
    `metric` G switches to minimizing tr(G K^-1), the predicted validation
    error in the G norm (A-optimality).  After every step the pulse set is
    rescaled so the mean squared amplitude over all pulses and drive
    components equals `power` exactly.  The ascent only needs to beat random
    pulses, not find the global optimum.  With `durations`, the design
    targets the summed Fisher information of a duration-ladder measurement
    instead of a single duration.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(3,)))
    pulses = rng.standard_normal((n_pulses, model.n_drives))
    if steps == 0:
        return pulses
    pulses = _rescale_power(pulses, power)
    for _ in range(steps):
        _, grad = _logdet_fisher_and_grad(
            omega, model, pulses, ridge, durations=durations, metric=metric
        )
        rms = np.sqrt(np.mean(grad**2))
        if rms == 0.0 or not np.isfinite(rms):
            break
        pulses = pulses + lr * grad / rms
        pulses = _rescale_power(pulses, power)
    return pulses
