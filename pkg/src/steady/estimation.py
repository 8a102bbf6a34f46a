"""Stochastic parameter estimation on measured-vs-predicted populations.

The estimator minimizes C(omega) = mean_i dist(p_hat_i, p_model_i(omega))
plus an annealed L1 penalty, using a Nesterov-momentum Adam optimizer with
plateau-triggered learning-rate decay.  The regularization weight follows
the running cost (clipped below by the shot-noise floor), so it anneals
away exactly as fast as the fit improves.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .hardware import Dataset, TrueSystem, gauge_rotate_alpha, true_probs
from .linalg import TOL, LinalgError
from .models import ForwardModel


class DistanceKind(str, Enum):
    MSE = "mse"
    MAE = "mae"
    CROSS_ENTROPY = "cross_entropy"
    BHATTACHARYYA = "bhattacharyya"


EPS_CLIP = TOL.prob_clip


def _check_pair(p_hat, p_model):
    p_hat = np.atleast_2d(np.asarray(p_hat, dtype=float))
    p_model = np.atleast_2d(np.asarray(p_model, dtype=float))
    if p_hat.shape != p_model.shape:
        raise LinalgError(f"length mismatch: {p_hat.shape} vs {p_model.shape}")
    return p_hat, p_model


def distance_batch(kind: DistanceKind, p_hat, p_model, eps_clip: float = EPS_CLIP) -> np.ndarray:
    """Per-pulse distances, batched over the leading axis."""
    p_hat, p_model = _check_pair(p_hat, p_model)
    if kind == DistanceKind.MSE:
        return np.sum((p_hat - p_model) ** 2, axis=-1)
    if kind == DistanceKind.MAE:
        return np.sum(np.abs(p_hat - p_model), axis=-1)
    clipped = np.clip(p_model, eps_clip, 1.0)
    if kind == DistanceKind.CROSS_ENTROPY:
        return -np.sum(p_hat * np.log(clipped), axis=-1)
    if kind == DistanceKind.BHATTACHARYYA:
        return -np.log(np.sum(np.sqrt(p_hat * clipped), axis=-1))
    raise LinalgError(f"unknown distance kind {kind!r}")


def distance_grad_batch(kind: DistanceKind, p_hat, p_model, eps_clip: float = EPS_CLIP):
    """Per-pulse distances and their gradients w.r.t. the model probabilities."""
    p_hat, p_model = _check_pair(p_hat, p_model)
    if kind == DistanceKind.MSE:
        return np.sum((p_hat - p_model) ** 2, axis=-1), -2.0 * (p_hat - p_model)
    if kind == DistanceKind.MAE:
        return np.sum(np.abs(p_hat - p_model), axis=-1), np.sign(p_model - p_hat)
    inside = (p_model > eps_clip) & (p_model < 1.0)
    clipped = np.clip(p_model, eps_clip, 1.0)
    if kind == DistanceKind.CROSS_ENTROPY:
        val = -np.sum(p_hat * np.log(clipped), axis=-1)
        return val, np.where(inside, -p_hat / clipped, 0.0)
    if kind == DistanceKind.BHATTACHARYYA:
        overlap = np.sum(np.sqrt(p_hat * clipped), axis=-1)
        val = -np.log(overlap)
        grad = -0.5 * np.sqrt(p_hat / clipped) / overlap[..., None]
        return val, np.where(inside, grad, 0.0)
    raise LinalgError(f"unknown distance kind {kind!r}")


def distance(kind: DistanceKind, p_hat, p_model, eps_clip: float = EPS_CLIP) -> float:
    """Distance between a single pair of probability vectors."""
    return float(distance_batch(kind, p_hat, p_model, eps_clip)[0])


def cost(
    omega: np.ndarray,
    dataset: Dataset,
    model: ForwardModel,
    kind: DistanceKind = DistanceKind.MSE,
) -> float:
    """C(omega): distance averaged over all dataset pulses."""
    p_model = model.probs(omega, dataset.pulses)
    return float(np.mean(distance_batch(kind, dataset.estimated_probs(), p_model)))


def cost_grad(
    omega: np.ndarray,
    pulses: np.ndarray,
    p_hat: np.ndarray,
    model: ForwardModel,
    kind: DistanceKind = DistanceKind.MSE,
):
    """Batch-restricted cost and its exact gradient over the flat layout."""
    pulses = np.atleast_2d(np.asarray(pulses, dtype=float))
    p_hat = np.atleast_2d(np.asarray(p_hat, dtype=float))
    if pulses.shape[0] == 0:
        raise LinalgError("batch must be non-empty")
    n = pulses.shape[0]
    if model.kind == "linear":
        p, dpda, dpdc = model.probs_grad_mix(omega, pulses)
        vals, dd = distance_grad_batch(kind, p_hat, p)
        dcda = np.einsum("bk,bkm->bm", dd, dpda)
        grad_alpha = np.einsum("bm,bl->ml", dcda, pulses) / n
        grad_beta = np.mean(dcda, axis=0)
        parts = [grad_alpha.ravel(), grad_beta]
        if dpdc is not None:
            strengths = omega[-model.n_collapse :]
            sign = np.sign(strengths + (strengths == 0.0))
            parts.append(np.einsum("bk,bkc->c", dd, dpdc) * sign / n)
        return float(np.mean(vals)), np.concatenate(parts)
    p, grad = model.probs_and_grad(omega, pulses)
    vals, dd = distance_grad_batch(kind, p_hat, p)
    return float(np.mean(vals)), np.einsum("bk,bkw->w", dd, grad) / n


# ---------------------------------------------------------------------------
# optimizer


@dataclass(frozen=True)
class AnnealSpec:
    """Plateau-triggered learning-rate annealing schedule."""

    window: int = 50  # epochs between plateau checks
    plateau_ratio: float = 0.01  # decay lr when window improvement is below this
    max_decays: int = 16


@dataclass(frozen=True)
class FitConfig:
    distance: DistanceKind = DistanceKind.MSE
    lr0: float = 0.01
    lr_decay: float = 0.5
    lambda0: float = 0.1
    anneal: AnnealSpec = field(default_factory=AnnealSpec)
    batch_size: int = 64
    max_epochs: int = 4000
    tol: float = 1e-3  # relative improvement below which a final plateau stops the fit
    init_scale: float = 0.1
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["distance"] = self.distance.value
        return d


@dataclass
class EstimationReport:
    omega_hat: np.ndarray
    cost_trace: list[float]
    reg_trace: list[float]
    final_cost: float
    config: dict
    wall_time: float
    n_epochs: int

    def to_dict(self) -> dict:
        return {
            "omega_hat": self.omega_hat.tolist(),
            "cost_trace": self.cost_trace,
            "reg_trace": self.reg_trace,
            "final_cost": self.final_cost,
            "config": self.config,
            "wall_time": self.wall_time,
            "n_epochs": self.n_epochs,
        }


class _Nadam:
    """Adam with a Nesterov-style lookahead on the first moment."""

    def __init__(self, n: int, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, x: np.ndarray, g: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m = b1 * self.m + (1 - b1) * g
        self.v = b2 * self.v + (1 - b2) * g * g
        m_hat = self.m / (1 - b1**self.t)
        v_hat = self.v / (1 - b2**self.t)
        m_bar = b1 * m_hat + (1 - b1) * g / (1 - b1**self.t)
        return x - lr * m_bar / (np.sqrt(v_hat) + self.eps)


def shot_noise_floor(dataset: Dataset) -> float:
    """Expected multinomial MSE floor: mean_i sum_k p_k (1 - p_k) / S."""
    if dataset.exact:
        return 0.0
    p = dataset.estimated_probs()
    return float(np.mean(np.sum(p * (1.0 - p), axis=1))) / dataset.shots


class FitDivergedError(RuntimeError):
    """Raised when the fit cost becomes non-finite."""


def fit(
    dataset: Dataset,
    model: ForwardModel,
    config: FitConfig = FitConfig(),
    omega0: np.ndarray | None = None,
) -> EstimationReport:
    """Annealed Adam descent on cost + lambda_k * ||omega||_1.

    Deterministic under a fixed (dataset, config, omega0).  The L1 weight
    follows the running batch cost, clipped below by the shot-noise floor
    estimate; the subgradient of |omega| at 0 is taken as 0.
    """
    t_start = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(7,)))
    n_params = model.n_params
    if omega0 is not None:
        omega = np.array(omega0, dtype=float)
        if omega.shape != (n_params,):
            raise LinalgError("initial omega has the wrong length")
    else:
        omega = config.init_scale * rng.standard_normal(n_params)

    p_hat = dataset.estimated_probs()
    pulses = dataset.pulses
    n_pulses = dataset.n_pulses
    batch = min(config.batch_size, n_pulses)
    floor = shot_noise_floor(dataset)

    opt = _Nadam(n_params)
    lr = config.lr0
    decays = 0
    running_cost = None
    lam = 0.0
    cost_trace: list[float] = []
    reg_trace: list[float] = []
    window_anchor = None
    epochs_since_check = 0

    for epoch in range(config.max_epochs):
        perm = rng.permutation(n_pulses)
        epoch_costs = []
        for start in range(0, n_pulses, batch):
            idx = perm[start : start + batch]
            c, g = cost_grad(omega, pulses[idx], p_hat[idx], model, config.distance)
            if not np.isfinite(c):
                raise FitDivergedError(f"non-finite cost at epoch {epoch}")
            g = g + lam * np.sign(omega)
            omega = opt.step(omega, g, lr)
            epoch_costs.append(c)
            running_cost = c if running_cost is None else 0.9 * running_cost + 0.1 * c
            lam = config.lambda0 * max(running_cost, floor)
        c_epoch = float(np.mean(epoch_costs))
        cost_trace.append(c_epoch)
        reg_trace.append(lam)

        epochs_since_check += 1
        if window_anchor is None:
            window_anchor = c_epoch
        if epochs_since_check >= config.anneal.window:
            improvement = (window_anchor - c_epoch) / max(abs(window_anchor), 1e-300)
            if improvement < config.anneal.plateau_ratio:
                if decays >= config.anneal.max_decays and improvement < config.tol:
                    break
                if decays < config.anneal.max_decays:
                    lr *= config.lr_decay
                    decays += 1
            window_anchor = c_epoch
            epochs_since_check = 0

    final_cost = cost(omega, dataset, model, config.distance)
    return EstimationReport(
        omega_hat=omega,
        cost_trace=cost_trace,
        reg_trace=reg_trace,
        final_cost=final_cost,
        config=config.to_dict(),
        wall_time=time.perf_counter() - t_start,
        n_epochs=len(cost_trace),
    )


# ---------------------------------------------------------------------------
# duration-ladder fitting
#
# At unit duration the eigenphases of the appendix-scale systems spread over
# ~10 radians, so the cost landscape is riddled with phase-wrapped local
# minima and cold-started SGD reliably stalls in a near-zero "decohered"
# attractor.  Short pulses unwrap the phases (the landscape becomes benign)
# but pin the parameters only weakly.  The ladder resolves the tension:
# measure the same pulse set at a geometric ladder of durations, fit each
# stage to local convergence, and warm-start the next stage.  The parameter
# vector is duration-independent, so every stage shares the same truth and
# the basin is tracked from the easy short-time end to the precise long-time
# end.


def duration_ladder(t_final: float, t_start: float = 0.125, factor: float = 1.35) -> list[float]:
    """Geometric ladder of pulse durations ending exactly at t_final."""
    if t_final <= 0:
        raise LinalgError("final duration must be positive")
    if t_final <= t_start:
        return [t_final]
    out = []
    t = t_start
    while t < t_final * (1.0 - 1e-12):
        out.append(t)
        t *= factor
    out.append(float(t_final))
    return out


def _smooth_l1(omega: np.ndarray, delta: float = 1e-3):
    """Pseudo-Huber |omega| (smooth near 0, so quasi-Newton steps stay exact)."""
    root = np.sqrt(omega**2 + delta**2)
    return float(np.sum(root - delta)), omega / root


def _model_noise_floor(p_model: np.ndarray, shots: int) -> float:
    """Expected multinomial MSE floor from model probabilities (robust at S=1)."""
    if shots == 0:
        return 0.0
    return float(np.mean(np.sum(p_model * (1.0 - p_model), axis=1))) / shots


def _refine_stage(
    omega: np.ndarray,
    dataset: Dataset,
    model: ForwardModel,
    kind: DistanceKind,
    lam: float,
    maxiter: int,
    prox: float = 0.0,
) -> tuple[np.ndarray, float]:
    """Quasi-Newton local refinement of cost + lam * smooth-L1 on one stage.

    With prox > 0 a quadratic anchor to the entry point is added, which stops
    the refinement from drifting along parameter directions the stage's
    (short-duration, few-pulse) data do not constrain.
    """
    p_hat = dataset.estimated_probs()
    anchor = np.array(omega, dtype=float)
    scale = prox / max(1, anchor.size)

    def objective(x):
        c, g = cost_grad(x, dataset.pulses, p_hat, model, kind)
        if lam > 0.0:
            r, dr = _smooth_l1(x)
            c, g = c + lam * r, g + lam * dr
        if prox > 0.0:
            d = x - anchor
            c, g = c + 0.5 * scale * float(d @ d), g + scale * d
        return c, g

    res = minimize(
        objective,
        omega,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": maxiter, "maxfun": 3 * maxiter, "ftol": 1e-20, "gtol": 1e-16},
    )
    if not np.all(np.isfinite(res.x)):
        raise FitDivergedError("non-finite parameters during ladder refinement")
    return res.x, float(res.fun)


def _stage_model(model: ForwardModel, dataset: Dataset) -> ForwardModel:
    duration = float(dataset.meta.get("T", model.duration))
    return model if model.duration == duration else _with_duration(model, duration)


def ladder_joint_cost(
    omega: np.ndarray,
    datasets: list[Dataset],
    model: ForwardModel,
    kind: DistanceKind = DistanceKind.MSE,
    pulse_idx: np.ndarray | None = None,
) -> float:
    """Mean stage cost across all ladder datasets (data-only selection metric).

    pulse_idx restricts the evaluation to a pulse subset, e.g. held-out
    pulses for cross-validated selection.
    """
    total = 0.0
    for ds in datasets:
        m = _stage_model(model, ds)
        if pulse_idx is None:
            total += cost(omega, ds, m, kind)
        else:
            p_hat = ds.estimated_probs()[pulse_idx]
            total += distance_batch(kind, p_hat, m.probs(omega, ds.pulses[pulse_idx])).mean()
    return float(total / len(datasets))


def fit_ladder(
    datasets: list[Dataset],
    model: ForwardModel,
    config: FitConfig = FitConfig(),
    omega0: np.ndarray | None = None,
    cycles: int = 4,
    stage_maxiter: int = 40,
    final_maxiter: int = 400,
    stage_pulse_cap: int = 512,
) -> EstimationReport:
    """Fit over datasets of increasing pulse duration, warm-starting each stage.

    Several short sweeps up the ladder (cycles x stage_maxiter iterations per
    stage) track the basin far more reliably than one long pass, because each
    revisit of a short-duration stage re-centers the phases before the next
    long-duration stage sharpens them.  The last dataset gets a long final
    polish and is the one the final cost is reported on; earlier stages are
    capped at stage_pulse_cap pulses for speed.  cycles=0 skips the sweeps
    entirely (useful for warm starts that are already in the right basin).  The L1 weight per stage
    follows the model-based shot-noise floor of that stage's data.
    """
    t_start = time.perf_counter()
    if not datasets:
        raise LinalgError("need at least one dataset")
    datasets = sorted(datasets, key=lambda d: d.meta.get("T", model.duration))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(7,)))
    omega = (
        np.array(omega0, dtype=float)
        if omega0 is not None
        else config.init_scale * rng.standard_normal(model.n_params)
    )

    capped = []
    for ds in datasets:
        if ds.n_pulses > stage_pulse_cap:
            ds = Dataset(
                ds.pulses[:stage_pulse_cap],
                ds.observations[:stage_pulse_cap],
                ds.shots,
                ds.meta,
            )
        capped.append(ds)

    cost_trace: list[float] = []
    reg_trace: list[float] = []
    for _ in range(max(0, cycles)):
        for ds in capped:
            stage_model = _stage_model(model, ds)
            floor = _model_noise_floor(stage_model.probs(omega, ds.pulses), ds.shots)
            lam = config.lambda0 * floor
            omega, c = _refine_stage(omega, ds, stage_model, config.distance, lam, stage_maxiter)
            cost_trace.append(c)
            reg_trace.append(lam)

    final_ds = datasets[-1]
    final_model = _stage_model(model, final_ds)
    floor = _model_noise_floor(final_model.probs(omega, final_ds.pulses), final_ds.shots)
    lam = config.lambda0 * floor
    omega, c = _refine_stage(
        omega, final_ds, final_model, config.distance, lam, final_maxiter
    )
    cost_trace.append(c)
    reg_trace.append(lam)
    return EstimationReport(
        omega_hat=omega,
        cost_trace=cost_trace,
        reg_trace=reg_trace,
        final_cost=cost(omega, final_ds, final_model, config.distance),
        config=config.to_dict(),
        wall_time=time.perf_counter() - t_start,
        n_epochs=len(cost_trace),
    )


def _joint_objective(datasets, models, lam, idx):
    """Mean cost over several (dataset, model) stages plus smooth-L1."""

    def objective(x):
        c_tot = 0.0
        g_tot = np.zeros_like(x)
        for ds, m in zip(datasets, models):
            c, g = cost_grad(x, ds.pulses[idx], ds.estimated_probs()[idx], m, DistanceKind.MSE)
            c_tot += c
            g_tot += g
        c_tot /= len(datasets)
        g_tot /= len(datasets)
        if lam > 0.0:
            r, dr = _smooth_l1(x)
            c_tot, g_tot = c_tot + lam * r, g_tot + lam * dr
        return c_tot, g_tot

    return objective


def _joint_refine(omega, datasets, models, lam, maxiter, idx, bounds=None):
    if maxiter <= 0:
        c, _ = _joint_objective(datasets, models, lam, idx)(omega)
        return omega, float(c)
    res = minimize(
        _joint_objective(datasets, models, lam, idx),
        omega,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": maxiter, "maxfun": 3 * maxiter, "ftol": 1e-20, "gtol": 1e-16},
    )
    if not np.all(np.isfinite(res.x)):
        raise FitDivergedError("non-finite parameters during joint refinement")
    return res.x, float(res.fun)


def fit_ladder_joint(
    datasets: list[Dataset],
    model: ForwardModel,
    config: FitConfig = FitConfig(),
    omega0: np.ndarray | None = None,
    acquire_duration: float = 0.3,
    stage_maxiter: int = 20,
    joint_maxiter: int = 150,
    stage_pulse_cap: int = 128,
    joint_pulse_cap: int | None = None,
    pulse_idx: np.ndarray | None = None,
    bounds: np.ndarray | None = None,
) -> EstimationReport:
    """Continuation over cumulative duration-ladder costs, then a joint polish.

    Unlike the per-stage cyclic schedule, every refinement here minimizes the
    mean cost over *all* rungs up to the current one, so no refinement step can
    drift along parameter directions that shorter durations leave
    unconstrained.  Rungs at or below acquire_duration are folded into the
    first cumulative subset (their individual landscapes barely constrain the
    parameters); the final polish uses every rung.  pulse_idx restricts
    training to a subset of pulses, e.g. to hold pulses out for
    cross-validated model selection.  bounds, an (n_params, 2) array of
    box constraints, restricts the search to e.g. the device's published
    coupling tolerances, excluding far-away spurious basins.
    """
    t_start = time.perf_counter()
    if not datasets:
        raise LinalgError("need at least one dataset")
    datasets = sorted(datasets, key=lambda d: d.meta.get("T", model.duration))
    models = [_stage_model(model, ds) for ds in datasets]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(7,)))
    omega = (
        np.array(omega0, dtype=float)
        if omega0 is not None
        else config.init_scale * rng.standard_normal(model.n_params)
    )
    n_pulses = datasets[0].n_pulses
    idx = np.arange(n_pulses) if pulse_idx is None else np.asarray(pulse_idx, dtype=int)

    durations = [m.duration for m in models]
    start = max(1, int(np.searchsorted(durations, acquire_duration, side="right")))

    def floor_lam(dss, mods, sub):
        floor = float(
            np.mean([_model_noise_floor(m.probs(omega, d.pulses[sub]), d.shots)
                     for d, m in zip(dss, mods)])
        )
        return config.lambda0 * floor

    cost_trace: list[float] = []
    reg_trace: list[float] = []
    stage_idx = idx[:stage_pulse_cap]
    for k in range(start, len(datasets) + 1):
        dss, mods = datasets[:k], models[:k]
        lam = floor_lam(dss, mods, stage_idx)
        omega, c = _joint_refine(omega, dss, mods, lam, stage_maxiter, stage_idx, bounds)
        cost_trace.append(c)
        reg_trace.append(lam)

    joint_idx = idx if joint_pulse_cap is None else idx[:joint_pulse_cap]
    lam = floor_lam(datasets, models, joint_idx)
    omega, c = _joint_refine(omega, datasets, models, lam, joint_maxiter, joint_idx, bounds)
    cost_trace.append(c)
    reg_trace.append(lam)
    return EstimationReport(
        omega_hat=omega,
        cost_trace=cost_trace,
        reg_trace=reg_trace,
        final_cost=cost(omega, datasets[-1], models[-1], config.distance),
        config=config.to_dict(),
        wall_time=time.perf_counter() - t_start,
        n_epochs=len(cost_trace),
    )


# ---------------------------------------------------------------------------
# validation and the gauge diagnostic


def validation_pulses(n_pulses: int, n_drives: int, seed: int = 1234) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2,)))
    return rng.standard_normal((n_pulses, n_drives))


def validate(
    omega: np.ndarray,
    model: ForwardModel,
    system: TrueSystem,
    n_pulses: int = 256,
    duration: float = 1.0,
    seed: int = 1234,
    kind: DistanceKind = DistanceKind.MSE,
) -> float:
    """V(omega) against exact, shot-free, SPAM-free truth probabilities.

    The validation pulse set depends only on (seed, n_pulses) and always
    uses unit-variance pulses of the given (default unit) duration.
    """
    pulses = validation_pulses(n_pulses, system.basis.size, seed)
    exact = true_probs(system, 0.0, pulses, duration)
    model_t = model if model.duration == duration else _with_duration(model, duration)
    predicted = model_t.probs(omega, pulses)
    return float(np.mean(distance_batch(kind, exact, predicted)))


def _with_duration(model: ForwardModel, duration: float) -> ForwardModel:
    return ForwardModel(
        basis=model.basis,
        n_drives=model.n_drives,
        kind=model.kind,
        duration=duration,
        collapse_ops=model.collapse_ops,
        lindblad_steps=model.lindblad_steps,
        label=model.label,
    )


class GaugeError(NamedTuple):
    error: float  # mean squared alpha difference at the optimal rotation
    theta: float


def parameter_error_mod_gauge(
    alpha_hat: np.ndarray, alpha_true: np.ndarray, n_qubits: int = 3
) -> GaugeError:
    """Mean squared alpha error minimized over the z-rotation gauge angle.

    Scans theta densely over [0, 2pi), then refines the best bracket with
    a bounded scalar minimization.
    """
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    alpha_true = np.asarray(alpha_true, dtype=float)
    if alpha_hat.shape != alpha_true.shape:
        raise LinalgError("alpha shape mismatch")

    def objective(theta: float) -> float:
        return float(np.mean((gauge_rotate_alpha(alpha_hat, theta, n_qubits) - alpha_true) ** 2))

    thetas = np.linspace(0.0, 2.0 * np.pi, 721, endpoint=False)
    values = [objective(t) for t in thetas]
    best = int(np.argmin(values))
    span = thetas[1] - thetas[0]
    res = minimize_scalar(
        objective,
        bounds=(thetas[best] - span, thetas[best] + span),
        method="bounded",
        options={"xatol": 1e-12},
    )
    if res.fun <= values[best]:
        return GaugeError(float(res.fun), float(res.x) % (2.0 * np.pi))
    return GaugeError(float(values[best]), float(thetas[best]))
