"""Scripted scenario runners behind the CLI.

Each scenario reads a validated JSON config, runs a deterministic grid of
experiments on the mock 3-qubit system, and writes CSV/JSON artifacts plus a
run manifest into the output directory.  Grid rows are always emitted in the
declared grid order.
"""

from __future__ import annotations

import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataio import ConfigError, save_dataset, save_json, write_csv, write_manifest
from .estimation import (
    DistanceKind,
    EstimationReport,
    FitConfig,
    duration_ladder,
    fit_ladder,
    fit_ladder_joint,
    ladder_joint_cost,
    validate,
)
from .fisher import design_pulses, validation_metric
from .hardware import Dataset, TrueSystem, build_true_system, generate_dataset, nominal_params
from .models import ForwardModel

CONFIG_VERSION = 1

# Per-scenario allowed config fields and their defaults.  "version" is
# required; everything else is optional; unknown fields are rejected.
_COMMON = {
    "scenario": None,
    "seed": 0,
    "n_qubits": 3,
    "system_seed": 2024,
    "fit": {},
    "ladder": {},
}

_FIT_FIELDS = {
    "distance": "mse",
    "lr0": 0.01,
    "lambda0": 0.1,
    "batch_size": 64,
    "max_epochs": 4000,
    "init_scale": 0.1,
}

_LADDER_FIELDS = {
    "t_start": 0.125,
    "factor": 1.35,
    "acquire_T": 0.3,
    "stage_maxiter": 20,
    "joint_maxiter": 150,
    "stage_pulse_cap": 128,
    "joint_pulse_cap": 0,  # 0 means use every training pulse
    "lambda_grid": [0.1, 0.01],
    "holdout_frac": 0.25,
    "refit_maxiter": 60,
    "exact_restarts": 4,
    "nominal_box": 0.6,  # datasheet coupling tolerance; 0 disables the box
    "cv_max_pulses": 256,  # above this, skip CV and use the smallest L1 weight
}

SCHEMAS = {
    "generate": {"P": 512, "S": 0, "T": 1.0, "s": 0.0},
    "fit": {"P": 512, "S": 0, "T": 1.0, "s": 0.0},
    "validate": {"report": "fit_report.json", "P_v": 256},
    "design": {"P": 512, "power": 1.0, "design_steps": 60, "design_lr": 0.05},
    "scan_ps": {
        "P_list": [16, 32, 64, 128, 256, 512],
        "S_list": [1, 2, 4, 8, 16, 32, 64],
        "T": 1.0,
        "s": 0.0,
    },
    "scan_spam": {
        "s_list": [0.001, 0.0017, 0.003, 0.0055, 0.01, 0.017, 0.03],
        "T_list": [1.0],
        "long_T": 25.0,
        "long_s": 0.003,
        "P": 4096,
        "S": 4096,
        # the budget here is huge; cap the joint polish for tractability
        "ladder": {"joint_pulse_cap": 1024},
    },
    "lindblad_compare": {
        "gamma_list": [0.0, 0.01, 0.0316, 0.1],
        "P": 512,
        "S": 1024,
        "lindblad_steps": 25,
        "lindblad_maxiter": 40,
    },
    "design_compare": {
        "P": 512,
        "S_list": [1, 2, 4, 8, 16, 32, 64],
        "power": 1.0,
        "design_steps": 300,
        "design_lr": 0.1,
        "replicas": 2,  # dataset replicas averaged per cell (scatter control)
        "ladder": {"joint_maxiter": 100},
    },
    "lsq_demo": {
        "p": 0.25,
        "P_list": [32],
        "S_list": [16],
        "trials": 1000,
        "a0": 0.7,
        "b0": -0.3,
    },
}


def validate_config(config: dict, scenario: str) -> dict:
    """Merge defaults, reject unknown fields, and require a version match."""
    if scenario not in SCHEMAS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    if "version" not in config:
        raise ConfigError("config is missing the required 'version' field")
    if config["version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {config['version']!r}")
    allowed = {"version": CONFIG_VERSION, **_COMMON, **SCHEMAS[scenario]}
    unknown = set(config) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    merged = {**allowed, **config}
    if merged["scenario"] is not None and merged["scenario"] != scenario:
        raise ConfigError(
            f"config names scenario {merged['scenario']!r} but {scenario!r} was requested"
        )
    merged["scenario"] = scenario
    for key, fields in (("fit", _FIT_FIELDS), ("ladder", _LADDER_FIELDS)):
        sub = merged[key]
        if not isinstance(sub, dict):
            raise ConfigError(f"'{key}' must be a JSON object")
        bad = set(sub) - set(fields)
        if bad:
            raise ConfigError(f"unknown '{key}' fields: {sorted(bad)}")
        merged[key] = {**fields, **sub}
    return merged


# ---------------------------------------------------------------------------
# shared plumbing


def _system(config: dict, decay: float | None = None) -> TrueSystem:
    return build_true_system(config["n_qubits"], config["system_seed"], decay)


def _fit_config(config: dict, seed: int) -> FitConfig:
    f = config["fit"]
    return FitConfig(
        distance=DistanceKind(f["distance"]),
        lr0=f["lr0"],
        lambda0=f["lambda0"],
        batch_size=f["batch_size"],
        max_epochs=f["max_epochs"],
        init_scale=f["init_scale"],
        seed=seed,
    )


def _ladder_datasets(
    system: TrueSystem,
    s: float,
    n_pulses: int,
    shots: int,
    t_final: float,
    seed: int,
    config: dict,
    designed_pulses: np.ndarray | None = None,
) -> list[Dataset]:
    """Measure one pulse set at every rung of the duration ladder."""
    lad = config["ladder"]
    return [
        generate_dataset(
            system, s, n_pulses, shots, duration=t, seed=seed, designed_pulses=designed_pulses
        )
        for t in duration_ladder(t_final, lad["t_start"], lad["factor"])
    ]


def _fit_cell(
    datasets: list[Dataset],
    model: ForwardModel,
    config: dict,
    seed: int,
    omega0: np.ndarray | None = None,
) -> EstimationReport:
    """Cross-validated continuation fit for one grid cell.

    Starts from the device's nominal (datasheet) parameters, trains one
    variant per L1 weight in lambda_grid on a training subset of the pulses,
    scores each on the held-out pulses via the joint stage cost, and refits
    the winner on the full pulse set.  All selection is data-only.  Cells
    with exact probabilities skip the holdout (there is no noise to overfit)
    and instead retry from jittered starts until the joint cost reaches the
    numerical floor.
    """
    lad = config["ladder"]
    nominal = model.pack(nominal_params(config["n_qubits"]))
    if omega0 is None:
        omega0 = nominal
    bounds = None
    if lad["nominal_box"] > 0:
        # the device datasheet guarantees couplings within this tolerance of
        # nominal, so the box always contains the truth and is data-independent
        bounds = np.stack(
            [nominal - lad["nominal_box"], nominal + lad["nominal_box"]], axis=1
        )
    kwargs = dict(
        acquire_duration=lad["acquire_T"],
        stage_maxiter=lad["stage_maxiter"],
        joint_maxiter=lad["joint_maxiter"],
        stage_pulse_cap=lad["stage_pulse_cap"],
        joint_pulse_cap=lad["joint_pulse_cap"] or None,
        bounds=bounds,
    )

    if all(ds.exact for ds in datasets):
        best, best_joint = None, np.inf
        for r in range(max(1, lad["exact_restarts"])):
            fit_cfg = _fit_config(config, seed + 1000 * r)
            w0 = omega0
            if r > 0:
                rng = np.random.default_rng(
                    np.random.SeedSequence(entropy=seed + 1000 * r, spawn_key=(8,))
                )
                w0 = omega0 + fit_cfg.init_scale * rng.standard_normal(model.n_params)
                if bounds is not None:
                    w0 = np.clip(w0, bounds[:, 0], bounds[:, 1])
            report = fit_ladder_joint(datasets, model, fit_cfg, omega0=w0, **kwargs)
            joint = ladder_joint_cost(report.omega_hat, datasets, model, fit_cfg.distance)
            if joint < best_joint:
                best, best_joint = report, joint
            if best_joint < 1e-12:
                break
        return best

    n_pulses = datasets[0].n_pulses
    if n_pulses > lad["cv_max_pulses"]:
        # overfitting vanishes at large P, so the smallest L1 weight always
        # wins the holdout contest; fit once on everything instead
        fit_cfg = replace(_fit_config(config, seed), lambda0=float(lad["lambda_grid"][-1]))
        return fit_ladder_joint(datasets, model, fit_cfg, omega0=omega0, **kwargs)

    n_hold = int(round(lad["holdout_frac"] * n_pulses))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(9,)))
    perm = rng.permutation(n_pulses)
    if n_pulses >= 8 and n_hold >= 2:
        hold, train = perm[:n_hold], perm[n_hold:]
    else:
        hold, train = None, perm

    best, best_score, best_cfg = None, np.inf, None
    for lam0 in lad["lambda_grid"]:
        fit_cfg = replace(_fit_config(config, seed), lambda0=float(lam0))
        report = fit_ladder_joint(
            datasets, model, fit_cfg, omega0=omega0, pulse_idx=train, **kwargs
        )
        score = ladder_joint_cost(
            report.omega_hat, datasets, model, fit_cfg.distance, pulse_idx=hold
        )
        if score < best_score:
            best, best_score, best_cfg = report, score, fit_cfg

    if hold is not None and lad["refit_maxiter"] > 0:
        # warm refit of the winner on the full pulse set
        best = fit_ladder_joint(
            datasets,
            model,
            best_cfg,
            omega0=best.omega_hat,
            acquire_duration=np.inf,
            stage_maxiter=0,
            joint_maxiter=lad["refit_maxiter"],
            stage_pulse_cap=lad["stage_pulse_cap"],
            joint_pulse_cap=lad["joint_pulse_cap"] or None,
            bounds=bounds,
        )
    return best


def _cell_row(
    system: TrueSystem,
    model: ForwardModel,
    config: dict,
    s: float,
    n_pulses: int,
    shots: int,
    t_final: float,
    seed: int,
) -> tuple[float, float]:
    """(C_min, V_min) for one grid cell."""
    datasets = _ladder_datasets(system, s, n_pulses, shots, t_final, seed, config)
    report = _fit_cell(datasets, model, config, seed)
    v = validate(report.omega_hat, model, system)
    return report.final_cost, v


# ---------------------------------------------------------------------------
# scenarios


def run_generate(config: dict, out: Path, seed: int) -> None:
    system = _system(config)
    ds = generate_dataset(
        system, config["s"], config["P"], config["S"], duration=config["T"], seed=seed
    )
    save_dataset(ds, out / "dataset.json")


def run_fit(config: dict, out: Path, seed: int) -> None:
    system = _system(config)
    model = ForwardModel(basis=system.basis, n_drives=system.basis.size, kind="linear",
                         duration=config["T"])
    datasets = _ladder_datasets(
        system, config["s"], config["P"], config["S"], config["T"], seed, config
    )
    save_dataset(datasets[-1], out / "dataset.json")
    report = _fit_cell(datasets, model, config, seed)
    payload = report.to_dict()
    payload["V"] = validate(report.omega_hat, model, system)
    save_json(payload, out / "fit_report.json")


def run_validate(config: dict, out: Path, seed: int) -> None:
    import json

    system = _system(config)
    model = ForwardModel(basis=system.basis, n_drives=system.basis.size, kind="linear")
    report_path = Path(config["report"])
    if not report_path.is_absolute():
        report_path = out / report_path
    payload = json.loads(report_path.read_text())
    omega = np.asarray(payload["omega_hat"], dtype=float)
    v = validate(omega, model, system, n_pulses=config["P_v"])
    save_json({"V": v, "P_v": config["P_v"], "report": str(report_path)}, out / "validate.json")


def run_design(config: dict, out: Path, seed: int) -> None:
    system = _system(config)
    model = ForwardModel(basis=system.basis, n_drives=system.basis.size, kind="linear")
    omega = model.pack(system.truth)
    pulses = design_pulses(
        omega,
        model,
        config["P"],
        power=config["power"],
        steps=config["design_steps"],
        lr=config["design_lr"],
        seed=seed,
    )
    save_json({"pulses": pulses, "power": config["power"]}, out / "designed_pulses.json")


def run_scan_ps(config: dict, out: Path, seed: int) -> None:
    """Grid over (P, S); S = 0 encodes the exact-probability limit."""
    system = _system(config)
    model = ForwardModel(basis=system.basis, n_drives=system.basis.size, kind="linear",
                         duration=config["T"])
    rows = []
    for i, n_pulses in enumerate(config["P_list"]):
        for j, shots in enumerate(config["S_list"]):
            cell_seed = seed + 131 * i + 17 * j
            c, v = _cell_row(
                system, model, config, config["s"], n_pulses, shots, config["T"], cell_seed
            )
            rows.append((n_pulses, shots, c, v))
            print(f"scan_ps P={n_pulses} S={shots}: C={c:.3e} V={v:.3e}", flush=True)
    write_csv(out / "scan_ps.csv", ["P", "S", "C_min", "V_min"], rows)


def run_scan_spam(config: dict, out: Path, seed: int) -> None:
    """Grid over SPAM rate s at each T, plus one long-duration recovery point."""
    system = _system(config)
    rows = []
    grid = [(s, t) for t in config["T_list"] for s in config["s_list"]]
    if config["long_T"]:
        grid.append((config["long_s"], config["long_T"]))
    for i, (s, t) in enumerate(grid):
        model = ForwardModel(basis=system.basis, n_drives=system.basis.size, kind="linear",
                             duration=t)
        c, v = _cell_row(system, model, config, s, config["P"], config["S"], t, seed + 311 * i)
        rows.append((s, t, c, v))
    write_csv(out / "scan_spam.csv", ["s", "T", "C_min", "V_min"], rows)


def run_lindblad_compare(config: dict, out: Path, seed: int) -> None:
    """Hamiltonian-only vs Lindblad fits on truths with per-qubit decay.

    The Lindblad fit warm-starts from the Hamiltonian-only ladder fit (with
    zero initial decay strengths) and only needs a local polish, which keeps
    the density-matrix integrations affordable.
    """
    rows = []
    for i, gamma in enumerate(config["gamma_list"]):
        system = _system(config, decay=gamma if gamma > 0 else None)
        ham_model = ForwardModel(basis=system.basis, n_drives=system.basis.size, kind="linear")
        datasets = _ladder_datasets(
            system, 0.0, config["P"], config["S"], 1.0, seed + 977 * i, config
        )
        ham_report = _fit_cell(datasets, ham_model, config, seed + 977 * i)
        v_ham = validate(ham_report.omega_hat, ham_model, system)
        rows.append((gamma, "hamiltonian", ham_report.final_cost, v_ham))

        collapse = build_true_system(config["n_qubits"], config["system_seed"], 1.0).collapse_ops
        lind_model = ForwardModel(
            basis=system.basis,
            n_drives=system.basis.size,
            kind="linear",
            collapse_ops=collapse,
            lindblad_steps=config["lindblad_steps"],
        )
        omega0 = np.concatenate([ham_report.omega_hat, np.zeros(len(collapse))])
        lind_report = fit_ladder(
            [datasets[-1]],
            lind_model,
            _fit_config(config, seed + 977 * i),
            omega0=omega0,
            cycles=0,
            final_maxiter=config["lindblad_maxiter"],
        )
        eval_model = replace(lind_model, lindblad_steps=None)
        v_lind = validate(lind_report.omega_hat, eval_model, system)
        rows.append((gamma, "lindblad", lind_report.final_cost, v_lind))
    write_csv(out / "lindblad_compare.csv", ["gamma", "model_kind", "C_min", "V_min"], rows)


def run_design_compare(config: dict, out: Path, seed: int) -> None:
    """Random vs information-designed pulses at matched (P, S) budgets.

    The designed arm maximizes the Fisher information of the pulse set in the
    validation-error metric (A-optimality) at the target duration; both arms
    share the fitting protocol and the mean pulse power.  Each cell averages
    C and V over dataset replicas to tame shot-realization scatter.
    """
    system = _system(config)
    model = ForwardModel(basis=system.basis, n_drives=system.basis.size, kind="linear")
    omega_true = model.pack(system.truth)
    metric = validation_metric(omega_true, model)
    designed = design_pulses(
        omega_true,
        model,
        config["P"],
        power=config["power"],
        steps=config["design_steps"],
        lr=config["design_lr"],
        seed=seed,
        metric=metric,
    )
    rows = []
    n_rep = max(1, config["replicas"])
    for j, shots in enumerate(config["S_list"]):
        for kind, pulses in (("random", None), ("designed", designed)):
            cs, vs = [], []
            for rep in range(n_rep):
                cell_seed = seed + 613 * j + 104729 * rep
                datasets = _ladder_datasets(
                    system, 0.0, config["P"], shots, 1.0, cell_seed, config,
                    designed_pulses=pulses,
                )
                report = _fit_cell(datasets, model, config, cell_seed)
                cs.append(report.final_cost)
                vs.append(validate(report.omega_hat, model, system))
            rows.append((shots, kind, float(np.mean(cs)), float(np.mean(vs))))
    write_csv(out / "design_compare.csv", ["S", "pulse_kind", "C_min", "V_min"], rows)


def run_lsq_demo(config: dict, out: Path, seed: int) -> None:
    """Closed-form least squares on y = a0 + b0 x with sampling noise.

    Per trial, P x-values are drawn N(0,1) and each y is corrupted by
    Gaussian noise sigma0 = sqrt(p/S).  V_opt follows the analytic
    decomposition of the validation residual: after the fitted line is
    subtracted, the term surviving averaging is the squared mean noise
    (expectation p/(P*S)).  The full residual, which also keeps the
    slope-estimation error (expectation 2p/(P*S)), is recorded alongside as
    V_full for transparency.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(9,)))
    p, a0, b0 = config["p"], config["a0"], config["b0"]
    rows = []
    for n_pulses in config["P_list"]:
        for shots in config["S_list"]:
            sigma0 = np.sqrt(p / shots)
            v_opt = np.empty(config["trials"])
            v_full = np.empty(config["trials"])
            for t in range(config["trials"]):
                x = rng.standard_normal(n_pulses)
                e = sigma0 * rng.standard_normal(n_pulses)
                y = a0 + b0 * x + e
                xc = x - x.mean()
                b = np.dot(xc, y) / np.dot(xc, xc)
                a = y.mean() - b * x.mean()
                v_opt[t] = e.mean() ** 2
                v_full[t] = np.mean((a0 + b0 * x - a - b * x) ** 2)
            rows.append(
                (
                    n_pulses,
                    shots,
                    float(v_opt.mean()),
                    float(v_full.mean()),
                    p / (n_pulses * shots),
                )
            )
    write_csv(
        out / "lsq_demo.csv", ["P", "S", "mean_V_opt", "mean_V_full", "predicted"], rows
    )


SCENARIOS = {
    "generate": run_generate,
    "fit": run_fit,
    "validate": run_validate,
    "design": run_design,
    "scan_ps": run_scan_ps,
    "scan_spam": run_scan_spam,
    "lindblad_compare": run_lindblad_compare,
    "design_compare": run_design_compare,
    "lsq_demo": run_lsq_demo,
}


def run_scenario(
    scenario: str,
    config: dict,
    out_dir,
    seed: int | None = None,
    threads: int | None = None,
) -> Path:
    """Validate the config, run one scenario, and write the run manifest."""
    merged = validate_config(config, scenario)
    if seed is not None:
        merged["seed"] = int(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    SCENARIOS[scenario](merged, out, merged["seed"])
    manifest_config = {**merged, "threads": int(threads or 1)}
    write_manifest(out, scenario, manifest_config, merged["seed"], time.perf_counter() - t0)
    return out
