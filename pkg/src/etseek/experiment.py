"""Configuration-driven experiment runner.

Builds the configured closed-loop system, simulates it, runs the enabled
analyses, and exports trajectory CSVs, plot-ready series, and JSON reports.
Every output directory gets a ``config.resolved.yaml`` sidecar so runs are
reproducible from their artifacts alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import analysis
from .config import (
    ExperimentConfig,
    build_cost,
    build_dither,
    build_system,
    resolve_initial_state,
    resolve_sim_config,
    serialize_config,
)
from .controllers import state_names
from .errors import EtseekError
from .hybrid import HybridArc, SimulationConfig, simulate
from .plants import finite_difference_gradient, validate_dither


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class RunResult:
    config: ExperimentConfig
    arc: HybridArc
    checks: List[Check]
    reports: dict
    files: List[str]
    out_dir: Optional[str]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> dict:
        return {
            "controller": self.config.controller,
            "termination": self.arc.termination.value,
            "jump_count": self.arc.jump_count,
            "final_time": self.arc.final_time,
            "final_state": [float(v) for v in self.arc.final_state],
            "checks": [c.to_dict() for c in self.checks],
            "reports": self.reports,
            "files": self.files,
            "out_dir": self.out_dir,
        }


def _companion_controller(kind: str) -> str:
    # lie-bracket ES is compared against the target system, classical ES
    # against its averaged system
    return "classical_avg" if kind == "classical_es" else "target"


def _companion_config(cfg: ExperimentConfig) -> ExperimentConfig:
    other = cfg.model_copy(deep=True)
    other.controller = _companion_controller(cfg.controller)
    other.simulation.flow_step = 1e-3
    other.simulation.record_every = 1
    return other


def _preflight_checks(cfg: ExperimentConfig, cost, dither) -> List[Check]:
    checks = []
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(20):
        u = rng.uniform(-10.0, 10.0, cost.dimension)
        g = cost.gradient(u)
        g_fd = finite_difference_gradient(cost, u)
        denom = max(1.0, float(np.linalg.norm(g)))
        worst = max(worst, float(np.linalg.norm(g - g_fd)) / denom)
    checks.append(
        Check("gradient_consistency", worst <= 1e-6, f"max relative residual {worst:.2e}")
    )
    if cfg.controller in ("lie_es", "classical_es"):
        rep = validate_dither(dither)
        checks.append(
            Check(
                "dither_moments",
                rep.passed,
                f"mean {rep.mean_residual:.2e}, second moment {rep.second_moment_residual:.2e}",
            )
        )
    return checks


def _attractor_spec(cfg: ExperimentConfig, cost, target_arc) -> analysis.AttractorSpec:
    beta2 = cfg.analysis.beta2 or analysis.default_beta2(cost, cfg.params.k)
    if cfg.analysis.beta1 is not None:
        return analysis.AttractorSpec(
            cfg.analysis.beta1, beta2, cfg.params.rho, cost, cfg.params.k
        )
    return analysis.calibrate_beta1(
        cost, cfg.params.k, cfg.params.rho, [target_arc], beta2=beta2
    )


def _write_plot_series(arc: HybridArc, n: int, out: Path) -> List[str]:
    ts = np.concatenate([iv.times for iv in arc.intervals])
    X = np.vstack([iv.states for iv in arc.intervals])
    u = X[:, 0:n]
    u_hat = X[:, 0:n] - X[:, 2 * n : 3 * n]
    y_hat = X[:, n : 2 * n] - X[:, 3 * n : 4 * n]
    files = []
    for name, block in (("plot_u", u), ("plot_uhat", u_hat), ("plot_yhat", y_hat)):
        path = out / f"{name}.csv"
        header = "t," + ",".join(f"{name.split('_')[1]}{i+1}" for i in range(n))
        np.savetxt(
            path, np.column_stack([ts, block]), delimiter=",",
            header=header, comments="", fmt="%.17g",
        )
        files.append(str(path))
    return files


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> RunResult:
    """Simulate the configured system, analyze the arc, and write artifacts."""
    cost = build_cost(cfg)
    dither = build_dither(cfg) if cfg.controller in ("lie_es", "classical_es") else None
    checks = _preflight_checks(cfg, cost, dither)
    system = build_system(cfg, cost=cost, dither=dither)
    sim = resolve_sim_config(cfg)
    initial = resolve_initial_state(cfg)
    arc = simulate(system, initial, sim)

    reports: dict = {
        "termination": arc.termination.value,
        "jump_count": arc.jump_count,
        "final_time": arc.final_time,
    }
    companion_arc = None
    if cfg.analysis.closeness_to_target or cfg.analysis.envelope:
        other_cfg = _companion_config(cfg)
        companion_arc = simulate(
            build_system(other_cfg, cost=cost),
            resolve_initial_state(other_cfg),
            resolve_sim_config(other_cfg),
        )

    if cfg.analysis.dwell:
        dwell = analysis.dwell_time_check(arc)
        reports["dwell"] = dwell.to_dict()
        checks.append(
            Check("dwell_bound", dwell.bound_satisfied, f"fitted d = {dwell.fitted_d}")
        )
        checks.append(
            Check("no_zeno", not dwell.zeno_suspected, f"min gap {dwell.min_gap}")
        )
    if cfg.analysis.stats:
        reports["trigger_stats"] = analysis.trigger_stats(arc).to_dict()
    if cfg.analysis.closeness_to_target:
        horizon = min(cfg.analysis.closeness_horizon, cfg.simulation.max_t)
        close = analysis.closeness(arc, companion_arc, horizon, cfg.analysis.closeness_grid)
        reports["closeness"] = close.to_dict()
        reports["closeness"]["compared_to"] = _companion_controller(cfg.controller)
        checks.append(
            Check(
                "closeness_finite",
                math.isfinite(close.epsilon_achieved),
                f"epsilon_achieved {close.epsilon_achieved}",
            )
        )
    if cfg.analysis.envelope:
        spec = _attractor_spec(cfg, cost, companion_arc)
        env = analysis.practical_stability_envelope([arc], spec, cfg.analysis.nu)
        reports["envelope"] = env.to_dict()
        reports["envelope"]["beta1"] = spec.beta1
        reports["envelope"]["beta2"] = spec.beta2
        reports["envelope"]["beta_source"] = "calibrated" if spec.calibrated else "configured"
        checks.append(
            Check("envelope_within_nu", env.all_within_nu, f"nu = {cfg.analysis.nu}")
        )

    files: List[str] = []
    target_dir = out_dir if out_dir is not None else cfg.output_dir
    if target_dir is not None:
        out = Path(target_dir)
        out.mkdir(parents=True, exist_ok=True)
        traj = out / "trajectory.csv"
        arc.write_csv(traj)
        files.append(str(traj))
        files.extend(_write_plot_series(arc, cost.dimension, out))
        sidecar = out / "config.resolved.yaml"
        sidecar.write_text(serialize_config(cfg))
        files.append(str(sidecar))
        report_path = out / "analysis.json"
        payload = {
            "config": cfg.model_dump(),
            "reports": reports,
            "checks": [c.to_dict() for c in checks],
        }
        report_path.write_text(json.dumps(payload, indent=2))
        files.append(str(report_path))

    return RunResult(cfg, arc, checks, reports, files, target_dir)


@dataclass
class SweepResult:
    parameter: str
    values: List[float]
    runs: List[RunResult]
    verdicts: List[Check]
    summary_file: Optional[str]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.verdicts) and all(r.all_passed for r in self.runs)

    def summary(self) -> dict:
        return {
            "parameter": self.parameter,
            "values": self.values,
            "verdicts": [c.to_dict() for c in self.verdicts],
            "runs": [r.summary() for r in self.runs],
            "summary_file": self.summary_file,
        }


def _sweep_parameter(cfg: ExperimentConfig):
    for name in ("epsilon", "a", "omega", "rho"):
        values = getattr(cfg.sweep, name)
        if values:
            return name, list(values)
    raise EtseekError("sweep requested but all sweep lists are empty")


def run_sweep(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> SweepResult:
    """Run the configured parameter sweep and summarize cross-run trends."""
    parameter, values = _sweep_parameter(cfg)
    base_dir = Path(out_dir if out_dir is not None else cfg.output_dir)
    runs: List[RunResult] = []
    for value in values:
        sub = cfg.model_copy(deep=True)
        setattr(sub.params, parameter, value)
        sub.sweep = type(cfg.sweep)()
        run_dir = base_dir / f"{parameter}_{value:g}"
        runs.append(run_experiment(sub, out_dir=str(run_dir)))

    verdicts: List[Check] = []
    if cfg.analysis.closeness_to_target:
        eps = [r.reports["closeness"]["epsilon_achieved"] for r in runs]
        grid = cfg.analysis.closeness_grid
        ok = all(b <= a + grid for a, b in zip(eps, eps[1:]))
        verdicts.append(
            Check("closeness_nonincreasing", ok, f"epsilon_achieved sequence {eps}")
        )
    if parameter == "rho":
        jumps = [r.arc.jump_count for r in runs]
        ok = all(b < a for a, b in zip(jumps, jumps[1:]))
        verdicts.append(Check("jumps_decreasing_in_rho", ok, f"jump counts {jumps}"))
    if cfg.analysis.envelope:
        tails = [max(r.reports["envelope"]["tail_maxima"]) for r in runs]
        ok = all(b <= a + 1e-12 for a, b in zip(tails, tails[1:]))
        verdicts.append(Check("tail_maxima_nonincreasing", ok, f"tail maxima {tails}"))

    base_dir.mkdir(parents=True, exist_ok=True)
    summary_path = base_dir / "sweep_summary.json"
    result = SweepResult(parameter, values, runs, verdicts, str(summary_path))
    summary_path.write_text(json.dumps(result.summary(), indent=2))
    return result
