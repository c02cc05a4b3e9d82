"""Ground state energies: quantum sweep against the classical infimum."""

import asyncio
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from experiments.quasiclassical.fixtures import build_modes, build_policy, build_spec, hypothesis_flags
from experiments.quasiclassical.report import RunReport
from shared.config import ExperimentConfig
from shared.numerics.spectral import (
    ClassicalProblem,
    GseOptions,
    GseResult,
    brute_force_single_atom,
    minimize_gse,
    refine_atoms,
)
from shared.tools.plots import plot_series
from shared.tools.tables import write_gse, write_measure

log = logging.getLogger("qclab.gse")


def gse_options(config: ExperimentConfig) -> GseOptions:
    g = config.gse
    return GseOptions(
        tol=g.tol,
        max_iterations=g.max_iterations,
        restarts=g.restarts,
        seed=config.run.seed,
        eigen_tol=config.run.eigen_tol,
        refine_atoms=g.refine_atoms,
    )


def _solve(config: ExperimentConfig, report: RunReport) -> GseResult | None:
    modes = build_modes(config.model)
    for message in hypothesis_flags(modes):
        report.flag(message)
    if modes.couples_zero_modes:
        report.flag("coupled zero-frequency mode: ground state comparison skipped")
        return None
    spec = build_spec(config, max(config.sweep.eps), cutoffs=(0,) * modes.size)
    result = minimize_gse(
        spec, config.sweep.eps, build_policy(config), gse_options(config), config.gse.workers
    )
    out = Path(config.run.output_dir)
    report.add_artifact(write_gse(out / "gse.csv", result))
    report.add_artifact(write_measure(out / "gse_minimizer.txt", result.minimizer))
    report.metrics.extend(
        {
            "eps": p.eps,
            "quantum_energy": p.quantum_energy,
            "classical_infimum": p.classical_infimum,
            "gap": abs(p.gap),
            "iterations": p.iterations,
        }
        for p in result.points
    )
    if config.run.figures:
        frame = pd.read_csv(out / "gse.csv")
        positive = bool((frame["gap"] > 0).all())
        report.add_artifact(plot_series(
            out / "gse_gap.svg", frame, "eps", ["gap"], "ground state energy gap",
            logx=True, logy=positive,
        ))
    _check_oracles(config, report, spec, result)
    return result


def _check_oracles(config: ExperimentConfig, report: RunReport, spec, result: GseResult):
    problem = ClassicalProblem.from_spec(spec)
    best = result.classical_infimum
    if config.gse.brute_force:
        brute, _ = brute_force_single_atom(problem)
        deviation = abs(best - brute)
        report.check(
            "SPEC-BRUTE-FORCE", deviation <= 1e-3 and best <= brute + 1e-8,
            f"alternating {best:.10g} vs brute force {brute:.10g}", deviation, 1e-3,
        )
    if config.gse.refine_atoms > 1:
        refined, mu = refine_atoms(problem, result.classical.z, config.gse.refine_atoms, config.run.seed)
        slack = 1e-8 * max(1.0, abs(best))
        report.check(
            "GSE-REFINE", refined >= best - slack,
            f"{mu.atoms}-atom measure reaches {refined:.10g} against {best:.10g}", refined, best,
        )


def _assert_result(config: ExperimentConfig, report: RunReport, result: GseResult):
    tolerance = config.run.tolerance
    trace = np.asarray(result.classical.trace)
    rise = float(np.max(np.diff(trace), initial=0.0))
    limit = 1e-9 * max(1.0, abs(result.classical_infimum))
    report.check("GSE-TRACE", rise <= limit, f"largest rise in the energy trace {rise:.2e}", rise, limit)

    for p in result.points:
        report.check(
            "GSE-UPPER", p.quantum_energy <= p.classical_infimum + tolerance,
            f"eps={p.eps:g}: sigma(H) = {p.quantum_energy:.10g} <= {p.classical_infimum:.10g}",
            p.quantum_energy, p.classical_infimum,
        )
        low = min(p.quantum_energy, p.classical_infimum)
        report.check(
            "GSE-FLOOR", low >= result.floor - 1e-8,
            f"eps={p.eps:g}: {low:.10g} >= floor {result.floor:.10g}", low, result.floor,
        )

    gaps = result.gaps
    steps = np.diff(gaps)
    report.check(
        "GSE-GAP-MONOTONE", bool(np.all(steps <= tolerance)),
        "gaps " + ", ".join(f"{g:.3e}" for g in gaps),
        float(steps.max(initial=0.0)), tolerance,
    )
    if not result.extrapolated:
        report.flag("no eps-halving pair in the sweep: extrapolation skipped")
        return
    extrapolated = abs(result.extrapolated[-1])
    limit = config.gse.relative_limit * result.h0_gap
    report.check(
        "GSE-EXTRAPOLATION", extrapolated <= limit,
        f"extrapolated gap {extrapolated:.3e} against {config.gse.relative_limit:g} x "
        f"spectral gap {result.h0_gap:.4g}",
        extrapolated, limit,
    )


async def cmd_gse(config: ExperimentConfig) -> RunReport:
    report = RunReport("gse", config.config_hash, config.run.seed)
    result = await asyncio.to_thread(_solve, config, report)
    if result is not None:
        _assert_result(config, report, result)
    log.info(report.summary())
    return report
