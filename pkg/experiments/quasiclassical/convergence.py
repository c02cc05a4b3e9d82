"""Effective potentials along an eps sweep: partial traces against their classical limit."""

import asyncio
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from experiments.quasiclassical.fixtures import (
    almost_periodic_target,
    build_grid,
    build_measure,
    build_modes,
    build_particles,
    build_state,
    check_adequacy,
    hypothesis_flags,
)
from experiments.quasiclassical.report import RunReport
from shared.config import ExperimentConfig
from shared.numerics.effective import classical_potential, partial_trace_potential
from shared.numerics.model import assemble_h0
from shared.numerics.spectral import (
    admissible_shift,
    default_probes,
    ground_energy,
    resolvent_distance,
)
from shared.tools.plots import plot_potentials, plot_series
from shared.tools.tables import write_potential, write_table

log = logging.getLogger("qclab.effective")

GAP_COLUMNS = ["eps", "sup_gap", "c_eps", "c_gap", "resolvent_distance", "resolvent_bound", "max_cutoff"]
RESOLUTION = 1e-13
RESOLVENT_RTOL = 1e-10


def mixture_separation(points: np.ndarray) -> float:
    """D = min_{i != j} ||z_i - z_j||^2 / 2."""
    best = np.inf
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            best = min(best, float(np.sum(np.abs(points[i] - points[j]) ** 2)) / 2)
    return best


def decay_slope(eps: np.ndarray, gaps: np.ndarray) -> float | None:
    """Least-squares slope of log(gap) against 1/eps over the resolvable gaps."""
    keep = gaps > RESOLUTION
    if keep.sum() < 2:
        return None
    slope, _ = np.polyfit(1.0 / eps[keep], np.log(gaps[keep]), 1)
    return float(slope)


def _sweep(config: ExperimentConfig, report: RunReport) -> pd.DataFrame:
    model = config.model
    grid = build_grid(model)
    modes = build_modes(model)
    particles = build_particles(grid, model)
    N = particles.n_particles
    origin = model.phase_origin
    out = Path(config.run.output_dir)
    for message in hypothesis_flags(modes):
        report.flag(message)
    check_adequacy(config, modes)

    mu = build_measure(config.state, modes)
    limit = classical_potential(mu, grid, modes, origin)
    c_mu = mu.field_energy(modes)
    report.add_artifact(write_potential(out / "potential_limit.csv", limit))

    sup_limit = float(np.max(np.abs(limit.samples)))
    bound = mu.potential_bound(modes)
    report.check(
        "EFF-BOUNDED", sup_limit <= bound + 1e-12,
        f"sup |V_mu| = {sup_limit:.6g} <= {bound:.6g}", sup_limit, bound,
    )
    if config.state.kind == "almost_periodic":
        target, _ = almost_periodic_target(config, grid, modes)
        gap = classical_potential(mu, grid, modes).sup_distance(target)
        scale = 1e-10 * (1 + float(np.max(np.abs(target.samples))))
        report.check("EFF-ALMOST-PERIODIC", gap <= scale, f"sup |V_f - V_b| = {gap:.2e}", gap, scale)

    h0 = assemble_h0(grid, particles)
    h0_ground = ground_energy(h0, tol=config.run.eigen_tol, seed=config.run.seed)
    h_limit = h0 + limit.operator(N)
    floor_limit = h0_ground.value - N * sup_limit
    probes = default_probes(h0.dim, config.run.seed, config.run.probes, extra=[h0_ground.vector])

    rows, curves = [], {"limit": limit.samples}
    for eps in sorted(config.sweep.eps, reverse=True):
        state = build_state(config, modes, eps)
        potential, c_eps = partial_trace_potential(state, grid, modes, origin)
        gap = potential.sup_distance(limit)
        sup_eps = float(np.max(np.abs(potential.samples)))
        floor_eps = h0_ground.value - N * sup_eps
        zeta = admissible_shift([floor_eps, floor_limit])
        distance = resolvent_distance(
            h0 + potential.operator(N), h_limit, zeta, probes, (floor_eps, floor_limit), RESOLVENT_RTOL
        )
        resolvent_bound = N * gap / ((floor_eps + zeta) * (floor_limit + zeta))
        rows.append({
            "eps": eps,
            "sup_gap": gap,
            "c_eps": c_eps,
            "c_gap": abs(c_eps - c_mu),
            "resolvent_distance": distance,
            "resolvent_bound": resolvent_bound,
            "max_cutoff": max(state.space.cutoffs, default=0),
        })
        curves[f"eps={eps:g}"] = potential.samples
        report.add_artifact(write_potential(out / f"potential_eps{eps:g}.csv", potential))
        log.info("eps=%g: sup gap %.3e, resolvent distance %.3e", eps, gap, distance)

    frame = pd.DataFrame(rows, columns=GAP_COLUMNS)
    report.add_artifact(write_table(out / "effective_gap.csv", rows, GAP_COLUMNS))
    report.metrics.extend(rows)
    if config.run.figures:
        positive = bool((frame[["sup_gap", "resolvent_distance"]] > 0).all().all())
        report.add_artifact(plot_series(
            out / "effective_gap.svg", frame, "eps", ["sup_gap", "resolvent_distance"],
            "distance to the classical limit", logx=True, logy=positive,
        ))
        if grid.dim == 1:
            report.add_artifact(plot_potentials(
                out / "potentials.svg", grid.axis, curves, "partial-trace potentials",
            ))
    return frame


def _assert_sweep(config: ExperimentConfig, report: RunReport, frame: pd.DataFrame):
    kind = config.state.kind
    tolerance = config.run.tolerance
    for row in frame.itertuples():
        report.check(
            "EFF-RESOLVENT-BOUND", row.resolvent_distance <= row.resolvent_bound * (1 + 1e-6) + 1e-8,
            f"eps={row.eps:g}: {row.resolvent_distance:.3e} <= {row.resolvent_bound:.3e}",
            row.resolvent_distance, row.resolvent_bound,
        )
        if kind == "vacuum":
            worst = max(row.sup_gap, row.c_eps)
            report.check("EFF-VACUUM", worst <= 1e-14, f"eps={row.eps:g}: V and c_eps vanish", worst, 1e-14)
        elif kind in ("coherent", "almost_periodic"):
            worst = max(row.sup_gap, row.c_gap)
            report.check(
                "EFF-COHERENT", worst <= tolerance,
                f"eps={row.eps:g}: sup gap {row.sup_gap:.2e}, |c_eps - c(mu)| {row.c_gap:.2e}",
                worst, tolerance,
            )
    if kind != "mixture":
        return

    modes = build_modes(config.model)
    mu = build_measure(config.state, modes)
    separation = mixture_separation(mu.points)
    gaps = frame["sup_gap"].to_numpy()
    slope = decay_slope(frame["eps"].to_numpy(), gaps)
    if np.all(gaps <= RESOLUTION):
        report.check(
            "EFF-MIXTURE-RATE", True, "sup gap vanishes along the sweep", float(gaps.max()), RESOLUTION
        )
    elif slope is None:
        report.check("EFF-MIXTURE-RATE", False, "fewer than two resolvable gaps in the sweep")
    else:
        report.check(
            "EFF-MIXTURE-RATE", slope <= -0.9 * separation,
            f"slope {slope:.4g} against -0.9 D = {-0.9 * separation:.4g}", slope, -0.9 * separation,
        )
    distances = frame["resolvent_distance"].to_numpy()
    steps = np.diff(distances)
    shrinks = (steps < 0) | ((distances[:-1] <= RESOLUTION) & (distances[1:] <= RESOLUTION))
    report.check(
        "EFF-RESOLVENT-MONOTONE", bool(np.all(shrinks)),
        "resolvent distances " + ", ".join(f"{d:.3e}" for d in distances),
        float(steps.max(initial=-np.inf)), 0.0,
    )


async def cmd_effective(config: ExperimentConfig) -> RunReport:
    report = RunReport("effective", config.config_hash, config.run.seed)
    frame = await asyncio.to_thread(_sweep, config, report)
    _assert_sweep(config, report, frame)
    log.info(report.summary())
    return report
