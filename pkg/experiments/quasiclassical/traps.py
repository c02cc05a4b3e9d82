"""Trap derivation: a coherent field state whose partial trace is a smoothed external potential W."""

import asyncio
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from experiments.quasiclassical.fixtures import (
    build_grid,
    build_particles,
    build_policy,
    build_target,
)
from experiments.quasiclassical.report import RunReport
from shared.config import ExperimentConfig
from shared.errors import ConfigError
from shared.numerics.effective import (
    FourierWindow,
    Mollifier,
    mollify,
    partial_trace_potential,
    trap_coherent_amplitude,
)
from shared.numerics.fock import coherent_product_state
from shared.numerics.model import assemble_h0, potential_operator
from shared.numerics.spectral import (
    admissible_shift,
    default_probes,
    ground_energy,
    resolvent_distance,
)
from shared.tools.plots import plot_potentials, plot_series
from shared.tools.tables import write_table

log = logging.getLogger("qclab.trap")

TRAP_COLUMNS = [
    "eps",
    "norm_sq",
    "c_eps",
    "reproduction_error",
    "resolvent_distance",
    "mollify_error",
    "outside_fraction",
    "max_cutoff",
]
MOLLIFY_WINDOW = 1.0
ZERO = 1e-12


def mollify_error(W: np.ndarray, grid, eps: float, mollifier: Mollifier) -> float:
    """L2 norm of phi_eps * W - W over |x| <= 1 on every axis."""
    smoothed = mollify(W, grid, eps, mollifier, boundary="nearest")
    inside = np.all(np.abs(grid.nodes) <= MOLLIFY_WINDOW + 1e-12, axis=1)
    return float(np.sqrt(np.sum((smoothed - W)[inside] ** 2) * grid.cell_volume))


def halving_pairs(eps: list[float]):
    for coarse, fine in zip(eps, eps[1:]):
        if np.isclose(fine, coarse / 2):
            yield coarse, fine


def _sweep(config: ExperimentConfig, report: RunReport) -> pd.DataFrame:
    trap = config.trap
    if trap is None:
        raise ConfigError("the trap experiment needs a trap section")
    grid = build_grid(config.model)
    particles = build_particles(grid, config.model)
    N = particles.n_particles
    W = build_target(grid, trap.potential)
    window = FourierWindow(grid, trap.coupling_strength, trap.mass, trap.form_factor, trap.k_max)
    mollifier = Mollifier(trap.min_points)
    interior = grid.interior_mask(trap.interior_fraction)
    # one factor per mode, never a tensor space, so the ceiling is the trap's own
    policy = replace(build_policy(config), ceiling=trap.cutoff_ceiling)
    out = Path(config.run.output_dir)
    log.info("trap %s on %d nodes, %d field modes", trap.potential.kind, grid.size, window.modes.size)

    h0 = assemble_h0(grid, particles)
    h0_ground = ground_energy(h0, tol=config.run.eigen_tol, seed=config.run.seed).value
    trapped = h0 + potential_operator(grid, W, N)
    floor_trapped = h0_ground + N * float(W.min())
    trapped_ground = ground_energy(trapped, tol=config.run.eigen_tol, seed=config.run.seed)
    probes = default_probes(h0.dim, config.run.seed, config.run.probes, extra=[trapped_ground.vector])

    rows, curves = [], {"W": W}
    for eps in sorted(config.sweep.eps, reverse=True):
        amplitude = trap_coherent_amplitude(W, eps, window, mollifier, trap.max_outside)
        cutoffs = policy.cutoffs(window.modes, eps, amplitude.amplitudes)
        state = coherent_product_state(
            window.modes, amplitude.amplitudes, eps, policy.truncation_tol, cutoffs=cutoffs
        )
        potential, c_eps = partial_trace_potential(state, grid, window.modes)
        reproduction = float(np.max(np.abs(potential.samples - amplitude.target)[interior]))
        floor_eps = h0_ground + N * float(potential.samples.min())
        zeta = admissible_shift([floor_eps, floor_trapped])
        distance = resolvent_distance(
            h0 + potential.operator(N), trapped, zeta, probes, (floor_eps, floor_trapped), 1e-10
        )
        rows.append({
            "eps": eps,
            "norm_sq": amplitude.norm_sq,
            "c_eps": c_eps,
            "reproduction_error": reproduction,
            "resolvent_distance": distance,
            "mollify_error": mollify_error(W, grid, eps, mollifier),
            "outside_fraction": amplitude.outside_fraction,
            "max_cutoff": max(cutoffs, default=0),
        })
        curves[f"eps={eps:g}"] = potential.samples
        log.info("eps=%g: c_eps %.6g, resolvent distance %.3e", eps, c_eps, distance)

    frame = pd.DataFrame(rows, columns=TRAP_COLUMNS)
    report.add_artifact(write_table(out / "trap.csv", rows, TRAP_COLUMNS))
    report.metrics.extend(rows)
    if config.run.figures:
        report.add_artifact(plot_series(
            out / "trap_energy.svg", frame, "eps", ["c_eps"], "field energy of the trap state", logx=True,
        ))
        if grid.dim == 1:
            report.add_artifact(plot_potentials(out / "trap_potentials.svg", grid.axis, curves, "trap"))
    return frame


def _ratio_checks(report: RunReport, invariant: str, frame: pd.DataFrame, column: str, factor: float):
    values = dict(zip(frame["eps"], frame[column]))
    for coarse, fine in halving_pairs(list(frame["eps"])):
        before, after = values[coarse], values[fine]
        if before <= ZERO and after <= ZERO:
            report.check(invariant, True, f"eps={coarse:g} -> {fine:g}: {column} vanishes", after, ZERO)
            continue
        ratio = before / after if after > 0 else np.inf
        report.check(
            invariant, ratio >= factor,
            f"eps={coarse:g} -> {fine:g}: {column} shrinks by {ratio:.3g}", ratio, factor,
        )


def _assert_sweep(config: ExperimentConfig, report: RunReport, frame: pd.DataFrame):
    tolerance = config.run.tolerance
    for row in frame.itertuples():
        report.check(
            "TRAP-REPRODUCE", row.reproduction_error <= tolerance,
            f"eps={row.eps:g}: interior sup |V_eps - phi_eps * W| = {row.reproduction_error:.2e}",
            row.reproduction_error, tolerance,
        )
    _ratio_checks(report, "TRAP-RESOLVENT", frame, "resolvent_distance", 1.5)
    _ratio_checks(report, "TRAP-MOLLIFY", frame, "mollify_error", 1.8)

    energies = frame["c_eps"].to_numpy()
    if np.all(np.abs(energies) <= ZERO):
        report.check("TRAP-ENERGY", True, "c_eps vanishes along the sweep", float(energies.max()), ZERO)
    else:
        report.check(
            "TRAP-ENERGY", bool(np.all(np.diff(energies) > 0)),
            "c_eps " + ", ".join(f"{c:.6g}" for c in energies),
        )


async def cmd_trap(config: ExperimentConfig) -> RunReport:
    report = RunReport("trap", config.config_hash, config.run.seed)
    frame = await asyncio.to_thread(_sweep, config, report)
    _assert_sweep(config, report, frame)
    log.info(report.summary())
    return report
