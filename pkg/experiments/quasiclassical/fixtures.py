"""Build the numerical objects an ExperimentConfig describes."""

import logging
from pathlib import Path

import numpy as np

from shared.config import ExperimentConfig, ModelConfig, PotentialConfig, StateConfig
from shared.errors import ConfigError
from shared.numerics.effective import ClassicalMeasure, almost_periodic_potential, mixture_state
from shared.numerics.fock import (
    CutoffPolicy,
    Family,
    FockSpace,
    FockState,
    ModeSet,
    coherent_state,
)
from shared.numerics.model import (
    HamiltonianSpec,
    ParticleModel,
    SpatialGrid,
    named_potential,
    potential_from_file,
    single_particle_potential,
)

log = logging.getLogger("qclab.fixtures")


def build_grid(model: ModelConfig) -> SpatialGrid:
    return SpatialGrid(model.dim, model.grid.half_width, model.grid.points, model.grid.boundary)


def build_modes(model: ModelConfig) -> ModeSet:
    spec = model.modes
    uv = np.inf if spec.uv_cutoff is None else spec.uv_cutoff
    if spec.family == "discrete":
        return ModeSet.discrete(spec.k, spec.coupling, spec.omega, dim=model.dim)
    if spec.family == "nelson":
        return ModeSet.nelson(
            model.dim, spec.k_max, spec.points, spec.coupling_strength, spec.mass, spec.form_factor, uv
        )
    return ModeSet.polaron(model.dim, spec.k_max, spec.points)


def build_particles(grid: SpatialGrid, model: ModelConfig) -> ParticleModel:
    potential = model.potential
    if potential.file is not None:
        return potential_from_file(grid, model.n_particles, Path(potential.file))
    return named_potential(grid, model.n_particles, potential.kind, **potential.params())


def build_target(grid: SpatialGrid, potential: PotentialConfig) -> np.ndarray:
    """Single-particle samples of a trap W."""
    if potential.file is not None:
        return potential_from_file(grid, 1, Path(potential.file)).potential
    return single_particle_potential(grid, potential.kind, **potential.params())


def build_policy(config: ExperimentConfig) -> CutoffPolicy:
    c = config.sweep.cutoffs
    return CutoffPolicy(c.kind, c.fixed, c.truncation_tol, c.margin, c.ceiling)


def hypothesis_flags(modes: ModeSet) -> list[str]:
    flags = []
    if not modes.is_massive:
        flags.append("massless field: outside theorem hypotheses")
    if not modes.in_proven_scope:
        flags.append(f"polaron form factor in d={modes.dim}: outside the proven regime")
    return flags


def state_amplitudes(state: StateConfig, modes: ModeSet) -> np.ndarray:
    """Per-mode amplitude that sizes the cutoffs (largest over mixture atoms)."""
    if state.kind == "coherent":
        return _vector(state.amplitudes, modes, "state.amplitudes")
    if state.kind == "mixture":
        points = np.array([_vector(a.point, modes, "state.atoms") for a in state.atoms])
        return np.abs(points).max(axis=0)
    if state.kind == "almost_periodic":
        return _almost_periodic_amplitude(state, modes)
    return np.zeros(modes.size, dtype=complex)


def _vector(values, modes: ModeSet, name: str) -> np.ndarray:
    vector = np.asarray(values, dtype=complex)
    if vector.shape != (modes.size,):
        raise ConfigError(f"{name} has {vector.size} entries for {modes.size} modes")
    return vector


def _almost_periodic_amplitude(state: StateConfig, modes: ModeSet) -> np.ndarray:
    b = _vector(state.b, modes, "state.b")
    live = modes.coupling != 0
    if np.any(~live & (b != 0)):
        raise ConfigError("state.b drives a mode that does not couple")
    f = np.zeros(modes.size, dtype=complex)
    f[live] = np.conj(b[live]) / (2 * np.conj(modes.coupling[live]))
    return f


def build_measure(state: StateConfig, modes: ModeSet) -> ClassicalMeasure:
    """The classical limit of the configured field state."""
    if state.kind == "mixture":
        weights = np.array([a.weight for a in state.atoms])
        points = np.array([_vector(a.point, modes, "state.atoms") for a in state.atoms])
        return ClassicalMeasure(weights, points, "mixture")
    if state.kind in ("coherent", "almost_periodic"):
        return ClassicalMeasure.dirac(state_amplitudes(state, modes), state.kind)
    # vacuum and number states at fixed occupation converge to delta_0
    return ClassicalMeasure.dirac(np.zeros(modes.size), state.kind)


def build_space(config: ExperimentConfig, modes: ModeSet, eps: float) -> FockSpace:
    policy = build_policy(config)
    space = policy.space(modes, eps, state_amplitudes(config.state, modes))
    if config.state.kind == "number":
        needed = config.state.occupation
        if len(needed) != modes.size:
            raise ConfigError(f"state.occupation has {len(needed)} entries for {modes.size} modes")
        cutoffs = tuple(max(c, m) for c, m in zip(space.cutoffs, needed))
        space = FockSpace(modes, eps, cutoffs)
    return space


def build_state(config: ExperimentConfig, modes: ModeSet, eps: float) -> FockState:
    space = build_space(config, modes, eps)
    state = config.state
    tol = config.sweep.cutoffs.truncation_tol
    if state.kind == "vacuum":
        return FockState.vacuum(space)
    if state.kind == "number":
        return FockState.number_state(space, state.occupation)
    if state.kind == "mixture":
        return mixture_state(space, build_measure(state, modes), tol)
    return coherent_state(space, state_amplitudes(state, modes), tol)


def check_adequacy(config: ExperimentConfig, modes: ModeSet):
    """Build the state at the smallest eps of the sweep; raises CutoffTooSmallError."""
    eps = min(config.sweep.eps)
    build_state(config, modes, eps)
    log.debug("cutoff policy adequate down to eps=%g", eps)


def build_spec(config: ExperimentConfig, eps: float, cutoffs=None) -> HamiltonianSpec:
    model = config.model
    grid = build_grid(model)
    modes = build_modes(model)
    if cutoffs is None:
        space = build_space(config, modes, eps)
    else:
        space = FockSpace(modes, eps, cutoffs)
    return HamiltonianSpec(
        grid,
        build_particles(grid, model),
        space,
        model.phase_origin,
        config.run.max_dimension,
    )


def almost_periodic_target(config: ExperimentConfig, grid: SpatialGrid, modes: ModeSet):
    return almost_periodic_potential(
        _vector(config.state.b, modes, "state.b"), grid, modes
    )


def is_polaron(modes: ModeSet) -> bool:
    return modes.family is Family.POLARON
