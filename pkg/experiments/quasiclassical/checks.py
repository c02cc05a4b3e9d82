"""Invariant battery: seeded numerical checks of the operator identities and inequalities."""

import asyncio
import logging

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigvalsh

from experiments.quasiclassical.fixtures import (
    build_grid,
    build_modes,
    build_particles,
    build_spec,
    check_adequacy,
    hypothesis_flags,
    is_polaron,
)
from experiments.quasiclassical.report import Assertion, RunReport
from shared.config import ExperimentConfig
from shared.errors import LabError
from shared.numerics.effective import (
    ClassicalMeasure,
    classical_potential,
    effective_hamiltonian,
    partial_trace_potential,
    polaron_split,
)
from shared.numerics.fock import (
    Family,
    FockSpace,
    FockState,
    ModeSet,
    annihilation,
    coherent_overlap,
    coherent_state,
    displace,
    field_annihilation,
    field_energy,
    number_operator,
    required_cutoff,
    truncation_tail,
)
from shared.numerics.model import (
    HamiltonianSpec,
    ParticleModel,
    SpatialGrid,
    assemble_full,
    assemble_h0,
    assemble_interaction,
    named_potential,
)
from shared.numerics.operators import GridOperator, embed_fock
from shared.numerics.spectral import (
    ClassicalProblem,
    GseOptions,
    admissible_shift,
    brute_force_single_atom,
    classical_ground_energy,
    default_probes,
    dense_ground_energy,
    ground_energy,
    resolvent_apply,
    resolvent_distance,
)

log = logging.getLogger("qclab.checks")

ORACLE_LIMIT = 400
ORACLE_TOL = 1e-16


def _rng(config: ExperimentConfig, salt: int) -> np.random.Generator:
    return np.random.default_rng([config.run.seed, salt])


def _sparse_max(matrix) -> float:
    matrix = sp.csr_matrix(matrix)
    matrix.eliminate_zeros()
    return float(abs(matrix).max()) if matrix.nnz else 0.0


def _coherent_amplitude(config: ExperimentConfig, modes: ModeSet) -> np.ndarray:
    if config.state.kind == "coherent":
        return np.asarray(config.state.amplitudes, dtype=complex)
    rng = _rng(config, 7)
    return 0.3 * (rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)) / np.sqrt(2)


def _oracle_space(modes: ModeSet, f: np.ndarray, eps: float, margin: int = 10) -> FockSpace:
    return FockSpace(modes, eps, [required_cutoff(fn, eps, ORACLE_TOL) + margin for fn in f])


def _spec_with_cutoff(config: ExperimentConfig, eps: float, cutoff: int) -> HamiltonianSpec:
    modes = build_modes(config.model)
    return build_spec(config, eps, cutoffs=(cutoff,) * modes.size)


# --- Fock space ---


def check_ccr(config: ExperimentConfig) -> list[Assertion]:
    """[a_n, a_n^dag] - eps vanishes on every state strictly below the cutoff."""
    modes = build_modes(config.model)
    worst = 0.0
    for eps in config.sweep.eps:
        space = FockSpace.uniform(modes, eps, 4)
        below = np.flatnonzero(space.below_cutoff())
        for n in range(modes.size):
            a = annihilation(space, n).matrix
            comm = a @ a.conj().T - a.conj().T @ a - eps * sp.identity(space.dim)
            worst = max(worst, _sparse_max(comm.tocsc()[:, below]))
    return [Assertion("FOCK-CCR", worst <= 1e-12, f"max deviation {worst:.2e}", worst, 1e-12)]


def check_displacement(config: ExperimentConfig) -> list[Assertion]:
    """Xi(f) against the matrix-exponential Weyl oracle and its eigen-residual per mode."""
    modes = build_modes(config.model)
    f = _coherent_amplitude(config, modes)
    results = []
    for eps in config.sweep.eps:
        space = _oracle_space(modes, f, eps)
        xi = coherent_state(space, f, config.sweep.cutoffs.truncation_tol)
        oracle = displace(FockState.vacuum(space), f)
        distance = float(np.linalg.norm(xi.coeffs - oracle.coeffs))
        results.append(Assertion(
            "FOCK-DISPLACE", distance <= 1e-6,
            f"eps={eps:g}: ||Xi(f) - W(f) Omega|| = {distance:.2e}", distance, 1e-6,
        ))
        for n, fn in enumerate(f):
            a = annihilation(space, n).matrix
            residual = float(np.linalg.norm(a @ xi.coeffs - fn * xi.coeffs))
            cutoff = space.cutoffs[n]
            edge = truncation_tail(fn, eps, cutoff - 1) / max(1 - truncation_tail(fn, eps, cutoff), 1e-300)
            limit = abs(fn) * np.sqrt(edge) * (1 + 1e-9) + 1e-14
            results.append(Assertion(
                "FOCK-DISPLACE", residual <= limit,
                f"eps={eps:g} mode {n}: ||(a - f) Xi|| = {residual:.2e}", residual, limit,
            ))
    return results


def check_overlap(config: ExperimentConfig) -> list[Assertion]:
    """<Xi(z1)|Xi(z2)> on a 3x3 grid of single-mode amplitudes at eps = 1 and 1/4."""
    modes = ModeSet.discrete([[0.0]], [1.0], [1.0])
    points = [0.5 + 0.0j, -0.3 + 0.4j, 0.2j]
    worst = 0.0
    for eps in (1.0, 0.25):
        space = _oracle_space(modes, np.array([max(points, key=abs)]), eps)
        states = [coherent_state(space, [z], ORACLE_TOL) for z in points]
        for z1, s1 in zip(points, states):
            for z2, s2 in zip(points, states):
                numeric = complex(np.vdot(s1.coeffs, s2.coeffs))
                worst = max(worst, abs(numeric - coherent_overlap([z1], [z2], eps)))
    return [Assertion("FOCK-OVERLAP", worst <= 1e-6, f"max deviation {worst:.2e}", worst, 1e-6)]


def check_number_identity(config: ExperimentConfig) -> list[Assertion]:
    modes = build_modes(config.model)
    f = _coherent_amplitude(config, modes)
    tol = config.sweep.cutoffs.truncation_tol
    results = []
    for eps in config.sweep.eps:
        space = _oracle_space(modes, f, eps, margin=2)
        xi = coherent_state(space, f, tol)
        number = xi.expect(number_operator(space)).real
        energy = xi.expect(field_energy(space)).real
        deviation = max(
            abs(number - float(np.sum(np.abs(f) ** 2))),
            abs(energy - float(np.abs(f) ** 2 @ modes.omega)),
        )
        results.append(Assertion(
            "FOCK-NUMBER", deviation <= 1e-6,
            f"eps={eps:g}: <dGamma(1)> = {number:.10g}, <dGamma(omega)> = {energy:.10g}",
            deviation, 1e-6,
        ))
    return results


def check_norm_identity(config: ExperimentConfig) -> list[Assertion]:
    """||a^dag(g) Psi||^2 = ||a(g) Psi||^2 + eps ||g||^2 for Psi below the cutoff."""
    modes = build_modes(config.model)
    rng = _rng(config, 11)
    worst = 0.0
    for eps in config.sweep.eps[:2]:
        space = FockSpace.uniform(modes, eps, 4)
        for _ in range(config.run.samples // 2):
            g = rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)
            a = field_annihilation(space, g).matrix
            psi = FockState.random(space, rng, below_cutoff=True).coeffs
            down = np.linalg.norm(a @ psi) ** 2
            up = np.linalg.norm(a.conj().T @ psi) ** 2
            target = down + eps * np.linalg.norm(g) ** 2
            worst = max(worst, abs(up - target) / (1 + target))
    return [Assertion("FOCK-NORM", worst <= 1e-10, f"max relative deviation {worst:.2e}", worst, 1e-10)]


def check_nelson_bound(config: ExperimentConfig) -> list[Assertion]:
    """||a(g) Psi|| <= ||omega^{-1/2} g|| ||dGamma(omega)^{1/2} Psi|| on random states."""
    modes = build_modes(config.model)
    if np.any(modes.omega <= 0):
        return []
    rng = _rng(config, 13)
    space = FockSpace.uniform(modes, config.sweep.eps[0], 4)
    energy = field_energy(space)
    slack = np.inf
    for _ in range(config.run.samples):
        g = rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)
        psi = FockState.random(space, rng)
        lhs = np.linalg.norm(field_annihilation(space, g).apply(psi.coeffs))
        rhs = np.linalg.norm(g / np.sqrt(modes.omega)) * np.sqrt(max(psi.expect(energy).real, 0.0))
        slack = min(slack, rhs - lhs)
    return [Assertion("FOCK-NELSON-BOUND", slack >= -1e-12, f"min slack {slack:.3e}", slack, 0.0)]


def check_fock_form(config: ExperimentConfig) -> list[Assertion]:
    """sup_x |<Psi|A(x)|Psi>| <= 2 ||lambda|| ||(dGamma(1) + 1)^{1/4} Psi||^2."""
    modes = build_modes(config.model)
    grid = build_grid(config.model)
    rng = _rng(config, 17)
    slack = np.inf
    for eps in config.sweep.eps[:2]:
        space = FockSpace.uniform(modes, eps, 4)
        weight = np.sqrt(eps * space.occupations.sum(axis=1) + 1.0)
        for _ in range(config.run.samples // 4):
            state = FockState.random(space, rng)
            potential, _ = partial_trace_potential(state, grid, modes)
            bound = 2 * modes.coupling_norm() * float(weight @ np.abs(state.coeffs) ** 2)
            slack = min(slack, bound - float(np.max(np.abs(potential.samples))))
    return [Assertion("FOCK-FORM-BOUND", slack >= -1e-12, f"min slack {slack:.3e}", slack, 0.0)]


# --- Model ---


def check_interaction_bound(config: ExperimentConfig) -> list[Assertion]:
    """||sum_j A(x_j) Phi|| <= N (2 ||omega^{-1/2} lambda|| ||dGamma(omega)^{1/2} Phi|| + sqrt(eps) ||lambda||)."""
    spec = _spec_with_cutoff(config, config.sweep.eps[-1], 3)
    modes = spec.field.modes
    if np.any(modes.omega <= 0):
        return []
    interaction = assemble_interaction(spec, 0)
    for j in range(1, spec.n_particles):
        interaction = interaction + assemble_interaction(spec, j)
    energy = embed_fock(field_energy(spec.field), spec.particle_dim)
    rng = _rng(config, 19)
    eps, N = spec.field.eps, spec.n_particles
    relative = np.linalg.norm(modes.coupling / np.sqrt(modes.omega))
    slack = np.inf
    for _ in range(20):
        phi = rng.standard_normal(spec.dim) + 1j * rng.standard_normal(spec.dim)
        phi /= np.linalg.norm(phi)
        lhs = np.linalg.norm(interaction.apply(phi))
        rhs = N * (2 * relative * np.sqrt(energy.expectation(phi).real)
                   + np.sqrt(eps) * modes.coupling_norm())
        slack = min(slack, rhs - lhs)
    return [Assertion("MODEL-INTERACTION-BOUND", slack >= -1e-12, f"min slack {slack:.3e}", slack, 0.0)]


def check_hermiticity(config: ExperimentConfig) -> list[Assertion]:
    spec = _spec_with_cutoff(config, config.sweep.eps[-1], 3)
    results = []
    for name, op in (("H0", assemble_h0(spec.grid, spec.particles)), ("H", assemble_full(spec))):
        scale = max(1.0, float(abs(op.matrix).max()))
        error = op.hermiticity_error()
        results.append(Assertion(
            "MODEL-HERMITIAN", error <= 1e-12 * scale, f"{name}: max asymmetry {error:.2e}",
            error, 1e-12 * scale,
        ))
    return results


def check_quantum_floor(config: ExperimentConfig) -> list[Assertion]:
    """Ground energy of H against the coupling floor, and the zero-coupling factorization."""
    seed = config.run.seed
    results = []
    base = _spec_with_cutoff(config, config.sweep.eps[0], 4)
    h0_ground = ground_energy(assemble_h0(base.grid, base.particles), seed=seed).value
    floor = h0_ground - base.field.modes.coupling_floor(base.n_particles)
    for eps in config.sweep.eps:
        spec = _spec_with_cutoff(config, eps, 4)
        value = ground_energy(assemble_full(spec), seed=seed).value
        results.append(Assertion(
            "MODEL-FLOOR", value >= floor - 1e-8,
            f"eps={eps:g}: sigma(H) = {value:.10g} >= {floor:.10g}", value, floor,
        ))
    modes = base.field.modes
    if is_polaron(modes):
        return results
    silent = ModeSet(modes.dim, modes.k, modes.omega, np.zeros(modes.size), modes.family,
                     modes.cell_volume, "custom", modes.mass)
    decoupled = HamiltonianSpec(base.grid, base.particles, FockSpace.uniform(silent, base.field.eps, 3),
                                base.phase_origin, base.max_dimension)
    value = ground_energy(assemble_full(decoupled), seed=seed).value
    deviation = abs(value - h0_ground)
    results.append(Assertion(
        "MODEL-ZERO-COUPLING", deviation <= 1e-8, f"|sigma(H) - sigma(H0)| = {deviation:.2e}",
        deviation, 1e-8,
    ))
    return results


def check_translation(config: ExperimentConfig) -> list[Assertion]:
    """Periodic grid, integer wave vectors: shifting U and the phase origin by h keeps the spectrum."""
    modes = build_modes(config.model)
    if config.model.dim != 1 or modes.family is not Family.DISCRETE or not np.allclose(modes.k, np.round(modes.k)):
        return []
    grid = SpatialGrid(1, np.pi, 24, "periodic")
    base = named_potential(grid, 1, "cosine", strength=0.5)
    shifted = ParticleModel(1, np.roll(base.potential, 1), base.decomposition, "cosine_shifted")
    space = FockSpace.uniform(modes, config.sweep.eps[0], 3)
    spectra = []
    for particles, origin in ((base, (0.0,)), (shifted, (grid.spacing,))):
        spec = HamiltonianSpec(grid, particles, space, origin)
        spectra.append(eigvalsh(assemble_full(spec).dense(), subset_by_index=[0, 3]))
    deviation = float(np.max(np.abs(spectra[0] - spectra[1])))
    return [Assertion("MODEL-TRANSLATION", deviation <= 1e-8, f"max deviation {deviation:.2e}", deviation, 1e-8)]


# --- Effective potentials ---


def check_partial_trace(config: ExperimentConfig) -> list[Assertion]:
    """50 random (psi, Psi): <psi (x) Psi|H|psi (x) Psi> = <psi|H_eps|psi> + c_eps ||psi||^2."""
    spec = _spec_with_cutoff(config, config.sweep.eps[0], 3)
    h = assemble_full(spec)
    rng = _rng(config, 23)
    worst = 0.0
    for _ in range(50):
        psi = rng.standard_normal(spec.particle_dim) + 1j * rng.standard_normal(spec.particle_dim)
        field_state = FockState.random(spec.field, rng)
        full = np.kron(psi, field_state.coeffs)
        lhs = h.expectation(full).real
        _, c_eps = partial_trace_potential(field_state, spec.grid, spec.field.modes, spec.phase_origin)
        rhs = effective_hamiltonian(spec, field_state).expectation(psi).real + c_eps * np.vdot(psi, psi).real
        worst = max(worst, abs(lhs - rhs) / (1 + abs(lhs)))
    return [Assertion("EFF-TRACE", worst <= 1e-10, f"max relative deviation {worst:.2e}", worst, 1e-10)]


def check_coherent_exactness(config: ExperimentConfig) -> list[Assertion]:
    modes = build_modes(config.model)
    grid = build_grid(config.model)
    f = _coherent_amplitude(config, modes)
    tol = config.sweep.cutoffs.truncation_tol
    classical = classical_potential(ClassicalMeasure.dirac(f), grid, modes)
    c_mu = float(np.abs(f) ** 2 @ modes.omega)
    results = []
    for eps in config.sweep.eps:
        space = _oracle_space(modes, f, eps, margin=2)
        potential, c_eps = partial_trace_potential(coherent_state(space, f, tol), grid, modes)
        gap = potential.sup_distance(classical)
        deviation = max(gap, abs(c_eps - c_mu))
        results.append(Assertion(
            "EFF-COHERENT", deviation <= 1e-6,
            f"eps={eps:g}: sup |V_eps - V_f| = {gap:.2e}, |c_eps - c(mu)| = {abs(c_eps - c_mu):.2e}",
            deviation, 1e-6,
        ))
    return results


def check_potential_bound(config: ExperimentConfig) -> list[Assertion]:
    modes = build_modes(config.model)
    grid = build_grid(config.model)
    rng = _rng(config, 29)
    slack = np.inf
    for _ in range(20):
        atoms = int(rng.integers(1, 4))
        weights = rng.random(atoms) + 0.1
        points = rng.standard_normal((atoms, modes.size)) + 1j * rng.standard_normal((atoms, modes.size))
        mu = ClassicalMeasure(weights / weights.sum(), points)
        sup = float(np.max(np.abs(classical_potential(mu, grid, modes).samples)))
        slack = min(slack, mu.potential_bound(modes) - sup)
    return [Assertion("EFF-BOUNDED", slack >= -1e-12, f"min slack {slack:.3e}", slack, 0.0)]


# --- Polaron ---


def _polaron_fixture(config: ExperimentConfig):
    p = config.polaron
    modes = ModeSet.polaron(p.dim, p.k_max, p.points)
    grid = SpatialGrid(p.dim, p.half_width, p.grid_points, "periodic")
    return p, modes, grid


def _random_amplitude(rng, size: int, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2)


def check_polaron_bounded_part(config: ExperimentConfig) -> list[Assertion]:
    if config.polaron is None:
        return []
    p, modes, grid = _polaron_fixture(config)
    rng = _rng(config, 31)
    slack = np.inf
    for _ in range(100):
        z = _random_amplitude(rng, modes.size, float(rng.uniform(0.1, 3.0)))
        split = polaron_split(z, p.rho, grid, modes)
        norm_sq = float(np.sum(np.abs(z) ** 2))
        slack = min(slack, split.low_sup_bound(norm_sq) - float(np.max(np.abs(split.low))))
    return [Assertion("POL-BOUNDED-PART", slack >= -1e-12, f"min slack {slack:.3e}", slack, 0.0)]


def _trial_functions(grid: SpatialGrid, rng, count: int) -> list[np.ndarray]:
    """Alternating rough and smooth trial functions on the grid."""
    trials = []
    for i in range(count):
        if i % 2 == 0:
            trials.append(rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size))
            continue
        center = rng.uniform(-0.5, 0.5, grid.dim) * grid.half_width
        width = rng.uniform(0.5, 2.0)
        momentum = rng.uniform(-1.0, 1.0, grid.dim)
        offset = grid.nodes - center
        trials.append(np.exp(-np.sum(offset**2, axis=1) / (2 * width**2) + 1j * offset @ momentum))
    return trials


def check_polaron_form(config: ExperimentConfig) -> list[Assertion]:
    if config.polaron is None:
        return []
    p, modes, grid = _polaron_fixture(config)
    rng = _rng(config, 37)
    kinetic = grid.kinetic(1)
    slack = np.inf
    for psi in _trial_functions(grid, rng, 20):
        z = _random_amplitude(rng, modes.size, float(rng.uniform(0.1, 3.0)))
        split = polaron_split(z, p.rho, grid, modes)
        lhs = abs(np.sum(np.abs(psi) ** 2 * split.high))
        energy = float(np.vdot(psi, kinetic @ psi).real)
        norm_sq = float(np.vdot(psi, psi).real)
        for alpha in p.alphas:
            bound = split.form_bound(alpha, energy, float(np.sum(np.abs(z) ** 2)), norm_sq)
            slack = min(slack, bound - lhs)
    return [Assertion("POL-FORM", slack >= 0, f"min slack {slack:.3e}", slack, 0.0)]


def check_polaron_floor(config: ExperimentConfig) -> list[Assertion]:
    if config.polaron is None:
        return []
    p, modes, grid = _polaron_fixture(config)
    rng = _rng(config, 41)
    kinetic = GridOperator(grid.kinetic(1), "grid")
    results = []
    for scale in (0.1, 1.0, 3.0):
        z = _random_amplitude(rng, modes.size, scale)
        split = polaron_split(z, p.rho, grid, modes)
        op = kinetic + GridOperator(sp.diags(split.potential(), format="csr"), "grid")
        value = ground_energy(op, seed=config.run.seed).value
        floor = split.energy_floor(float(np.sum(np.abs(z) ** 2)), 1, p.alpha1)
        results.append(Assertion(
            "POL-FLOOR", value >= floor, f"|z| scale {scale:g}: {value:.6g} >= {floor:.6g}", value, floor,
        ))
    return results


# --- Spectral ---


def check_lanczos_oracle(config: ExperimentConfig) -> list[Assertion]:
    spec = _spec_with_cutoff(config, config.sweep.eps[0], 2)
    instances = [("H0", assemble_h0(spec.grid, spec.particles))]
    if spec.dim <= ORACLE_LIMIT:
        instances.append(("H", assemble_full(spec)))
    results = []
    for name, op in instances:
        if op.dim > ORACLE_LIMIT:
            continue
        lanczos = ground_energy(op, seed=config.run.seed).value
        dense = dense_ground_energy(op).value
        deviation = abs(lanczos - dense)
        results.append(Assertion(
            "SPEC-LANCZOS-ORACLE", deviation <= 1e-8,
            f"{name} (dim {op.dim}): |Lanczos - dense| = {deviation:.2e}", deviation, 1e-8,
        ))
    return results


def check_brute_force(config: ExperimentConfig) -> list[Assertion]:
    """Alternating minimization against a 21^3 search over (Re z1, Re z2, Im z2)."""
    modes = build_modes(config.model)
    grid = build_grid(config.model)
    if modes.size != 2 or not modes.is_massive or grid.size > ORACLE_LIMIT:
        return []
    spec = build_spec(config, config.sweep.eps[0], cutoffs=(0, 0))
    problem = ClassicalProblem.from_spec(spec)
    options = GseOptions(tol=config.gse.tol, seed=config.run.seed, restarts=config.gse.restarts)
    best = classical_ground_energy(problem, options)
    brute, _ = brute_force_single_atom(problem)
    deviation = abs(best.energy - brute)
    return [Assertion(
        "SPEC-BRUTE-FORCE", deviation <= 1e-3 and best.energy <= brute + 1e-8,
        f"alternating {best.energy:.10g} vs brute force {brute:.10g}", deviation, 1e-3,
    )]


def check_resolvent_identities(config: ExperimentConfig) -> list[Assertion]:
    grid = build_grid(config.model)
    modes = build_modes(config.model)
    particles = build_particles(grid, config.model)
    problem = ClassicalProblem(assemble_h0(grid, particles), grid, modes, particles.n_particles)
    rng = _rng(config, 43)
    zs = [_random_amplitude(rng, modes.size) for _ in range(2)]
    ops = [problem.h0, problem.hamiltonian(zs[0]), problem.hamiltonian(zs[1])]
    h0_ground = ground_energy(problem.h0, seed=config.run.seed).value
    floors = [h0_ground] + [
        h0_ground - particles.n_particles * float(np.max(np.abs(problem.potential(z)))) for z in zs
    ]
    zeta = admissible_shift(floors)
    probes = default_probes(problem.h0.dim, config.run.seed, count=4)
    a, b, c = ops
    self_distance = resolvent_distance(a, a, zeta, probes)
    d_ab = resolvent_distance(a, b, zeta, probes)
    d_bc = resolvent_distance(b, c, zeta, probes)
    d_ac = resolvent_distance(a, c, zeta, probes)
    residual = max(
        float(np.linalg.norm(op.shifted(zeta).apply(resolvent_apply(op, zeta, v, floor)) - v))
        for op, floor in zip(ops, floors)
        for v in probes
    )
    return [
        Assertion("SPEC-RESOLVENT", self_distance == 0.0, f"d(A, A) = {self_distance:.2e}", self_distance, 0.0),
        Assertion(
            "SPEC-RESOLVENT", d_ac <= d_ab + d_bc + 1e-10,
            f"d(A, C) = {d_ac:.3e} <= {d_ab:.3e} + {d_bc:.3e}", d_ac, d_ab + d_bc,
        ),
        Assertion("SPEC-RESOLVENT", residual <= 1e-7, f"max solve residual {residual:.2e}", residual, 1e-7),
    ]


ALL_CHECKS = [
    check_ccr,
    check_displacement,
    check_overlap,
    check_number_identity,
    check_norm_identity,
    check_nelson_bound,
    check_fock_form,
    check_interaction_bound,
    check_hermiticity,
    check_quantum_floor,
    check_translation,
    check_partial_trace,
    check_coherent_exactness,
    check_potential_bound,
    check_polaron_bounded_part,
    check_polaron_form,
    check_polaron_floor,
    check_lanczos_oracle,
    check_brute_force,
    check_resolvent_identities,
]

CHECK_INVARIANT = {
    "check_ccr": "FOCK-CCR",
    "check_displacement": "FOCK-DISPLACE",
    "check_overlap": "FOCK-OVERLAP",
    "check_number_identity": "FOCK-NUMBER",
    "check_norm_identity": "FOCK-NORM",
    "check_nelson_bound": "FOCK-NELSON-BOUND",
    "check_fock_form": "FOCK-FORM-BOUND",
    "check_interaction_bound": "MODEL-INTERACTION-BOUND",
    "check_hermiticity": "MODEL-HERMITIAN",
    "check_quantum_floor": "MODEL-FLOOR",
    "check_translation": "MODEL-TRANSLATION",
    "check_partial_trace": "EFF-TRACE",
    "check_coherent_exactness": "EFF-COHERENT",
    "check_potential_bound": "EFF-BOUNDED",
    "check_polaron_bounded_part": "POL-BOUNDED-PART",
    "check_polaron_form": "POL-FORM",
    "check_polaron_floor": "POL-FLOOR",
    "check_lanczos_oracle": "SPEC-LANCZOS-ORACLE",
    "check_brute_force": "SPEC-BRUTE-FORCE",
    "check_resolvent_identities": "SPEC-RESOLVENT",
}


async def run_all_checks(config: ExperimentConfig, checks=None) -> list[Assertion]:
    """Run the battery; a crashing check becomes a failed assertion, lab errors propagate."""
    check_adequacy(config, build_modes(config.model))
    results = []
    for check_fn in checks or ALL_CHECKS:
        try:
            results.extend(await asyncio.to_thread(check_fn, config))
        except LabError:
            raise
        except Exception:
            log.exception("Check %s failed", check_fn.__name__)
            results.append(Assertion(
                CHECK_INVARIANT[check_fn.__name__], False,
                f"check {check_fn.__name__} raised an exception",
            ))
    return results


async def cmd_check(config: ExperimentConfig) -> RunReport:
    report = RunReport("check", config.config_hash, config.run.seed)
    for message in hypothesis_flags(build_modes(config.model)):
        report.flag(message)
    log.info("Running %d checks...", len(ALL_CHECKS))
    report.assertions.extend(await run_all_checks(config))
    for failure in report.failures:
        log.warning("[%s] FAILED: %s", failure.invariant, failure.detail)
    log.info(report.summary())
    return report
