"""Ground energies, resolvents and the classical energy minimization.

The classical energy functional of a particle state psi and a field amplitude z is

    E(psi, z) = <psi| H0 + sum_j V_z(x_j) |psi> + sum_n omega_n |z_n|^2,

and its infimum over both arguments is the classical ground energy. Alternating
minimization solves the psi-step with Lanczos and the z-step in closed form.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh, eigvalsh
from scipy.optimize import minimize
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, cg, eigsh

from shared.errors import ArgumentError, ConvergenceError, PreconditionError, ResourceError
from shared.numerics.effective import ClassicalMeasure
from shared.numerics.fock import CutoffPolicy, FockSpace, ModeSet
from shared.numerics.model import (
    HamiltonianSpec,
    SpatialGrid,
    assemble_full,
    assemble_h0,
    potential_operator,
)
from shared.numerics.operators import GridOperator

log = logging.getLogger("qclab.spectral")

DENSE_LIMIT = 3
MAX_DENSE = 4096
HERMITIAN_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenResult:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    method: str = "lanczos"


def canonical_phase(vector: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Rotate so the first component above tol * max|v| is real and positive."""
    vector = np.asarray(vector)
    magnitude = np.abs(vector)
    if magnitude.max(initial=0.0) == 0:
        return vector
    first = int(np.argmax(magnitude > tol * magnitude.max()))
    phase = vector[first] / magnitude[first]
    rotated = vector * np.conj(phase)
    if not np.iscomplexobj(vector):
        return rotated.real
    return rotated


def _check_hermitian(op: GridOperator):
    scale = max(1.0, float(abs(op.matrix).max())) if op.nnz else 1.0
    error = op.hermiticity_error()
    if error > HERMITIAN_TOL * scale:
        raise PreconditionError(f"operator is not Hermitian (max asymmetry {error:.3e})")


def dense_ground_energy(op: GridOperator) -> EigenResult:
    """Reference eigensolver for small operators."""
    if op.dim > MAX_DENSE:
        raise ResourceError(f"dense diagonalization is limited to {MAX_DENSE}", op.dim)
    _check_hermitian(op)
    values, vectors = eigh(op.dense(), subset_by_index=[0, 0])
    vector = canonical_phase(vectors[:, 0])
    residual = float(np.linalg.norm(op.apply(vector) - values[0] * vector))
    return EigenResult(float(values[0]), vector, 0, residual, "dense")


def ground_energy(
    op: GridOperator,
    tol: float = 1e-10,
    maxiter: int | None = None,
    seed: int = 0,
    v0: np.ndarray | None = None,
) -> EigenResult:
    """Lowest eigenpair by implicitly restarted Lanczos (ARPACK) with a seeded start."""
    _check_hermitian(op)
    n = op.dim
    if n <= DENSE_LIMIT:
        return dense_ground_energy(op)
    matrix = op.matrix
    calls = 0

    def matvec(v):
        nonlocal calls
        calls += 1
        return matrix @ v

    linop = LinearOperator(matrix.shape, matvec=matvec, dtype=matrix.dtype)
    if v0 is None:
        v0 = np.random.default_rng(seed).standard_normal(n)
    v0 = np.asarray(v0, dtype=matrix.dtype)
    try:
        values, vectors = eigsh(linop, k=1, which="SA", tol=tol, maxiter=maxiter, v0=v0)
    except ArpackNoConvergence as e:
        estimate = residual = None
        if len(e.eigenvalues):
            estimate = float(np.real(e.eigenvalues[0]))
            best = e.eigenvectors[:, 0] / np.linalg.norm(e.eigenvectors[:, 0])
            residual = float(np.linalg.norm(matrix @ best - estimate * best))
        raise ConvergenceError(
            f"Lanczos stopped after {calls} matvecs", estimate=estimate, residual=residual
        ) from e
    value = float(np.real(values[0]))
    vector = canonical_phase(vectors[:, 0] / np.linalg.norm(vectors[:, 0]))
    residual = float(np.linalg.norm(matrix @ vector - value * vector))
    scale = max(1.0, float(abs(matrix).sum(axis=1).max()))
    if residual > max(1e-6, 1e3 * tol) * scale:
        raise ConvergenceError("Lanczos residual too large", estimate=value, residual=residual)
    log.debug("ground energy %.12g after %d matvecs (residual %.2e)", value, calls, residual)
    return EigenResult(value, vector, calls, residual)


def spectral_gap(op: GridOperator, tol: float = 1e-10, seed: int = 0) -> float:
    """E1 - E0 of the two lowest eigenvalues."""
    _check_hermitian(op)
    if op.dim < 2:
        raise ArgumentError("a spectral gap needs at least two states")
    if op.dim <= MAX_DENSE // 4:
        values = eigvalsh(op.dense(), subset_by_index=[0, 1])
    else:
        v0 = np.random.default_rng(seed).standard_normal(op.dim).astype(op.matrix.dtype)
        try:
            values = np.sort(eigsh(op.matrix, k=2, which="SA", tol=tol, v0=v0, return_eigenvectors=False))
        except ArpackNoConvergence as e:
            raise ConvergenceError("Lanczos did not resolve the two lowest eigenvalues") from e
    return float(values[1] - values[0])


def admissible_shift(floors) -> float:
    """zeta = 1 + max(0, -min(floors)); every operator shifted by zeta is >= 1."""
    return 1.0 + max(0.0, -float(min(floors)))


def resolvent_apply(
    op: GridOperator,
    zeta: float,
    vector: np.ndarray,
    floor: float | None = None,
    rtol: float = 1e-8,
    maxiter: int | None = None,
) -> np.ndarray:
    """(op + zeta)^{-1} vector by conjugate gradients."""
    if floor is not None and not floor + zeta > 0:
        raise PreconditionError(
            f"shift zeta={zeta:g} does not clear the spectral floor {floor:g}"
        )
    shifted = op.matrix + zeta * sp.identity(op.dim, format="csr")
    solution, info = cg(shifted, vector, rtol=rtol, atol=0.0, maxiter=maxiter)
    if info > 0:
        residual = float(np.linalg.norm(shifted @ solution - vector))
        raise ConvergenceError(f"CG stopped after {info} iterations", residual=residual)
    if info < 0:
        raise ArgumentError(f"CG rejected its input (info={info})")
    return solution


def resolvent_distance(
    a: GridOperator,
    b: GridOperator,
    zeta: float,
    probes: list[np.ndarray],
    floors: tuple[float, float] | None = None,
    rtol: float = 1e-8,
) -> float:
    """max over probes of ||(a+zeta)^{-1} v - (b+zeta)^{-1} v|| / ||v||."""
    if a.dim != b.dim:
        raise ArgumentError(f"dimension mismatch: {a.dim} vs {b.dim}")
    floor_a, floor_b = floors if floors is not None else (None, None)
    worst = 0.0
    for v in probes:
        ra = resolvent_apply(a, zeta, v, floor_a, rtol)
        rb = resolvent_apply(b, zeta, v, floor_b, rtol)
        worst = max(worst, float(np.linalg.norm(ra - rb) / np.linalg.norm(v)))
    return worst


def default_probes(dim: int, seed: int = 0, count: int = 16, extra=()) -> list[np.ndarray]:
    """Seeded Gaussian vectors, normalized, followed by any extra vectors."""
    rng = np.random.default_rng(seed)
    probes = [v / np.linalg.norm(v) for v in rng.standard_normal((count, dim))]
    probes.extend(np.asarray(v) / np.linalg.norm(v) for v in extra)
    return probes


@dataclass(frozen=True, eq=False)
class ClassicalProblem:
    """H0, the modes and the particle count: everything the classical energy depends on."""

    h0: GridOperator
    grid: SpatialGrid
    modes: ModeSet
    n_particles: int = 1
    origin: tuple[float, ...] | None = None

    @classmethod
    def from_spec(cls, spec: HamiltonianSpec) -> "ClassicalProblem":
        return cls(
            assemble_h0(spec.grid, spec.particles),
            spec.grid,
            spec.field.modes,
            spec.n_particles,
            spec.phase_origin,
        )

    @cached_property
    def single_waves(self) -> np.ndarray:
        return self.modes.plane_waves(self.grid.nodes, self.origin)

    @cached_property
    def particle_waves(self) -> np.ndarray:
        """sum_j e^{i k_n x_j} on every configuration."""
        total = 0
        for j in range(self.n_particles):
            coords = self.grid.particle_coordinates(self.n_particles, j)
            total = total + self.modes.plane_waves(coords, self.origin)
        return total

    def potential(self, z) -> np.ndarray:
        """V_z on the single-particle grid."""
        z = np.asarray(z, dtype=complex)
        return 2 * np.real(self.single_waves @ (np.conj(self.modes.coupling) * z))

    def hamiltonian(self, z) -> GridOperator:
        return self.h0 + potential_operator(self.grid, self.potential(z), self.n_particles)

    def field_energy(self, z) -> float:
        return float(np.abs(np.asarray(z)) ** 2 @ self.modes.omega)

    def moments(self, psi: np.ndarray) -> np.ndarray:
        """m_n = sum_j <psi| e^{i k_n x_j} |psi> for a normalized psi."""
        return (np.abs(psi) ** 2) @ self.particle_waves

    def energy(self, psi: np.ndarray, z) -> float:
        z = np.asarray(z, dtype=complex)
        kinetic = float(np.real(self.h0.expectation(psi)))
        coupling = 2 * float(np.real(np.sum(np.conj(self.modes.coupling) * z * self.moments(psi))))
        return kinetic + coupling + self.field_energy(z)

    def lower_floor(self, h0_ground: float) -> float:
        """sigma(H0) - N^2 sum |lambda|^2 / omega."""
        return h0_ground - self.modes.coupling_floor(self.n_particles)


def optimal_amplitude(problem: ClassicalProblem, psi: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """z_n = -lambda_n conj(m_n) / omega_n, the exact minimizer of E(psi, .)."""
    m = problem.moments(psi)
    coupling = problem.modes.coupling
    omega = problem.modes.omega
    z = np.zeros(problem.modes.size, dtype=complex)
    massless = omega == 0
    drive = np.abs(coupling * m)
    if np.any(massless & (drive > tol)):
        bad = np.flatnonzero(massless & (drive > tol)).tolist()
        raise PreconditionError(f"classical energy is unbounded below along massless modes {bad}")
    live = ~massless
    z[live] = -coupling[live] * np.conj(m[live]) / omega[live]
    return z


@dataclass(frozen=True)
class GseOptions:
    tol: float = 1e-10
    max_iterations: int = 200
    restarts: int = 2
    seed: int = 0
    eigen_tol: float = 1e-11
    refine_atoms: int = 0
    monotone_slack: float = 1e-9


@dataclass(frozen=True, eq=False)
class ClassicalMinimum:
    energy: float
    z: np.ndarray
    state: np.ndarray
    trace: list[float]
    iterations: int
    converged: bool


def alternating_minimization(
    problem: ClassicalProblem, options: GseOptions = GseOptions(), z0=None
) -> ClassicalMinimum:
    """Alternate the psi-step (ground state of H0 + V_z) and the closed-form z-step.

    The trace records E after every half-step and is non-increasing.
    """
    z = np.zeros(problem.modes.size, dtype=complex) if z0 is None else np.asarray(z0, dtype=complex)
    psi = None
    trace: list[float] = []
    current = np.inf
    for iteration in range(1, options.max_iterations + 1):
        eig = ground_energy(
            problem.hamiltonian(z), tol=options.eigen_tol, seed=options.seed, v0=psi
        )
        candidate = eig.vector
        after_psi = eig.value + problem.field_energy(z)
        if psi is not None:
            kept = problem.energy(psi, z)
            if kept < after_psi:
                candidate, after_psi = psi, kept
        psi = candidate
        z = optimal_amplitude(problem, psi)
        after_z = problem.energy(psi, z)
        trace.extend([after_psi, after_z])
        if len(trace) > 2:
            rise = float(np.max(np.diff(trace[-3:])))
            if rise > options.monotone_slack * max(1.0, abs(after_z)):
                log.warning("energy trace rose by %.3e at iteration %d", rise, iteration)
        if current - after_z <= options.tol * max(1.0, abs(after_z)):
            log.debug("alternating minimization converged: E=%.12g in %d steps", after_z, iteration)
            return ClassicalMinimum(after_z, z, psi, trace, iteration, True)
        current = after_z
    raise ConvergenceError(
        f"alternating minimization did not settle in {options.max_iterations} iterations",
        estimate=current,
        trace=trace,
    )


def _measure_energy(problem: ClassicalProblem, mu: ClassicalMeasure) -> float:
    h = problem.hamiltonian(mu.mean_point)
    if h.dim <= MAX_DENSE // 4:
        ground = float(eigvalsh(h.dense(), subset_by_index=[0, 0])[0])
    else:
        ground = ground_energy(h).value
    return ground + mu.field_energy(problem.modes)


def refine_atoms(
    problem: ClassicalProblem, start, atoms: int = 2, seed: int = 0, maxiter: int = 2000
) -> tuple[float, ClassicalMeasure]:
    """Nelder-Mead over K-atom measures started near the Dirac mass at `start`.

    Parameters are K weight logits and the real and imaginary parts of every atom.
    """
    start = np.asarray(start, dtype=complex)
    size = problem.modes.size
    rng = np.random.default_rng(seed)

    def unpack(params):
        logits = np.clip(params[:atoms], -30.0, 30.0)
        weights = np.exp(logits - logits.max())
        weights /= weights.sum()
        flat = params[atoms:].reshape(atoms, 2, size)
        return ClassicalMeasure(weights, flat[:, 0] + 1j * flat[:, 1], "refined")

    jitter = 0.05 * (1.0 + np.abs(start).max(initial=0.0))
    points = np.stack([np.stack([start.real, start.imag]) for _ in range(atoms)])
    points = points + jitter * rng.standard_normal(points.shape)
    x0 = np.concatenate([np.zeros(atoms), points.ravel()])
    result = minimize(
        lambda p: _measure_energy(problem, unpack(p)),
        x0,
        method="Nelder-Mead",
        options={"maxiter": maxiter, "xatol": 1e-8, "fatol": 1e-11},
    )
    mu = unpack(result.x)
    log.debug("atom refinement with %d atoms: E=%.12g (%s)", atoms, result.fun, result.message)
    return float(result.fun), mu


def brute_force_single_atom(
    problem: ClassicalProblem,
    components=((0, "re"), (1, "re"), (1, "im")),
    half_range: float = 0.3,
    points: int = 21,
) -> tuple[float, np.ndarray]:
    """Exhaustive search of E over a box of Dirac atoms; the oracle for small models.

    Each component is (mode, "re" | "im"); unlisted components stay zero.
    """
    if problem.h0.dim > MAX_DENSE // 4:
        raise ResourceError("brute force needs a small particle grid", problem.h0.dim)
    axis = np.linspace(-half_range, half_range, points)
    best, best_z = np.inf, None
    for values in np.stack(np.meshgrid(*([axis] * len(components)), indexing="ij"), -1).reshape(
        -1, len(components)
    ):
        z = np.zeros(problem.modes.size, dtype=complex)
        for (mode, part), v in zip(components, values):
            z[mode] += v if part == "re" else 1j * v
        h = problem.hamiltonian(z).dense()
        energy = float(eigvalsh(h, subset_by_index=[0, 0])[0]) + problem.field_energy(z)
        if energy < best:
            best, best_z = energy, z
    return best, best_z


def classical_ground_energy(problem: ClassicalProblem, options: GseOptions = GseOptions()) -> ClassicalMinimum:
    """Best of a cold start at z = 0 and `restarts` seeded random starts."""
    rng = np.random.default_rng(options.seed)
    scale = np.abs(problem.modes.coupling) / np.maximum(problem.modes.omega, 1e-12)
    starts = [None] + [
        scale * (rng.standard_normal(problem.modes.size) + 1j * rng.standard_normal(problem.modes.size))
        for _ in range(options.restarts)
    ]
    results = [alternating_minimization(problem, options, z0) for z0 in starts]
    best = min(results, key=lambda r: r.energy)
    if options.refine_atoms > 1:
        refined, _ = refine_atoms(problem, best.z, options.refine_atoms, options.seed)
        if refined < best.energy - 1e-8 * max(1.0, abs(best.energy)):
            log.warning("a %d-atom measure undercut the Dirac minimizer: %.12g < %.12g",
                        options.refine_atoms, refined, best.energy)
    return best


def quantum_ground_energy(spec: HamiltonianSpec, tol: float = 1e-10, seed: int = 0) -> EigenResult:
    """Lowest eigenvalue of the full truncated Hamiltonian."""
    spec.check_budget()
    return ground_energy(assemble_full(spec), tol=tol, seed=seed)


def richardson(gap_eps: float, gap_half: float) -> float:
    """Linear extrapolation to eps = 0 from g(eps) and g(eps/2)."""
    return 2 * gap_half - gap_eps


@dataclass(frozen=True)
class GsePoint:
    eps: float
    quantum_energy: float
    classical_infimum: float
    iterations: int
    cutoffs: tuple[int, ...]

    @property
    def gap(self) -> float:
        return self.quantum_energy - self.classical_infimum


@dataclass(frozen=True, eq=False)
class GseResult:
    classical: ClassicalMinimum
    points: list[GsePoint]
    floor: float
    h0_gap: float
    extrapolated: list[float] = field(default_factory=list)

    @property
    def classical_infimum(self) -> float:
        return self.classical.energy

    @property
    def minimizer(self) -> ClassicalMeasure:
        return ClassicalMeasure.dirac(self.classical.z, "gse_minimizer")

    @property
    def gaps(self) -> list[float]:
        return [abs(p.gap) for p in self.points]


def minimize_gse(
    spec: HamiltonianSpec,
    eps_list,
    policy: CutoffPolicy = CutoffPolicy(),
    options: GseOptions = GseOptions(),
    workers: int = 4,
) -> GseResult:
    """Classical infimum, then quantum ground energies along the eps sweep.

    Cutoffs at each eps follow `policy` with the classical minimizer as the
    coherent amplitude the field is expected to carry.
    """
    if spec.field.modes.couples_zero_modes:
        raise PreconditionError(
            "classical energy is unbounded below: a zero-frequency mode is coupled"
        )
    problem = ClassicalProblem.from_spec(spec)
    classical = classical_ground_energy(problem, options)
    h0_ground = ground_energy(problem.h0, seed=options.seed).value
    floor = problem.lower_floor(h0_ground)
    h0_gap = spectral_gap(problem.h0, seed=options.seed)
    log.info("classical infimum %.12g (floor %.6g)", classical.energy, floor)
    eps_list = sorted((float(e) for e in eps_list), reverse=True)

    def solve(eps: float) -> GsePoint:
        space = FockSpace(spec.field.modes, eps, policy.cutoffs(spec.field.modes, eps, classical.z))
        point_spec = spec.with_field(space)
        result = quantum_ground_energy(point_spec, seed=options.seed)
        log.info("eps=%g: quantum ground energy %.12g (dim %d)", eps, result.value, point_spec.dim)
        return GsePoint(eps, result.value, classical.energy, result.iterations, space.cutoffs)

    # scipy holds a lock around ARPACK, so workers overlap assembly and CG solves only
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        points = list(pool.map(solve, eps_list))
    extrapolated = []
    for coarse, fine in zip(points, points[1:]):
        if np.isclose(fine.eps, coarse.eps / 2):
            extrapolated.append(richardson(coarse.gap, fine.gap))
    return GseResult(classical, points, floor, h0_gap, extrapolated)
