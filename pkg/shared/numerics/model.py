"""Particle grids and assembly of H0, the interaction A(x_j) and the full Hamiltonian.

The N-particle configuration index is the C-order ravel of (x_1, ..., x_N) with every
particle contributing d grid axes; the tensor product with the field puts the
particle index slowest: H acts on grid (x) Fock.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from shared._compat import StrEnum
from shared.errors import ArgumentError, ConfigError, DataError, ResourceError
from shared.numerics.fock import Family, FockSpace, annihilation, field_energy
from shared.numerics.operators import GridOperator, diagonal, embed_fock, embed_grid, kron_chain

log = logging.getLogger("qclab.model")

DEFAULT_MAX_DIMENSION = 2_000_000
ALIASING_LIMIT = np.pi / 4


class Boundary(StrEnum):
    DIRICHLET = "dirichlet"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid on [-L, L]^d.

    Dirichlet grids hold G interior nodes (walls at +-L excluded, h = 2L/(G+1));
    periodic grids hold G nodes with h = 2L/G.
    """

    dim: int
    half_width: float
    points: int
    boundary: Boundary = Boundary.DIRICHLET

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"grid dimension must be 1, 2 or 3, got {self.dim}")
        if self.points < 8:
            raise ConfigError(f"need at least 8 points per axis, got {self.points}")
        if not self.half_width > 0:
            raise ConfigError(f"half width must be positive, got {self.half_width}")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def spacing(self) -> float:
        if self.boundary is Boundary.DIRICHLET:
            return 2 * self.half_width / (self.points + 1)
        return 2 * self.half_width / self.points

    @cached_property
    def axis(self) -> np.ndarray:
        h = self.spacing
        if self.boundary is Boundary.DIRICHLET:
            return -self.half_width + h * np.arange(1, self.points + 1)
        return -self.half_width + h * np.arange(self.points)

    @property
    def size(self) -> int:
        return self.points**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @cached_property
    def nodes(self) -> np.ndarray:
        """(G^d, d) coordinates of the single-particle nodes."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def interior_mask(self, fraction: float = 0.8) -> np.ndarray:
        """Nodes inside the central `fraction` of the window on every axis."""
        limit = fraction * self.half_width
        return np.all(np.abs(self.nodes) <= limit + 1e-12, axis=1)

    def second_difference(self) -> sp.csr_matrix:
        """-d^2/dx^2 on one axis, three-point stencil."""
        G, h = self.points, self.spacing
        main = np.full(G, 2.0)
        off = np.full(G - 1, -1.0)
        matrix = sp.diags([off, main, off], offsets=[-1, 0, 1], format="lil")
        if self.boundary is Boundary.PERIODIC:
            matrix[0, G - 1] = -1.0
            matrix[G - 1, 0] = -1.0
        return matrix.tocsr() / h**2

    def kinetic(self, n_particles: int = 1) -> sp.csr_matrix:
        """-Laplacian over all d*N coordinates."""
        axes = self.dim * n_particles
        d2 = self.second_difference()
        eye = sp.identity(self.points, format="csr")
        total = sp.csr_matrix((self.points**axes, self.points**axes))
        for c in range(axes):
            total = total + kron_chain([d2 if a == c else eye for a in range(axes)])
        return total.tocsr()

    def configuration_size(self, n_particles: int) -> int:
        return self.size**n_particles

    def particle_coordinates(self, n_particles: int, j: int) -> np.ndarray:
        """(G^{dN}, d) coordinates of particle j at every configuration."""
        if not 0 <= j < n_particles:
            raise ArgumentError(f"particle index {j} outside [0, {n_particles})")
        columns = []
        for a in range(self.dim):
            shape = [1] * (self.dim * n_particles)
            shape[j * self.dim + a] = self.points
            coordinate = np.broadcast_to(
                self.axis.reshape(shape), (self.points,) * (self.dim * n_particles)
            )
            columns.append(coordinate.ravel())
        return np.stack(columns, axis=1)

    def lift(self, samples: np.ndarray, n_particles: int) -> np.ndarray:
        """sum_j v(x_j) on the configuration grid from single-particle samples v."""
        samples = np.asarray(samples).reshape(self.shape)
        axes = self.dim * n_particles
        total = np.zeros((self.points,) * axes, dtype=samples.dtype)
        for j in range(n_particles):
            shape = [1] * axes
            shape[j * self.dim : (j + 1) * self.dim] = self.shape
            total = total + samples.reshape(shape)
        return total.ravel()


@dataclass(frozen=True, eq=False)
class ParticleModel:
    """N distinguishable particles in the potential U sampled on the configuration grid.

    `decomposition` tags the declared split of U into a positive part and a
    form-small part; it is metadata only.
    """

    n_particles: int
    potential: np.ndarray
    decomposition: str = "positive"
    label: str = "custom"

    def __post_init__(self):
        if self.n_particles < 1:
            raise ConfigError(f"need at least one particle, got {self.n_particles}")
        object.__setattr__(self, "potential", np.asarray(self.potential, dtype=float).reshape(-1))


def _harmonic(coords, strength=1.0, **_):
    return strength * np.sum(coords**2, axis=-1)


def _power(coords, strength=1.0, exponent=2.0, **_):
    if exponent <= 0:
        raise ConfigError(f"power trap exponent must be > 0, got {exponent}")
    return strength * np.linalg.norm(coords, axis=-1) ** exponent


def _cosine(coords, strength=1.0, wavenumber=1.0, **_):
    return strength * np.sum(np.cos(wavenumber * coords), axis=-1)


def _zero(coords, **_):
    return np.zeros(coords.shape[0])


# single-particle potentials: coords is (points, d)
SINGLE_PARTICLE = {
    "zero": _zero,
    "harmonic": _harmonic,
    "power": _power,
    "cosine": _cosine,
}
DECOMPOSITION = {"zero": "positive", "harmonic": "positive", "power": "positive", "cosine": "small"}


def single_particle_potential(grid: SpatialGrid, kind: str, **params) -> np.ndarray:
    if kind not in SINGLE_PARTICLE:
        raise ConfigError(f"unknown potential {kind!r}; known: {sorted(SINGLE_PARTICLE)}")
    return SINGLE_PARTICLE[kind](grid.nodes, **params)


def named_potential(grid: SpatialGrid, n_particles: int, kind: str, **params) -> ParticleModel:
    """Built-in closed-form potentials.

    Single-particle kinds are summed over particles. "soft_coulomb" is the pair
    interaction strength / sqrt(|x_1 - x_2|^2 + softening^2) for N = 2.
    """
    if kind == "soft_coulomb":
        if n_particles != 2:
            raise ConfigError("soft_coulomb is a two-particle interaction")
        x1 = grid.particle_coordinates(2, 0)
        x2 = grid.particle_coordinates(2, 1)
        strength = params.get("strength", 1.0)
        softening = params.get("softening", 1.0)
        values = strength / np.sqrt(np.sum((x1 - x2) ** 2, axis=1) + softening**2)
        tag = "positive" if strength >= 0 else "small"
        return ParticleModel(2, values, tag, kind)
    single = single_particle_potential(grid, kind, **params)
    return ParticleModel(n_particles, grid.lift(single, n_particles), DECOMPOSITION[kind], kind)


def potential_from_file(grid: SpatialGrid, n_particles: int, path: Path) -> ParticleModel:
    """Samples on the configuration grid from a .npy file or a whitespace text file."""
    path = Path(path)
    try:
        values = np.load(path) if path.suffix == ".npy" else np.loadtxt(path)
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read potential samples from {path}: {e}") from e
    values = np.asarray(values, dtype=float).reshape(-1)
    expected = grid.configuration_size(n_particles)
    if values.size != expected:
        raise DataError(f"{path} holds {values.size} samples, grid needs {expected}")
    return ParticleModel(n_particles, values, "positive", path.name)


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    grid: SpatialGrid
    particles: ParticleModel
    field: FockSpace
    phase_origin: tuple[float, ...] | None = None
    max_dimension: int = DEFAULT_MAX_DIMENSION

    def __post_init__(self):
        if self.field.modes.dim != self.grid.dim:
            raise ConfigError(
                f"field modes live in d={self.field.modes.dim}, grid in d={self.grid.dim}"
            )
        expected = self.grid.configuration_size(self.particles.n_particles)
        if self.particles.potential.size != expected:
            raise ConfigError(
                f"potential has {self.particles.potential.size} samples, grid needs {expected}"
            )

    @property
    def family(self) -> Family:
        return self.field.modes.family

    @property
    def n_particles(self) -> int:
        return self.particles.n_particles

    @property
    def particle_dim(self) -> int:
        return self.grid.configuration_size(self.n_particles)

    @property
    def dim(self) -> int:
        return self.particle_dim * self.field.dim

    def with_field(self, field_space: FockSpace) -> "HamiltonianSpec":
        return HamiltonianSpec(
            self.grid, self.particles, field_space, self.phase_origin, self.max_dimension
        )

    def check_budget(self):
        if self.dim > self.max_dimension:
            raise ResourceError(
                f"tensor space exceeds the budget of {self.max_dimension}", self.dim
            )


def assemble_h0(grid: SpatialGrid, particles: ParticleModel) -> GridOperator:
    """-Laplacian + U on the configuration grid."""
    U = particles.potential
    expected = grid.configuration_size(particles.n_particles)
    if U.size != expected:
        raise DataError(f"potential has {U.size} samples, grid needs {expected}")
    if not np.all(np.isfinite(U)):
        bad = int(np.flatnonzero(~np.isfinite(U))[0])
        raise DataError(f"potential sample {bad} is not finite ({U[bad]})")
    matrix = grid.kinetic(particles.n_particles) + sp.diags(U, format="csr")
    log.debug("H0 assembled: dim=%d nnz=%d", matrix.shape[0], matrix.nnz)
    return GridOperator(matrix, "grid")


def check_phase_sampling(spec: HamiltonianSpec):
    worst = float(np.max(np.abs(spec.field.modes.k), initial=0.0)) * spec.grid.spacing
    if worst > ALIASING_LIMIT:
        raise ConfigError(
            f"|k|h = {worst:.3f} exceeds pi/4; refine the grid or shrink the k-window"
        )


def assemble_interaction(spec: HamiltonianSpec, j: int) -> GridOperator:
    """A(x_j) = sum_n lambda_n e^{-i k_n x_j} (x) a_n^dag + conj(.) (x) a_n."""
    modes = spec.field.modes
    if not 0 <= j < spec.n_particles:
        raise ArgumentError(f"particle index {j} outside [0, {spec.n_particles})")
    if modes.family is Family.POLARON and np.any(np.linalg.norm(modes.k, axis=1) == 0):
        raise ConfigError("polaron interaction has a k = 0 mode")
    check_phase_sampling(spec)
    spec.check_budget()
    coords = spec.grid.particle_coordinates(spec.n_particles, j)
    waves = modes.plane_waves(coords, spec.phase_origin)  # e^{+i k x}
    total = sp.csr_matrix((spec.dim, spec.dim), dtype=complex)
    for n in range(modes.size):
        a = annihilation(spec.field, n).matrix
        down = sp.diags(np.conj(modes.coupling[n]) * waves[:, n], format="csr")
        total = total + sp.kron(down, a, format="csr")
    # the creation half is the adjoint of the annihilation half
    total = total + total.conj().T
    return GridOperator(total.tocsr(), "product")


def assemble_full(spec: HamiltonianSpec) -> GridOperator:
    """H0 (x) I + I (x) dGamma(omega) + sum_j A(x_j)."""
    spec.check_budget()
    h0 = assemble_h0(spec.grid, spec.particles)
    total = embed_grid(h0, spec.field.dim) + embed_fock(field_energy(spec.field), spec.particle_dim)
    for j in range(spec.n_particles):
        total = total + assemble_interaction(spec, j)
    log.debug("full H assembled: dim=%d nnz=%d eps=%g", total.dim, total.nnz, spec.field.eps)
    return total


def potential_operator(grid: SpatialGrid, samples: np.ndarray, n_particles: int) -> GridOperator:
    """Multiplication by sum_j v(x_j) on the configuration grid."""
    return diagonal(grid.lift(np.real(samples), n_particles), "grid")
