"""Truncated bosonic Fock spaces with eps-scaled commutation relations.

Conventions:
  - a|..., m_n, ...> = sqrt(eps * m_n) |..., m_n - 1, ...>, so [a_n, a_n^dag] = eps.
  - a(g) = sum_n g_n a_n is linear in g; a^dag(g) is its adjoint.
  - Xi(f) is the product of single-mode coherent states with beta_n = f_n / sqrt(eps);
    it satisfies <Xi(f)| a_n |Xi(f)> = f_n.
  - Flat basis index is the mixed-radix encoding of the occupation tuple with
    mode 0 fastest.
"""

import functools
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln
from scipy.stats import poisson

from shared._compat import StrEnum
from shared.errors import ArgumentError, ConfigError, CutoffTooSmallError, PreconditionError
from shared.numerics.operators import GridOperator, kron_chain

log = logging.getLogger("qclab.fock")

DEFAULT_TRUNCATION_TOL = 1e-8
NORM_TOL = 1e-10


class Family(StrEnum):
    DISCRETE = "discrete"
    NELSON = "nelson"
    POLARON = "polaron"


# form factors lambda(k) before the sqrt(dk) quadrature weight
FORM_FACTORS = {
    "constant": lambda k2, omega, cutoff: np.ones_like(omega),
    "inverse_sqrt_omega": lambda k2, omega, cutoff: 1.0 / np.sqrt(2.0 * omega),
    "gaussian": lambda k2, omega, cutoff: np.exp(-k2 / (2.0 * cutoff**2)) / np.sqrt(2.0 * omega),
}
POLYNOMIAL_INVERSE = frozenset({"constant", "inverse_sqrt_omega"})


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


def momentum_grid(dim: int, k_max: float, points: int, exclude_origin: bool = False):
    """Uniform symmetric k-grid on [-k_max, k_max]^d. Returns (k, cell_volume)."""
    if points < 2:
        raise ConfigError(f"momentum grid needs at least 2 points per axis, got {points}")
    axis = np.linspace(-k_max, k_max, points)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    k = np.stack([m.ravel() for m in mesh], axis=1)
    if exclude_origin:
        k = k[np.linalg.norm(k, axis=1) > 0]
    cell_volume = (axis[1] - axis[0]) ** dim
    return k, float(cell_volume)


@dataclass(frozen=True, eq=False)
class ModeSet:
    """The field's modes: wave vectors k_n, frequencies omega_n and couplings lambda_n.

    Continuum families carry the quadrature weight inside lambda_n, so sums over
    modes approximate integrals over k.
    """

    dim: int
    k: np.ndarray
    omega: np.ndarray
    coupling: np.ndarray
    family: Family = Family.DISCRETE
    cell_volume: float = 1.0
    form_factor: str = "custom"
    mass: float | None = None

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"spatial dimension must be 1, 2 or 3, got {self.dim}")
        k = np.asarray(self.k, dtype=float).reshape(-1, self.dim)
        omega = np.asarray(self.omega, dtype=float).reshape(-1)
        coupling = np.asarray(self.coupling, dtype=complex).reshape(-1)
        if not (len(k) == len(omega) == len(coupling)):
            raise ConfigError(
                f"mode arrays disagree: {len(k)} wave vectors, {len(omega)} frequencies, "
                f"{len(coupling)} couplings"
            )
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(omega))):
            raise ConfigError("wave vectors and frequencies must be finite")
        if np.any(omega < 0):
            raise ConfigError(f"frequencies must be >= 0, got min {omega.min():.3g}")
        if self.cell_volume <= 0:
            raise ConfigError(f"cell volume must be positive, got {self.cell_volume}")
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.POLARON:
            norms = np.linalg.norm(k, axis=1)
            if np.any(norms == 0):
                raise ConfigError("polaron form factor is singular at k = 0")
            if not np.allclose(omega, 1.0):
                raise ConfigError("polaron modes must have omega = 1")
            expected = norms ** (-(self.dim - 1) / 2) * np.sqrt(self.cell_volume)
            if not np.allclose(coupling, expected, rtol=1e-12, atol=0):
                raise ConfigError("polaron couplings must equal |k|^(-(d-1)/2) sqrt(dk)")
        object.__setattr__(self, "k", _readonly(k))
        object.__setattr__(self, "omega", _readonly(omega))
        object.__setattr__(self, "coupling", _readonly(coupling))

    @classmethod
    def discrete(cls, k, coupling, omega=None, dim: int = 1) -> "ModeSet":
        """Discrete modes; omega defaults to |k_n|."""
        k = np.asarray(k, dtype=float).reshape(-1, dim)
        if omega is None:
            omega = np.linalg.norm(k, axis=1)
        return cls(dim=dim, k=k, omega=omega, coupling=coupling, family=Family.DISCRETE)

    @classmethod
    def nelson_from_wavevectors(
        cls,
        k,
        cell_volume: float,
        coupling_strength: float = 1.0,
        mass: float = 1.0,
        form_factor: str = "inverse_sqrt_omega",
        uv_cutoff: float = np.inf,
    ) -> "ModeSet":
        k = np.atleast_2d(np.asarray(k, dtype=float))
        if form_factor not in FORM_FACTORS:
            raise ConfigError(f"unknown form factor {form_factor!r}; known: {sorted(FORM_FACTORS)}")
        k2 = np.sum(k**2, axis=1)
        omega = np.sqrt(k2 + mass**2)
        if form_factor != "constant" and np.any(omega == 0):
            raise ConfigError(f"form factor {form_factor!r} needs omega > 0 on every mode")
        shape = FORM_FACTORS[form_factor](k2, omega, uv_cutoff)
        coupling = coupling_strength * shape * np.sqrt(cell_volume)
        return cls(
            dim=k.shape[1],
            k=k,
            omega=omega,
            coupling=coupling,
            family=Family.NELSON,
            cell_volume=cell_volume,
            form_factor=form_factor,
            mass=mass,
        )

    @classmethod
    def nelson(
        cls,
        dim: int,
        k_max: float,
        points: int,
        coupling_strength: float = 1.0,
        mass: float = 1.0,
        form_factor: str = "inverse_sqrt_omega",
        uv_cutoff: float = np.inf,
    ) -> "ModeSet":
        k, cell_volume = momentum_grid(dim, k_max, points)
        return cls.nelson_from_wavevectors(
            k, cell_volume, coupling_strength, mass, form_factor, uv_cutoff
        )

    @classmethod
    def polaron(cls, dim: int, k_max: float, points: int) -> "ModeSet":
        k, cell_volume = momentum_grid(dim, k_max, points, exclude_origin=True)
        norms = np.linalg.norm(k, axis=1)
        coupling = norms ** (-(dim - 1) / 2) * np.sqrt(cell_volume)
        return cls(
            dim=dim,
            k=k,
            omega=np.ones(len(k)),
            coupling=coupling,
            family=Family.POLARON,
            cell_volume=cell_volume,
            form_factor="polaron",
        )

    @property
    def size(self) -> int:
        return len(self.omega)

    @property
    def is_massive(self) -> bool:
        if self.family is Family.POLARON:
            return True
        if self.mass is not None:
            return self.mass > 0
        return self.size > 0 and float(self.omega.min()) > 0

    @property
    def couples_zero_modes(self) -> bool:
        """Some omega_n = 0 mode carries coupling, so the classical energy has no floor."""
        return bool(np.any((self.omega == 0) & (self.coupling != 0)))

    @property
    def in_proven_scope(self) -> bool:
        # the polaron statements need d >= 2; d = 1 form factors are a cheap test bed only
        return not (self.family is Family.POLARON and self.dim < 2)

    @property
    def has_polynomial_inverse(self) -> bool:
        return self.form_factor in POLYNOMIAL_INVERSE and bool(np.all(self.coupling != 0))

    def select(self, indices) -> "ModeSet":
        indices = np.atleast_1d(indices)
        return ModeSet(
            dim=self.dim,
            k=self.k[indices],
            omega=self.omega[indices],
            coupling=self.coupling[indices],
            family=self.family,
            cell_volume=self.cell_volume,
            form_factor=self.form_factor,
            mass=self.mass,
        )

    def coupling_norm(self) -> float:
        return float(np.linalg.norm(self.coupling))

    def coupling_floor(self, n_particles: int = 1) -> float:
        """N^2 ||omega^{-1/2} lambda||^2, the depth of the interaction's energy floor."""
        if self.couples_zero_modes:
            return np.inf
        weight = np.abs(self.coupling) ** 2
        nonzero = weight > 0
        return float(n_particles**2 * np.sum(weight[nonzero] / self.omega[nonzero]))

    def plane_waves(self, points: np.ndarray, origin=None) -> np.ndarray:
        """e^{i k_n . (x - origin)} for every point (rows) and mode (columns)."""
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if origin is not None:
            points = points - np.asarray(origin, dtype=float)
        return np.exp(1j * points @ self.k.T)


@dataclass(frozen=True, eq=False)
class FockSpace:
    """Occupation basis 0 <= m_n <= M_n per mode at a fixed eps."""

    modes: ModeSet
    eps: float
    cutoffs: tuple[int, ...]

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        cutoffs = tuple(int(c) for c in self.cutoffs)
        if len(cutoffs) != self.modes.size:
            raise ConfigError(f"{len(cutoffs)} cutoffs for {self.modes.size} modes")
        if any(c < 0 for c in cutoffs):
            raise ConfigError(f"cutoffs must be >= 0, got {cutoffs}")
        object.__setattr__(self, "cutoffs", cutoffs)

    @classmethod
    def uniform(cls, modes: ModeSet, eps: float, cutoff: int) -> "FockSpace":
        return cls(modes, eps, (cutoff,) * modes.size)

    @cached_property
    def radices(self) -> np.ndarray:
        return np.array(self.cutoffs, dtype=np.int64) + 1

    @cached_property
    def strides(self) -> np.ndarray:
        return np.cumprod(np.concatenate(([1], self.radices)))[:-1].astype(np.int64)

    @property
    def dim(self) -> int:
        return int(np.prod(self.radices))

    @cached_property
    def occupations(self) -> np.ndarray:
        """(dim, modes) occupation table, row i is the tuple of flat index i."""
        flat = np.arange(self.dim, dtype=np.int64)[:, None]
        return (flat // self.strides[None, :]) % self.radices[None, :]

    def index(self, occupation) -> int:
        occupation = np.asarray(occupation, dtype=np.int64)
        if occupation.shape != (self.modes.size,) or np.any(occupation < 0) or np.any(
            occupation > np.asarray(self.cutoffs)
        ):
            raise ArgumentError(f"occupation {tuple(occupation)} outside cutoffs {self.cutoffs}")
        return int(occupation @ self.strides)

    def occupation(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.dim:
            raise ArgumentError(f"basis index {index} outside [0, {self.dim})")
        return tuple(int(m) for m in self.occupations[index])

    def mode_space(self, n: int) -> "FockSpace":
        """The single-mode factor space of mode n."""
        return FockSpace(self.modes.select([n]), self.eps, (self.cutoffs[n],))

    def below_cutoff(self) -> np.ndarray:
        """Mask of basis states with every m_n <= M_n - 1."""
        return np.all(self.occupations < np.asarray(self.cutoffs)[None, :], axis=1)


def _ladder(cutoff: int, eps: float) -> sp.csr_matrix:
    if cutoff == 0:
        return sp.csr_matrix((1, 1))
    values = np.sqrt(eps * np.arange(1, cutoff + 1))
    return sp.diags(values, offsets=1, shape=(cutoff + 1, cutoff + 1), format="csr")


def annihilation(space: FockSpace, n: int) -> GridOperator:
    if not 0 <= n < space.modes.size:
        raise ArgumentError(f"mode index {n} outside [0, {space.modes.size})")
    # mode 0 is the fastest index, so it is the rightmost Kronecker factor
    factors = [
        _ladder(space.cutoffs[j], space.eps) if j == n else sp.identity(space.cutoffs[j] + 1)
        for j in reversed(range(space.modes.size))
    ]
    return GridOperator(kron_chain(factors), "fock")


def creation(space: FockSpace, n: int) -> GridOperator:
    return annihilation(space, n).adjoint()


def field_annihilation(space: FockSpace, g) -> GridOperator:
    """a(g) = sum_n g_n a_n."""
    g = np.asarray(g, dtype=complex)
    if g.shape != (space.modes.size,):
        raise ArgumentError(f"test function has {g.size} entries for {space.modes.size} modes")
    total = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for n, gn in enumerate(g):
        if gn != 0:
            total = total + gn * annihilation(space, n).matrix
    return GridOperator(total, "fock")


def dgamma(space: FockSpace, weights) -> GridOperator:
    """Second quantization of multiplication by w: diagonal sum_n w_n eps m_n."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (space.modes.size,):
        raise ArgumentError(f"{weights.size} weights for {space.modes.size} modes")
    if np.any(weights < 0):
        raise ArgumentError(f"dGamma weights must be >= 0, got min {weights.min():.3g}")
    diag = space.eps * (space.occupations @ weights)
    return GridOperator(sp.diags(diag, format="csr"), "fock")


def number_operator(space: FockSpace) -> GridOperator:
    return dgamma(space, np.ones(space.modes.size))


def field_energy(space: FockSpace) -> GridOperator:
    return dgamma(space, space.modes.omega)


@dataclass(frozen=True, eq=False)
class FockState:
    space: FockSpace
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        if coeffs.size != self.space.dim:
            raise ArgumentError(f"{coeffs.size} coefficients for a basis of size {self.space.dim}")
        object.__setattr__(self, "coeffs", _readonly(coeffs))

    @classmethod
    def vacuum(cls, space: FockSpace) -> "FockState":
        coeffs = np.zeros(space.dim, dtype=complex)
        coeffs[0] = 1.0
        return cls(space, coeffs)

    @classmethod
    def number_state(cls, space: FockSpace, occupation) -> "FockState":
        coeffs = np.zeros(space.dim, dtype=complex)
        coeffs[space.index(occupation)] = 1.0
        return cls(space, coeffs)

    @classmethod
    def random(
        cls, space: FockSpace, rng: np.random.Generator, below_cutoff: bool = False
    ) -> "FockState":
        coeffs = rng.standard_normal(space.dim) + 1j * rng.standard_normal(space.dim)
        if below_cutoff:
            coeffs = np.where(space.below_cutoff(), coeffs, 0.0)
        return cls(space, coeffs / np.linalg.norm(coeffs))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm() ** 2 - 1.0) <= tol

    def normalized(self) -> "FockState":
        norm = self.norm()
        if norm == 0:
            raise PreconditionError("cannot normalize the zero vector")
        return FockState(self.space, self.coeffs / norm)

    def expect(self, op: GridOperator) -> complex:
        return field_expectation(self, op)

    def mean_annihilation(self) -> np.ndarray:
        return np.array(
            [field_expectation(self, annihilation(self.space, n)) for n in range(self.space.modes.size)]
        )

    def mean_creation(self) -> np.ndarray:
        return np.array(
            [field_expectation(self, creation(self.space, n)) for n in range(self.space.modes.size)]
        )

    def mean_energy(self, weights=None) -> float:
        weights = self.space.modes.omega if weights is None else weights
        return float(field_expectation(self, dgamma(self.space, weights)).real)


@dataclass(frozen=True, eq=False)
class ProductState:
    """Tensor product of single-mode states, one factor per mode of `modes`.

    Used where the full product basis would be astronomically large (Fourier
    modes of a trap window) but the state factorizes.
    """

    modes: ModeSet
    factors: tuple[FockState, ...]

    def __post_init__(self):
        factors = tuple(self.factors)
        if len(factors) != self.modes.size:
            raise ArgumentError(f"{len(factors)} factors for {self.modes.size} modes")
        if any(f.space.modes.size != 1 for f in factors):
            raise ArgumentError("product factors must be single-mode states")
        object.__setattr__(self, "factors", factors)

    @property
    def eps(self) -> float:
        return self.factors[0].space.eps if self.factors else 1.0

    @property
    def cutoffs(self) -> tuple[int, ...]:
        return tuple(f.space.cutoffs[0] for f in self.factors)

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(np.prod([f.norm() ** 2 for f in self.factors]) - 1.0) <= tol

    def mean_annihilation(self) -> np.ndarray:
        return np.array([f.mean_annihilation()[0] for f in self.factors])

    def mean_creation(self) -> np.ndarray:
        return np.array([f.mean_creation()[0] for f in self.factors])

    def mean_energy(self, weights=None) -> float:
        weights = self.modes.omega if weights is None else np.asarray(weights, dtype=float)
        return float(sum(f.mean_energy([w]) for f, w in zip(self.factors, weights)))

    def to_fock_state(self) -> FockState:
        space = FockSpace(self.modes, self.eps, self.cutoffs)
        return FockState(space, _product_vector([f.coeffs for f in self.factors]))


def field_expectation(state: FockState, op: GridOperator) -> complex:
    """<Psi|op|Psi>."""
    if op.dim != state.space.dim:
        raise ArgumentError(f"operator dimension {op.dim} does not match state {state.space.dim}")
    return complex(np.vdot(state.coeffs, op.matrix @ state.coeffs))


def truncation_tail(amplitude: complex, eps: float, cutoff: int) -> float:
    """Poisson mass above the cutoff for the coherent amplitude."""
    mean = abs(amplitude) ** 2 / eps
    if mean == 0:
        return 0.0
    return float(poisson.sf(cutoff, mean))


def required_cutoff(amplitude: complex, eps: float, tol: float = DEFAULT_TRUNCATION_TOL) -> int:
    """Smallest M whose Poisson tail at mean |f|^2/eps is <= tol."""
    mean = abs(amplitude) ** 2 / eps
    if mean == 0:
        return 0
    cutoff = max(int(poisson.isf(tol, mean)), 0)
    while poisson.sf(cutoff, mean) > tol:
        cutoff += 1
    while cutoff > 0 and poisson.sf(cutoff - 1, mean) <= tol:
        cutoff -= 1
    return cutoff


def coherent_amplitudes(beta: complex, cutoff: int) -> np.ndarray:
    """Normalized truncated Poisson series e^{-|b|^2/2} b^m / sqrt(m!), m <= cutoff."""
    vector = np.zeros(cutoff + 1, dtype=complex)
    if beta == 0:
        vector[0] = 1.0
        return vector
    m = np.arange(cutoff + 1)
    log_magnitude = m * np.log(abs(beta)) - 0.5 * gammaln(m + 1) - 0.5 * abs(beta) ** 2
    vector = np.exp(log_magnitude) * np.exp(1j * m * np.angle(beta))
    return vector / np.linalg.norm(vector)


def _product_vector(vectors: list[np.ndarray]) -> np.ndarray:
    if not vectors:
        return np.ones(1, dtype=complex)
    return functools.reduce(np.kron, list(reversed(vectors)))


def _check_adequate(f: np.ndarray, eps: float, cutoffs, tol: float):
    for n, (fn, cutoff) in enumerate(zip(f, cutoffs)):
        tail = truncation_tail(fn, eps, cutoff)
        if tail > tol:
            raise CutoffTooSmallError(n, cutoff, required_cutoff(fn, eps, tol), tail)


def coherent_state(space: FockSpace, f, tol: float = DEFAULT_TRUNCATION_TOL) -> FockState:
    """Xi(f) on the truncated space, synthesized mode by mode."""
    f = np.asarray(f, dtype=complex).reshape(-1)
    if f.shape != (space.modes.size,):
        raise ArgumentError(f"{f.size} amplitudes for {space.modes.size} modes")
    _check_adequate(f, space.eps, space.cutoffs, tol)
    vectors = [
        coherent_amplitudes(fn / np.sqrt(space.eps), cutoff) for fn, cutoff in zip(f, space.cutoffs)
    ]
    return FockState(space, _product_vector(vectors))


def coherent_product_state(
    modes: ModeSet,
    f,
    eps: float,
    tol: float = DEFAULT_TRUNCATION_TOL,
    cutoffs=None,
    margin: int = 2,
) -> ProductState:
    """Xi(f) as a product state; cutoffs default to the adequate rule plus margin."""
    f = np.asarray(f, dtype=complex).reshape(-1)
    if f.shape != (modes.size,):
        raise ArgumentError(f"{f.size} amplitudes for {modes.size} modes")
    if cutoffs is None:
        cutoffs = [required_cutoff(fn, eps, tol) + margin for fn in f]
    _check_adequate(f, eps, cutoffs, tol)
    factors = []
    for n, (fn, cutoff) in enumerate(zip(f, cutoffs)):
        space = FockSpace(modes.select([n]), eps, (cutoff,))
        factors.append(FockState(space, coherent_amplitudes(fn / np.sqrt(eps), cutoff)))
    return ProductState(modes, tuple(factors))


def coherent_overlap(z1, z2, eps: float) -> complex:
    """<Xi(z1)|Xi(z2)> = exp((i/eps) Im sum conj(z1) z2 - ||z1 - z2||^2 / (2 eps))."""
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    phase = np.vdot(z1, z2).imag / eps
    return complex(np.exp(1j * phase - np.linalg.norm(z1 - z2) ** 2 / (2 * eps)))


def displace(state: FockState, f) -> FockState:
    """Weyl displacement by matrix exponential; the oracle for coherent_state.

    The generator is (sum_n f_n a_n^dag - conj(f_n) a_n) / eps, so displace(vacuum, f)
    approaches Xi(f) as the cutoffs grow.
    """
    f = np.asarray(f, dtype=complex)
    create = field_annihilation(state.space, np.conj(f)).adjoint()
    annihilate = field_annihilation(state.space, np.conj(f))
    generator = (create.matrix - annihilate.matrix) / state.space.eps
    return FockState(state.space, expm_multiply(generator.tocsc(), state.coeffs))


def superpose(states: list[FockState], amplitudes) -> FockState:
    """Normalized sum_i c_i |state_i>."""
    if not states:
        raise ArgumentError("superposition of no states")
    space = states[0].space
    if any(s.space.dim != space.dim for s in states):
        raise ArgumentError("superposed states live on different spaces")
    coeffs = sum(c * s.coeffs for c, s in zip(amplitudes, states))
    return FockState(space, coeffs).normalized()


@dataclass(frozen=True)
class CutoffPolicy:
    """How occupation cutoffs are chosen for a given eps."""

    kind: str = "adequate"
    fixed: int = 8
    truncation_tol: float = DEFAULT_TRUNCATION_TOL
    margin: int = 2
    ceiling: int = 64

    def __post_init__(self):
        if self.kind not in ("fixed", "adequate"):
            raise ConfigError(f"cutoff policy must be 'fixed' or 'adequate', got {self.kind!r}")

    def cutoffs(self, modes: ModeSet, eps: float, amplitudes=None) -> tuple[int, ...]:
        if self.kind == "fixed":
            return (self.fixed,) * modes.size
        amplitudes = np.zeros(modes.size) if amplitudes is None else np.asarray(amplitudes)
        cutoffs = []
        for n, fn in enumerate(amplitudes):
            cutoff = required_cutoff(fn, eps, self.truncation_tol) + self.margin
            if cutoff > self.ceiling:
                raise CutoffTooSmallError(n, self.ceiling, cutoff, truncation_tail(fn, eps, self.ceiling))
            cutoffs.append(cutoff)
        log.debug("cutoffs at eps=%g: %s", eps, cutoffs)
        return tuple(cutoffs)

    def space(self, modes: ModeSet, eps: float, amplitudes=None) -> FockSpace:
        return FockSpace(modes, eps, self.cutoffs(modes, eps, amplitudes))
