"""Effective particle potentials: partial traces over field states and their classical limits.

All potentials share the normalization V(x) = 2 Re sum_n conj(lambda_n) z_n e^{i k_n x},
with quadrature weights already inside lambda_n and z_n. Fourier transforms follow
f^(k) = (2 pi)^{-d/2} int dx e^{-ikx} f(x); discrete versions carry explicit
cell volumes.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from shared.errors import ArgumentError, PreconditionError
from shared.numerics.fock import (
    DEFAULT_TRUNCATION_TOL,
    Family,
    FockSpace,
    FockState,
    ModeSet,
    ProductState,
    coherent_state,
    superpose,
)
from shared.numerics.model import HamiltonianSpec, SpatialGrid, assemble_h0, potential_operator
from shared.numerics.operators import GridOperator

log = logging.getLogger("qclab.effective")

WEIGHT_TOL = 1e-12
REALNESS_TOL = 1e-12


@dataclass(frozen=True)
class Provenance:
    kind: str  # "partial_trace" | "classical" | "target"
    label: str = ""
    eps: float | None = None

    def __str__(self) -> str:
        if self.eps is None:
            return f"{self.kind}({self.label})"
        return f"{self.kind}({self.label}, eps={self.eps:g})"


@dataclass(frozen=True, eq=False)
class ClassicalMeasure:
    """Finite convex combination of Dirac masses sum_i alpha_i delta(z - z_i)."""

    weights: np.ndarray
    points: np.ndarray
    label: str = "mu"

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        points = np.atleast_2d(np.asarray(self.points, dtype=complex))
        if len(weights) != len(points):
            raise ArgumentError(f"{len(weights)} weights for {len(points)} atoms")
        if np.any(weights <= 0):
            raise ArgumentError("atom weights must be positive")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ArgumentError(f"atom weights sum to {weights.sum():.15g}, not 1")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "points", points)

    @classmethod
    def dirac(cls, z, label: str = "dirac") -> "ClassicalMeasure":
        return cls(np.ones(1), np.atleast_2d(z), label)

    @property
    def atoms(self) -> int:
        return len(self.weights)

    @property
    def mean_point(self) -> np.ndarray:
        return self.weights @ self.points

    def field_energy(self, modes: ModeSet) -> float:
        """c(mu) = sum_i alpha_i sum_n omega_n |z_in|^2."""
        return float(self.weights @ (np.abs(self.points) ** 2 @ modes.omega))

    def potential_bound(self, modes: ModeSet) -> float:
        """2 ||lambda|| sum_i alpha_i ||z_i||, a sup-norm bound on V_mu."""
        return 2 * modes.coupling_norm() * float(self.weights @ np.linalg.norm(self.points, axis=1))


@dataclass(frozen=True, eq=False)
class EffectivePotential:
    grid: SpatialGrid
    samples: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if np.iscomplexobj(samples):
            imag = float(np.max(np.abs(samples.imag), initial=0.0))
            if imag > REALNESS_TOL:
                raise PreconditionError(f"potential has imaginary part {imag:.3e}")
            samples = samples.real
        samples = np.asarray(samples, dtype=float).reshape(-1)
        if samples.size != self.grid.size:
            raise ArgumentError(f"{samples.size} samples for a grid of {self.grid.size} nodes")
        if not np.all(np.isfinite(samples)):
            raise PreconditionError("potential samples must be finite")
        object.__setattr__(self, "samples", samples)

    def sup_distance(self, other: "EffectivePotential", mask=None) -> float:
        diff = np.abs(self.samples - other.samples)
        if mask is not None:
            diff = diff[mask]
        return float(np.max(diff, initial=0.0))

    def operator(self, n_particles: int = 1) -> GridOperator:
        return potential_operator(self.grid, self.samples, n_particles)


def _potential_from_means(grid, modes, mean_a, mean_adag, origin=None) -> np.ndarray:
    waves = modes.plane_waves(grid.nodes, origin)
    # <A(x)> = sum_n lambda_n e^{-ikx} <a_n^dag> + conj(lambda_n) e^{ikx} <a_n>
    return np.conj(waves) @ (modes.coupling * mean_adag) + waves @ (np.conj(modes.coupling) * mean_a)


def partial_trace_potential(
    state: FockState | ProductState, grid: SpatialGrid, modes: ModeSet, origin=None
) -> tuple[EffectivePotential, float]:
    """V(x) = <Psi|A(x)|Psi> on every grid node and c_eps = <Psi|dGamma(omega)|Psi>."""
    size = state.modes.size if isinstance(state, ProductState) else state.space.modes.size
    if size != modes.size:
        raise ArgumentError(f"state has {size} modes, model has {modes.size}")
    if not state.is_normalized():
        raise PreconditionError("partial trace needs a normalized field state")
    mean_a = state.mean_annihilation()
    mean_adag = state.mean_creation()
    samples = _potential_from_means(grid, modes, mean_a, mean_adag, origin)
    c_eps = max(state.mean_energy(modes.omega), 0.0)
    eps = state.eps if isinstance(state, ProductState) else state.space.eps
    potential = EffectivePotential(grid, samples, Provenance("partial_trace", "state", eps))
    return potential, c_eps


def effective_hamiltonian(spec: HamiltonianSpec, state: FockState | ProductState) -> GridOperator:
    """H_eps = H0 + sum_j V_{eps,Psi}(x_j), the partial trace of H minus c_eps."""
    potential, _ = partial_trace_potential(state, spec.grid, spec.field.modes, spec.phase_origin)
    h0 = assemble_h0(spec.grid, spec.particles)
    return h0 + potential.operator(spec.n_particles)


def classical_potential(
    mu: ClassicalMeasure, grid: SpatialGrid, modes: ModeSet, origin=None
) -> EffectivePotential:
    """V_mu(x) = 2 Re sum_i alpha_i sum_n conj(lambda_n) z_in e^{i k_n x}."""
    if mu.points.shape[1] != modes.size:
        raise ArgumentError(f"measure atoms have {mu.points.shape[1]} modes, model has {modes.size}")
    waves = modes.plane_waves(grid.nodes, origin)
    samples = 2 * np.real(waves @ (np.conj(modes.coupling) * mu.mean_point))
    return EffectivePotential(grid, samples, Provenance("classical", mu.label))


def almost_periodic_potential(
    b, grid: SpatialGrid, modes: ModeSet
) -> tuple[EffectivePotential, np.ndarray]:
    """V_b = sum_n Re(b_n) cos(k_n x) + Im(b_n) sin(k_n x) and its amplitude f = conj(b)/(2 conj(lambda))."""
    b = np.asarray(b, dtype=complex).reshape(-1)
    if b.size != modes.size:
        raise ArgumentError(f"{b.size} coefficients for {modes.size} modes")
    dead = (modes.coupling == 0) & (b != 0)
    if np.any(dead):
        raise PreconditionError(
            f"unreachable potential: modes {np.flatnonzero(dead).tolist()} do not couple"
        )
    phase = grid.nodes @ modes.k.T
    samples = np.cos(phase) @ b.real + np.sin(phase) @ b.imag
    f = np.zeros(modes.size, dtype=complex)
    live = modes.coupling != 0
    f[live] = np.conj(b[live]) / (2 * np.conj(modes.coupling[live]))
    return EffectivePotential(grid, samples, Provenance("target", "almost_periodic")), f


def mixture_state(
    space: FockSpace, mu: ClassicalMeasure, tol: float = DEFAULT_TRUNCATION_TOL
) -> FockState:
    """Normalized sum_i sqrt(alpha_i) Xi(z_i)."""
    states = [coherent_state(space, z, tol) for z in mu.points]
    return superpose(states, np.sqrt(mu.weights))


@dataclass(frozen=True)
class Mollifier:
    """phi(x) = c exp(-1/(1 - |x|^2)) on |x| < 1, scaled to phi_eps = eps^-d phi(x/eps).

    The discrete kernel is renormalized so its weights sum to one.
    """

    min_points: int = 8

    @staticmethod
    def profile(r: np.ndarray) -> np.ndarray:
        out = np.zeros_like(r, dtype=float)
        inside = r < 1
        out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
        return out

    def check_resolution(self, grid: SpatialGrid, eps: float):
        across = 2 * eps / grid.spacing
        if across < self.min_points:
            needed = int(np.ceil(self.min_points * grid.half_width / eps))
            raise PreconditionError(
                f"mollifier of width {2 * eps:g} spans {across:.1f} grid points, need "
                f"{self.min_points}; use spacing <= {2 * eps / self.min_points:.4g} "
                f"(about {needed} points per axis)"
            )

    def kernel(self, grid: SpatialGrid, eps: float) -> np.ndarray:
        self.check_resolution(grid, eps)
        reach = int(np.floor(eps / grid.spacing))
        offsets = grid.spacing * np.arange(-reach, reach + 1)
        mesh = np.meshgrid(*([offsets] * grid.dim), indexing="ij")
        radius = np.sqrt(sum(m**2 for m in mesh)) / eps
        weights = self.profile(radius)
        return weights / weights.sum()

    def second_moment(self, grid: SpatialGrid, eps: float) -> float:
        """m2 with sum_j kappa_j (x_j)^2 = eps^2 m2 along one axis."""
        kernel = self.kernel(grid, eps)
        reach = (kernel.shape[0] - 1) // 2
        offsets = grid.spacing * np.arange(-reach, reach + 1)
        marginal = kernel.reshape(kernel.shape[0], -1).sum(axis=1)
        return float(marginal @ offsets**2) / eps**2


def mollify(
    samples: np.ndarray,
    grid: SpatialGrid,
    eps: float,
    mollifier: Mollifier = Mollifier(),
    boundary: str = "nearest",
) -> np.ndarray:
    """phi_eps * W by discrete convolution; `boundary` is a scipy.ndimage mode."""
    kernel = mollifier.kernel(grid, eps)
    field = np.asarray(samples, dtype=float).reshape(grid.shape)
    return ndimage.convolve(field, kernel, mode=boundary).ravel()


@dataclass(frozen=True, eq=False)
class FourierWindow:
    """Field modes on the discrete Fourier wave vectors of a particle grid."""

    grid: SpatialGrid
    coupling_strength: float = 1.0
    mass: float = 1.0
    form_factor: str = "inverse_sqrt_omega"
    k_max: float | None = None

    @cached_property
    def all_wavevectors(self) -> np.ndarray:
        axis = 2 * np.pi * np.fft.fftfreq(self.grid.points, d=self.grid.spacing)
        mesh = np.meshgrid(*([axis] * self.grid.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def mask(self) -> np.ndarray:
        if self.k_max is None:
            return np.ones(len(self.all_wavevectors), dtype=bool)
        return np.all(np.abs(self.all_wavevectors) <= self.k_max + 1e-12, axis=1)

    @cached_property
    def modes(self) -> ModeSet:
        cell_volume = (2 * np.pi / (self.grid.points * self.grid.spacing)) ** self.grid.dim
        return ModeSet.nelson_from_wavevectors(
            self.all_wavevectors[self.mask],
            cell_volume,
            self.coupling_strength,
            self.mass,
            self.form_factor,
        )

    def coefficients(self, samples: np.ndarray) -> np.ndarray:
        """c_n with sum_n c_n e^{i k_n x} = samples at every node (all wave vectors)."""
        field = np.asarray(samples, dtype=float).reshape(self.grid.shape)
        raw = np.fft.fftn(field).ravel() / self.grid.size
        origin = np.full(self.grid.dim, self.grid.axis[0])
        return raw * np.exp(-1j * self.all_wavevectors @ origin)


@dataclass(frozen=True, eq=False)
class TrapAmplitude:
    eps: float
    amplitudes: np.ndarray
    target: np.ndarray  # phi_eps * W on the grid
    norm_sq: float
    field_energy: float
    outside_fraction: float


def trap_coherent_amplitude(
    W_samples: np.ndarray,
    eps: float,
    window: FourierWindow,
    mollifier: Mollifier = Mollifier(),
    max_outside: float = 0.01,
) -> TrapAmplitude:
    """f_{W,eps} = (phi_eps * W)^ / (2 (2 pi)^{d/2} conj(lambda)) on the window's modes.

    The mollifier wraps around the window, so the smoothed function is the one
    whose Fourier series the modes carry.
    """
    modes = window.modes
    if not modes.has_polynomial_inverse:
        raise PreconditionError(
            f"form factor {modes.form_factor!r} has no polynomially bounded inverse"
        )
    target = mollify(W_samples, window.grid, eps, mollifier, boundary="wrap")
    coeffs = window.coefficients(target)
    power = np.abs(coeffs) ** 2
    total = float(power.sum())
    outside = float(power[~window.mask].sum()) / total if total > 0 else 0.0
    if outside > max_outside:
        raise PreconditionError(
            f"{100 * outside:.2f}% of the trap's spectrum lies outside the k-window "
            f"(limit {100 * max_outside:.0f}%); widen k_max"
        )
    amplitudes = coeffs[window.mask] / (2 * np.conj(modes.coupling))
    norm_sq = float(np.sum(np.abs(amplitudes) ** 2))
    energy = float(np.abs(amplitudes) ** 2 @ modes.omega)
    log.debug("trap amplitude eps=%g: ||f||^2=%.6g c_eps=%.6g", eps, norm_sq, energy)
    return TrapAmplitude(eps, amplitudes, target, norm_sq, energy, outside)


@dataclass(frozen=True, eq=False)
class PolaronSplit:
    """W_z = W^<_z + W^>_z split at |k| = rho, with W_z(x) = (2 pi)^{-d/2} sum_n lambda_n z_n e^{ikx}.

    The polaron potential is V_z = 2 (2 pi)^{d/2} Re W_z. The high part is
    represented as W^> = -i div B with B(x) = (2 pi)^{-d/2} sum_{|k|>rho} lambda z k/|k|^2 e^{ikx}.
    """

    rho: float
    dim: int
    low: np.ndarray
    high: np.ndarray
    commutator_field: np.ndarray
    c_less: float
    c_greater: float
    c_greater_prime: float

    def low_sup_bound(self, z_norm_sq: float) -> float:
        return 0.5 * self.c_less + 0.5 * (2 * np.pi) ** (-self.dim) * z_norm_sq

    def potential(self) -> np.ndarray:
        return 2 * (2 * np.pi) ** (self.dim / 2) * np.real(self.low + self.high)

    def form_bound(self, alpha: float, kinetic: float, z_norm_sq: float, psi_norm_sq: float) -> float:
        """alpha <psi|-Laplacian|psi> + (1/alpha) ||z||^2 ||psi||^2 C'_>(rho)."""
        return alpha * kinetic + z_norm_sq * psi_norm_sq * self.c_greater_prime / alpha

    def energy_floor(self, z_norm_sq: float, n_particles: int = 1, alpha1: float = 1.0) -> float:
        """-(8 N^2 C'_> + N alpha1) ||z||^2 - (N / alpha1) C_<."""
        N = n_particles
        return -(8 * N**2 * self.c_greater_prime + N * alpha1) * z_norm_sq - N * self.c_less / alpha1


def polaron_split(z, rho: float, grid: SpatialGrid, modes: ModeSet) -> PolaronSplit:
    if modes.family is not Family.POLARON:
        raise PreconditionError(f"polaron split needs the polaron family, got {modes.family}")
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.size != modes.size:
        raise ArgumentError(f"{z.size} amplitudes for {modes.size} modes")
    norms = np.linalg.norm(modes.k, axis=1)
    if not rho > norms.min():
        raise ArgumentError(f"rho={rho:g} must exceed the smallest |k| = {norms.min():g}")
    low_set = norms <= rho
    weights = (2 * np.pi) ** (-modes.dim / 2) * modes.coupling * z
    waves = modes.plane_waves(grid.nodes)
    low = waves[:, low_set] @ weights[low_set]
    high = waves[:, ~low_set] @ weights[~low_set]
    direction = modes.k[~low_set] / norms[~low_set, None] ** 2
    commutator_field = waves[:, ~low_set] @ (weights[~low_set, None] * direction)
    lam2 = np.abs(modes.coupling) ** 2
    return PolaronSplit(
        rho=rho,
        dim=modes.dim,
        low=low,
        high=high,
        commutator_field=commutator_field,
        c_less=float(lam2[low_set].sum()),
        c_greater=float(lam2[~low_set].sum()),
        c_greater_prime=float(np.sum(lam2[~low_set] / norms[~low_set] ** 2)),
    )
