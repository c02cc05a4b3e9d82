import numpy as np
import pytest

from shared.errors import ArgumentError, PreconditionError
from shared.numerics.effective import (
    ClassicalMeasure,
    EffectivePotential,
    FourierWindow,
    Mollifier,
    Provenance,
    almost_periodic_potential,
    classical_potential,
    mixture_state,
    mollify,
    partial_trace_potential,
    polaron_split,
    trap_coherent_amplitude,
)
from shared.numerics.fock import (
    FockSpace,
    FockState,
    ModeSet,
    coherent_product_state,
    coherent_state,
    required_cutoff,
)
from shared.numerics.model import SpatialGrid, single_particle_potential


@pytest.fixture
def grid():
    return SpatialGrid(1, 5.0, 64)


def _space(modes, f, eps, tol=1e-12):
    return FockSpace(modes, eps, [required_cutoff(fn, eps, tol) + 2 for fn in f])


def test_coherent_partial_trace_is_the_classical_potential(grid, two_modes):
    f = np.array([0.4, 0.1 + 0.2j])
    for eps in (1.0, 0.125):
        xi = coherent_state(_space(two_modes, f, eps), f, 1e-12)
        potential, c_eps = partial_trace_potential(xi, grid, two_modes)
        limit = classical_potential(ClassicalMeasure.dirac(f), grid, two_modes)
        assert potential.sup_distance(limit) < 1e-8
        assert c_eps == pytest.approx(float(np.abs(f) ** 2 @ two_modes.omega), abs=1e-8)


def test_vacuum_gives_nothing(grid, two_modes):
    potential, c_eps = partial_trace_potential(
        FockState.vacuum(FockSpace.uniform(two_modes, 0.5, 3)), grid, two_modes
    )
    assert np.max(np.abs(potential.samples)) == 0.0
    assert c_eps == 0.0


def test_partial_trace_needs_a_normalized_state(grid, two_modes):
    space = FockSpace.uniform(two_modes, 0.5, 2)
    coeffs = np.zeros(space.dim)
    coeffs[0] = 2.0
    with pytest.raises(PreconditionError):
        partial_trace_potential(FockState(space, coeffs), grid, two_modes)


def test_almost_periodic_target_is_reached(grid, two_modes):
    b = np.array([0.2 + 0.1j, 0.1])
    target, f = almost_periodic_potential(b, grid, two_modes)
    x = grid.axis
    np.testing.assert_allclose(target.samples, 0.2 * np.cos(x) + 0.1 * np.sin(x) + 0.1 * np.cos(2 * x))
    reached = classical_potential(ClassicalMeasure.dirac(f), grid, two_modes)
    assert reached.sup_distance(target) < 1e-12


def test_almost_periodic_needs_coupled_modes(grid):
    modes = ModeSet.discrete([1.0, 2.0], [0.3, 0.0], [1.0, 1.5])
    with pytest.raises(PreconditionError, match="unreachable"):
        almost_periodic_potential([0.1, 0.1], grid, modes)


def test_classical_potential_bound(grid, two_modes, rng):
    for _ in range(10):
        points = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        mu = ClassicalMeasure(np.array([0.2, 0.3, 0.5]), points)
        sup = np.max(np.abs(classical_potential(mu, grid, two_modes).samples))
        assert sup <= mu.potential_bound(two_modes) + 1e-12


def test_measure_validation():
    with pytest.raises(ArgumentError):
        ClassicalMeasure(np.array([0.5, 0.6]), np.zeros((2, 1)))
    with pytest.raises(ArgumentError):
        ClassicalMeasure(np.array([1.0]), np.zeros((2, 1)))


def test_potential_rejects_imaginary_samples(grid):
    with pytest.raises(PreconditionError):
        EffectivePotential(grid, np.full(grid.size, 1j), Provenance("test", "imaginary"))
    large = np.full(grid.size, 50.0 + 1e-11j)
    with pytest.raises(PreconditionError, match="imaginary"):
        EffectivePotential(grid, large, Provenance("test", "imaginary"))
    kept = EffectivePotential(grid, np.full(grid.size, 50.0 + 1e-14j), Provenance("test", "noise"))
    assert kept.samples.dtype == float


def test_mixture_gap_shrinks(grid, two_modes):
    s = np.sqrt(np.pi / 3)
    mu = ClassicalMeasure(np.array([0.5, 0.5]), np.array([[s, s], [1j * s, 1j * s]]))
    limit = classical_potential(mu, grid, two_modes)
    gaps = []
    for eps in (0.5, 0.25):
        space = _space(two_modes, [s, s], eps, 1e-14)
        state = mixture_state(space, mu, 1e-14)
        potential, _ = partial_trace_potential(state, grid, two_modes)
        gaps.append(potential.sup_distance(limit))
    assert 0 < gaps[1] < 0.2 * gaps[0]


def test_mollifier_shifts_a_parabola_by_its_second_moment():
    grid = SpatialGrid(1, 5.0, 257)
    eps = 0.5
    W = single_particle_potential(grid, "harmonic")
    smoothed = mollify(W, grid, eps)
    inside = np.abs(grid.axis) < 4
    m2 = Mollifier().second_moment(grid, eps)
    np.testing.assert_allclose((smoothed - W)[inside], eps**2 * m2, atol=1e-10)
    np.testing.assert_allclose(mollify(np.ones(grid.size), grid, eps), 1.0)


def test_mollifier_needs_resolution():
    with pytest.raises(PreconditionError, match="grid points"):
        Mollifier().kernel(SpatialGrid(1, 5.0, 32), 0.1)


def test_trap_amplitude_reproduces_the_smoothed_trap():
    grid = SpatialGrid(1, 5.0, 128)
    window = FourierWindow(grid, coupling_strength=4.0)
    W = single_particle_potential(grid, "harmonic")
    amplitude = trap_coherent_amplitude(W, 0.4, window)
    assert amplitude.outside_fraction == 0.0
    state = coherent_product_state(window.modes, amplitude.amplitudes, 0.4, tol=1e-12)
    potential, c_eps = partial_trace_potential(state, grid, window.modes)
    assert np.max(np.abs(potential.samples - amplitude.target)) < 1e-6
    assert c_eps == pytest.approx(amplitude.field_energy, rel=1e-6)


def test_trap_window_must_cover_the_spectrum():
    grid = SpatialGrid(1, 5.0, 128)
    window = FourierWindow(grid, coupling_strength=4.0, k_max=0.2)
    W = single_particle_potential(grid, "power", exponent=1.0)
    with pytest.raises(PreconditionError, match="k-window"):
        trap_coherent_amplitude(W, 0.4, window)


def test_trap_needs_a_polynomial_inverse():
    grid = SpatialGrid(1, 5.0, 128)
    window = FourierWindow(grid, form_factor="gaussian")
    with pytest.raises(PreconditionError, match="inverse"):
        trap_coherent_amplitude(np.zeros(grid.size), 0.4, window)


def test_polaron_split(rng):
    modes = ModeSet.polaron(2, 1.5, 7)
    grid = SpatialGrid(2, 6.0, 24, "periodic")
    z = rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)
    split = polaron_split(z, 0.8, grid, modes)
    full = (2 * np.pi) ** -1 * modes.plane_waves(grid.nodes) @ (modes.coupling * z)
    np.testing.assert_allclose(split.low + split.high, full, atol=1e-12)
    assert np.max(np.abs(split.low)) <= split.low_sup_bound(float(np.sum(np.abs(z) ** 2)))
    assert split.c_less + split.c_greater == pytest.approx(np.sum(np.abs(modes.coupling) ** 2))
    with pytest.raises(ArgumentError):
        polaron_split(z, 0.4, grid, modes)


def test_polaron_split_beyond_the_largest_mode(rng):
    modes = ModeSet.polaron(2, 1.5, 7)
    grid = SpatialGrid(2, 6.0, 24, "periodic")
    z = rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)
    rho = 1.01 * float(np.linalg.norm(modes.k, axis=1).max())
    split = polaron_split(z, rho, grid, modes)
    full = (2 * np.pi) ** -1 * modes.plane_waves(grid.nodes) @ (modes.coupling * z)
    np.testing.assert_allclose(split.low, full, atol=1e-12)
    assert not np.any(split.high)
    assert split.commutator_field.shape == (grid.size, 2)
    assert not np.any(split.commutator_field)
    assert split.c_greater == 0.0 and split.c_greater_prime == 0.0


def test_high_part_is_the_divergence_of_the_commutator_field(rng):
    modes = ModeSet.polaron(2, 1.5, 7)
    grid = SpatialGrid(2, 2.0, 200, "periodic")
    z = rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)
    split = polaron_split(z, 0.8, grid, modes)
    div = sum(
        np.gradient(split.commutator_field[:, j].reshape(grid.shape), grid.spacing, axis=j)
        for j in range(2)
    )
    inside = (slice(1, -1), slice(1, -1))
    high = split.high.reshape(grid.shape)[inside]
    # central differences scale e^{ikx} by sin(k h) / (k h), off by at most (k h)^2 / 6
    norms = np.linalg.norm(modes.k, axis=1)
    outer = norms > 0.8
    weights = np.abs(modes.coupling * z)[outer] / (2 * np.pi)
    slack = grid.spacing**2 / 6 * float(np.sum(weights * norms[outer] ** 2))
    np.testing.assert_allclose(-1j * div[inside], high, rtol=0, atol=slack + 1e-12)


def test_polaron_split_needs_polaron_modes(grid, two_modes):
    with pytest.raises(PreconditionError):
        polaron_split(np.zeros(2), 1.5, grid, two_modes)
