import numpy as np
import pytest
from scipy.sparse.linalg import ArpackNoConvergence

from shared.errors import ConvergenceError, PreconditionError
from shared.numerics import spectral
from shared.numerics.fock import CutoffPolicy, FockSpace, ModeSet
from shared.numerics.model import HamiltonianSpec, assemble_h0
from shared.numerics.spectral import (
    ClassicalProblem,
    GseOptions,
    admissible_shift,
    alternating_minimization,
    brute_force_single_atom,
    canonical_phase,
    classical_ground_energy,
    default_probes,
    dense_ground_energy,
    ground_energy,
    minimize_gse,
    optimal_amplitude,
    refine_atoms,
    resolvent_apply,
    resolvent_distance,
    richardson,
)


@pytest.fixture
def problem(box_grid, box_particles, two_modes):
    return ClassicalProblem(assemble_h0(box_grid, box_particles), box_grid, two_modes)


def test_lanczos_matches_dense(problem):
    op = problem.hamiltonian([0.2, -0.1j])
    lanczos = ground_energy(op, seed=3)
    assert lanczos.value == pytest.approx(dense_ground_energy(op).value, abs=1e-9)
    assert lanczos.residual < 1e-6


def test_canonical_phase_makes_the_leading_entry_real_positive():
    v = np.array([1e-12, 0.1j, -0.9j, 0.2])
    fixed = canonical_phase(v)
    assert abs(fixed[0]) < 1e-11
    assert fixed[1].real == pytest.approx(0.1) and abs(fixed[1].imag) < 1e-15
    np.testing.assert_allclose(np.abs(fixed), np.abs(v))


def test_resolvent_apply_solves_the_shifted_system(problem):
    op = problem.h0
    v = default_probes(op.dim, seed=1, count=1)[0]
    w = resolvent_apply(op, 1.0, v, rtol=1e-12)
    assert np.linalg.norm(op.shifted(1.0).apply(w) - v) < 1e-8
    with pytest.raises(PreconditionError):
        resolvent_apply(op, 1.0, v, floor=-2.0)


def test_resolvent_distance_is_a_metric(problem):
    a, b, c = problem.h0, problem.hamiltonian([0.3, 0.0]), problem.hamiltonian([0.0, 0.4j])
    zeta = admissible_shift([-5.0])
    probes = default_probes(a.dim, seed=2, count=4)
    assert resolvent_distance(a, a, zeta, probes) == 0.0
    d_ab = resolvent_distance(a, b, zeta, probes)
    assert resolvent_distance(a, c, zeta, probes) <= d_ab + resolvent_distance(b, c, zeta, probes) + 1e-12
    assert d_ab == pytest.approx(resolvent_distance(b, a, zeta, probes), rel=1e-6)


def test_admissible_shift():
    assert admissible_shift([-3.0, 2.0]) == 4.0
    assert admissible_shift([0.5]) == 1.0


def test_massless_drive_is_unbounded(box_grid, box_particles):
    modes = ModeSet.discrete([1.0], [0.3], [0.0])
    problem = ClassicalProblem(assemble_h0(box_grid, box_particles), box_grid, modes)
    psi = ground_energy(problem.h0).vector
    with pytest.raises(PreconditionError, match="unbounded"):
        optimal_amplitude(problem, psi)


def test_alternating_minimization_descends(problem):
    result = alternating_minimization(problem, GseOptions(tol=1e-12))
    assert result.converged
    assert np.all(np.diff(result.trace) <= 1e-9)
    h0_ground = ground_energy(problem.h0).value
    assert result.energy <= h0_ground
    assert result.energy >= problem.lower_floor(h0_ground)
    # the box is symmetric, so the minimizer is real
    assert np.max(np.abs(result.z.imag)) < 1e-6


def test_iteration_limit_raises_with_the_trace(problem):
    with pytest.raises(ConvergenceError) as info:
        alternating_minimization(problem, GseOptions(tol=0.0, max_iterations=2))
    assert len(info.value.trace) == 4
    assert info.value.exit_code == 4


def test_stalled_lanczos_keeps_its_estimate_and_residual(problem, monkeypatch):
    op = problem.hamiltonian([0.2, -0.1j])
    exact = dense_ground_energy(op)
    rough = exact.vector + 1e-5 * np.random.default_rng(5).standard_normal(op.dim)

    def stalled(*args, **kwargs):
        raise ArpackNoConvergence("no convergence", np.array([exact.value]), rough[:, None])

    monkeypatch.setattr(spectral, "eigsh", stalled)
    with pytest.raises(ConvergenceError) as info:
        ground_energy(op)
    assert info.value.estimate == pytest.approx(exact.value)
    assert 0 < info.value.residual < 0.1
    assert info.value.exit_code == 4


def test_brute_force_oracle(problem):
    best = classical_ground_energy(problem, GseOptions(restarts=1))
    brute, z = brute_force_single_atom(problem)
    assert best.energy <= brute + 1e-8
    assert brute - best.energy < 1e-3
    assert z.shape == (2,)


def test_refined_measures_do_not_undercut_the_minimizer(problem):
    best = classical_ground_energy(problem, GseOptions(restarts=0))
    refined, mu = refine_atoms(problem, best.z, atoms=2, seed=0, maxiter=400)
    assert mu.atoms == 2
    assert refined >= best.energy - 1e-6


def test_richardson():
    assert richardson(0.2, 0.1) == pytest.approx(0.0)
    assert richardson(0.3, 0.2) == pytest.approx(0.1)


def test_minimize_gse_on_the_box(box_grid, box_particles, two_modes):
    spec = HamiltonianSpec(box_grid, box_particles, FockSpace.uniform(two_modes, 1.0, 0))
    result = minimize_gse(
        spec, [0.25, 0.5], CutoffPolicy(truncation_tol=1e-10), GseOptions(restarts=1), workers=2
    )
    assert [p.eps for p in result.points] == [0.5, 0.25]
    for p in result.points:
        assert result.floor - 1e-8 <= p.quantum_energy <= p.classical_infimum + 1e-6
    assert len(result.extrapolated) == 1
    assert result.h0_gap > 0
    assert result.minimizer.atoms == 1


def test_minimize_gse_rejects_a_coupled_zero_mode(box_grid, box_particles):
    modes = ModeSet.nelson(1, 1.0, 5, mass=0.0, form_factor="constant")
    spec = HamiltonianSpec(box_grid, box_particles, FockSpace.uniform(modes, 1.0, 0))
    with pytest.raises(PreconditionError, match="unbounded"):
        minimize_gse(spec, [0.5])
