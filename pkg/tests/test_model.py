import numpy as np
import pytest
from scipy.linalg import eigvalsh

from shared.errors import ConfigError, DataError, ResourceError
from shared.numerics.fock import FockSpace, ModeSet
from shared.numerics.model import (
    HamiltonianSpec,
    SpatialGrid,
    assemble_full,
    assemble_h0,
    assemble_interaction,
    named_potential,
    potential_from_file,
)


def test_grid_spacing():
    assert SpatialGrid(1, 1.0, 9).spacing == pytest.approx(0.2)
    assert SpatialGrid(1, 1.0, 10, "periodic").spacing == pytest.approx(0.2)
    dirichlet = SpatialGrid(1, 1.0, 9)
    assert dirichlet.axis[0] > -1.0 and dirichlet.axis[-1] < 1.0


def test_box_ground_energy():
    grid = SpatialGrid(1, np.pi / 2, 64)
    h0 = assemble_h0(grid, named_potential(grid, 1, "zero"))
    low = eigvalsh(h0.dense(), subset_by_index=[0, 1])
    assert low[0] == pytest.approx(1.0, abs=1e-3)
    assert low[1] - low[0] == pytest.approx(3.0, abs=1e-2)


def test_harmonic_ground_energy():
    grid = SpatialGrid(1, 10.0, 400)
    h0 = assemble_h0(grid, named_potential(grid, 1, "harmonic", strength=1.0))
    low = eigvalsh(h0.dense(), subset_by_index=[0, 1])
    assert low[0] == pytest.approx(1.0, abs=1e-2)
    assert low[1] == pytest.approx(3.0, abs=1e-2)


def test_two_particle_potential_is_lifted():
    grid = SpatialGrid(1, 1.0, 8)
    model = named_potential(grid, 2, "harmonic", strength=2.0)
    assert model.potential.size == 64
    x = grid.axis
    np.testing.assert_allclose(model.potential.reshape(8, 8), 2 * (x[:, None] ** 2 + x[None, :] ** 2))
    with pytest.raises(ConfigError):
        named_potential(grid, 1, "soft_coulomb")


def test_potential_file_size_is_checked(tmp_path):
    grid = SpatialGrid(1, 1.0, 8)
    path = tmp_path / "u.txt"
    np.savetxt(path, np.zeros(7))
    with pytest.raises(DataError):
        potential_from_file(grid, 1, path)


def test_full_hamiltonian_is_hermitian(box_grid, box_particles, two_modes):
    spec = HamiltonianSpec(box_grid, box_particles, FockSpace.uniform(two_modes, 0.5, 3))
    h = assemble_full(spec)
    assert h.dim == 16 * 16
    assert h.hermiticity_error() < 1e-14


def test_zero_coupling_decouples(box_grid, box_particles):
    silent = ModeSet.discrete([1.0, 2.0], [0.0, 0.0], [1.0, 1.5])
    spec = HamiltonianSpec(box_grid, box_particles, FockSpace.uniform(silent, 0.5, 2))
    full = eigvalsh(assemble_full(spec).dense(), subset_by_index=[0, 0])[0]
    bare = eigvalsh(assemble_h0(box_grid, box_particles).dense(), subset_by_index=[0, 0])[0]
    assert full == pytest.approx(bare, abs=1e-10)


def test_coupling_floor(box_grid, box_particles, two_modes):
    spec = HamiltonianSpec(box_grid, box_particles, FockSpace.uniform(two_modes, 0.25, 4))
    ground = eigvalsh(assemble_full(spec).dense(), subset_by_index=[0, 0])[0]
    bare = eigvalsh(assemble_h0(box_grid, box_particles).dense(), subset_by_index=[0, 0])[0]
    assert bare - two_modes.coupling_floor() <= ground <= bare


def test_coarse_grid_rejects_phase_aliasing(two_modes):
    grid = SpatialGrid(1, 5.0, 8)
    spec = HamiltonianSpec(grid, named_potential(grid, 1, "zero"), FockSpace.uniform(two_modes, 1.0, 1))
    with pytest.raises(ConfigError, match="pi/4"):
        assemble_interaction(spec, 0)


def test_dimension_budget(box_grid, box_particles, two_modes):
    spec = HamiltonianSpec(
        box_grid, box_particles, FockSpace.uniform(two_modes, 1.0, 5), max_dimension=100
    )
    with pytest.raises(ResourceError) as info:
        assemble_full(spec)
    assert info.value.dimension == 16 * 36


def test_dimension_mismatch_between_modes_and_grid(box_grid, box_particles):
    modes = ModeSet.discrete([[1.0, 0.0]], [0.3], [1.0], dim=2)
    with pytest.raises(ConfigError):
        HamiltonianSpec(box_grid, box_particles, FockSpace.uniform(modes, 1.0, 1))
