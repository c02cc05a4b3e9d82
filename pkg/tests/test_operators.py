import numpy as np
import pytest
import scipy.sparse as sp

from shared.errors import ArgumentError, DataError
from shared.numerics.operators import GridOperator, diagonal, embed_fock, embed_grid, kron_chain


def test_dump_matches_golden_text(tmp_path):
    op = GridOperator(sp.csr_matrix(np.array([[2.0, 0.5], [0.5, 3.0]])), "grid")
    path = op.dump(tmp_path / "op.txt")
    assert path.read_text() == "2 4\n0 0 2 0\n0 1 0.5 0\n1 0 0.5 0\n1 1 3 0\n"


def test_dump_drops_explicit_zeros_and_sorts(tmp_path):
    matrix = sp.csr_matrix(([0.0, 1.5, 2.5], ([0, 1, 0], [1, 0, 0])), shape=(2, 2))
    text = GridOperator(matrix).dump(tmp_path / "op.txt").read_text().splitlines()
    assert text == ["2 2", "0 0 2.5 0", "1 0 1.5 0"]


def test_load_restores_complex_entries(tmp_path):
    matrix = sp.csr_matrix(np.array([[1.0, 0.25 + 0.5j], [0.25 - 0.5j, -1.0]]))
    loaded = GridOperator.load(GridOperator(matrix).dump(tmp_path / "op.txt"))
    np.testing.assert_array_equal(loaded.dense(), matrix.toarray())


def test_load_rejects_malformed_dump(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 1\n0 zero 1 0\n")
    with pytest.raises(DataError):
        GridOperator.load(path)


def test_hermiticity_error():
    assert GridOperator(sp.csr_matrix(np.array([[1.0, 1j], [-1j, 0.0]]))).hermiticity_error() == 0.0
    skew = GridOperator(sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]])))
    assert skew.hermiticity_error() == pytest.approx(1.0)


def test_rejects_non_square_and_mismatched_sums():
    with pytest.raises(ArgumentError):
        GridOperator(sp.csr_matrix(np.zeros((2, 3))))
    with pytest.raises(ArgumentError):
        diagonal(np.ones(2)) + diagonal(np.ones(3))


def test_kron_chain_leftmost_factor_is_slowest():
    a = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    eye = sp.identity(3, format="csr")
    np.testing.assert_array_equal(kron_chain([a, eye]).toarray(), np.kron(a.toarray(), np.eye(3)))


def test_embeddings_commute():
    grid_op = diagonal(np.array([1.0, 2.0]))
    fock_op = diagonal(np.array([0.0, 1.0, 2.0]), "fock")
    left = embed_grid(grid_op, 3).matrix @ embed_fock(fock_op, 2).matrix
    right = embed_fock(fock_op, 2).matrix @ embed_grid(grid_op, 3).matrix
    assert abs(left - right).max() == 0
    assert embed_grid(grid_op, 3).space == "product"


def test_shifted_adds_identity():
    op = diagonal(np.array([-1.0, 2.0])).shifted(1.5)
    np.testing.assert_allclose(op.matrix.diagonal(), [0.5, 3.5])
