"""Sparse Hermitian operators over a spatial grid, a Fock basis, or their product."""

import functools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from shared.errors import ArgumentError, DataError

SPACES = ("grid", "fock", "product")


@dataclass(frozen=True, eq=False)
class GridOperator:
    """A square sparse matrix tagged with the space it acts on."""

    matrix: sp.csr_matrix
    space: str = "product"

    def __post_init__(self):
        if self.space not in SPACES:
            raise ArgumentError(f"unknown operator space {self.space!r}")
        matrix = sp.csr_matrix(self.matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise ArgumentError(f"operator must be square, got shape {matrix.shape}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def adjoint(self) -> "GridOperator":
        return GridOperator(self.matrix.conj().T.tocsr(), self.space)

    def hermiticity_error(self) -> float:
        """max |H_ij - conj(H_ji)|."""
        diff = self.matrix - self.matrix.conj().T
        if diff.nnz == 0:
            return 0.0
        return float(abs(diff).max())

    def apply(self, vector: np.ndarray) -> np.ndarray:
        return self.matrix @ vector

    def expectation(self, vector: np.ndarray) -> complex:
        return complex(np.vdot(vector, self.matrix @ vector))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __add__(self, other: "GridOperator") -> "GridOperator":
        if self.dim != other.dim:
            raise ArgumentError(f"dimension mismatch: {self.dim} vs {other.dim}")
        space = self.space if self.space == other.space else "product"
        return GridOperator(self.matrix + other.matrix, space)

    def shifted(self, zeta: float) -> "GridOperator":
        """op + zeta * I."""
        return GridOperator(self.matrix + zeta * sp.identity(self.dim, format="csr"), self.space)

    def dump(self, path: Path) -> Path:
        """Write "dim nnz" then one "row col re im" line per stored entry."""
        path = Path(path)
        coo = self.matrix.copy()
        coo.eliminate_zeros()
        coo = coo.tocoo()
        order = np.lexsort((coo.col, coo.row))
        values = np.asarray(coo.data, dtype=complex)[order]
        lines = [f"{self.dim} {len(order)}"]
        for r, c, v in zip(coo.row[order], coo.col[order], values):
            lines.append(f"{r} {c} {v.real:.17g} {v.imag:.17g}")
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def load(cls, path: Path, space: str = "product") -> "GridOperator":
        lines = Path(path).read_text().split("\n")
        try:
            dim, nnz = (int(t) for t in lines[0].split())
            rows, cols, data = [], [], []
            for line in lines[1 : nnz + 1]:
                r, c, re, im = line.split()
                rows.append(int(r))
                cols.append(int(c))
                data.append(complex(float(re), float(im)))
        except ValueError as e:
            raise DataError(f"malformed operator dump {path}: {e}") from e
        matrix = sp.csr_matrix((data, (rows, cols)), shape=(dim, dim), dtype=complex)
        return cls(matrix, space)


def kron_chain(ops: list) -> sp.csr_matrix:
    """Kronecker product of the list, leftmost factor slowest."""
    return functools.reduce(lambda a, b: sp.kron(a, b, format="csr"), ops)


def diagonal(values: np.ndarray, space: str = "grid") -> GridOperator:
    return GridOperator(sp.diags(np.asarray(values), format="csr"), space)


def embed_grid(op: GridOperator, fock_dim: int) -> GridOperator:
    """op (x) I_fock."""
    return GridOperator(sp.kron(op.matrix, sp.identity(fock_dim), format="csr"), "product")


def embed_fock(op: GridOperator, grid_dim: int) -> GridOperator:
    """I_grid (x) op."""
    return GridOperator(sp.kron(sp.identity(grid_dim), op.matrix, format="csr"), "product")
