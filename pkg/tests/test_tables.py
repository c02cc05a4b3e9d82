import numpy as np
import pandas as pd
import pytest

from shared.errors import DataError
from shared.numerics.effective import ClassicalMeasure, EffectivePotential, Provenance
from shared.numerics.model import SpatialGrid
from shared.tools.tables import (
    format_measure,
    read_measure,
    read_potential,
    write_measure,
    write_potential,
    write_table,
)


def test_measure_file_format(tmp_path):
    mu = ClassicalMeasure(np.array([0.25, 0.75]), np.array([[1.0, 0.5j], [-0.25, 2.0 + 1.0j]]))
    assert format_measure(mu).splitlines()[0] == "0.25; 1:0,0:0.5"
    back = read_measure(write_measure(tmp_path / "mu.txt", mu))
    np.testing.assert_array_equal(back.weights, mu.weights)
    np.testing.assert_array_equal(back.points, mu.points)


def test_malformed_measure_file(tmp_path):
    path = tmp_path / "mu.txt"
    path.write_text("1.0; 1:0,2\n")
    with pytest.raises(DataError, match=":1:"):
        read_measure(path)
    path.write_text("\n")
    with pytest.raises(DataError, match="no atoms"):
        read_measure(path)


def test_potential_table_columns(tmp_path):
    grid = SpatialGrid(2, 1.0, 8)
    potential = EffectivePotential(grid, np.arange(grid.size, dtype=float), Provenance("test", "ramp"))
    frame = read_potential(write_potential(tmp_path / "v.csv", potential))
    assert list(frame.columns) == ["x", "y", "V"]
    assert len(frame) == 64
    with pytest.raises(DataError):
        read_potential(tmp_path / "missing.csv")


def test_tables_are_byte_identical_across_writes(tmp_path):
    rows = [{"eps": 0.5, "gap": 1 / 3}, {"eps": 0.25, "gap": 1 / 7}]
    first = write_table(tmp_path / "a.csv", rows, ["eps", "gap"]).read_bytes()
    second = write_table(tmp_path / "b.csv", rows, ["eps", "gap"]).read_bytes()
    assert first == second
    assert pd.read_csv(tmp_path / "a.csv")["gap"].iloc[0] == pytest.approx(1 / 3, rel=1e-11)
