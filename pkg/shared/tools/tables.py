"""CSV and text outputs: potentials, sweep tables, GSE reports and measure files."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from shared.errors import DataError
from shared.numerics.effective import ClassicalMeasure, EffectivePotential

log = logging.getLogger("qclab.tables")

FLOAT_FORMAT = "%.12g"
AXES = ("x", "y", "z")
GSE_COLUMNS = ["eps", "quantum_energy", "classical_infimum", "gap", "iterations"]


def write_table(path: Path, rows: list[dict], columns: list[str] | None = None) -> Path:
    """One CSV row per dict; column order follows `columns` or the first row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    log.debug("wrote %d rows to %s", len(frame), path)
    return path


def write_potential(path: Path, potential: EffectivePotential) -> Path:
    """Columns x[,y[,z]] V over the single-particle grid."""
    grid = potential.grid
    frame = pd.DataFrame(grid.nodes, columns=list(AXES[: grid.dim]))
    frame["V"] = potential.samples
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def read_potential(path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise DataError(f"cannot read potential table {path}: {e}") from e
    if "V" not in frame.columns or "x" not in frame.columns:
        raise DataError(f"{path} is not a potential table (columns {list(frame.columns)})")
    return frame


def write_gse(path: Path, result) -> Path:
    rows = [
        {
            "eps": p.eps,
            "quantum_energy": p.quantum_energy,
            "classical_infimum": p.classical_infimum,
            "gap": abs(p.gap),
            "iterations": p.iterations,
        }
        for p in result.points
    ]
    return write_table(path, rows, GSE_COLUMNS)


def format_measure(mu: ClassicalMeasure) -> str:
    """One line per atom: "alpha; re:im,re:im,..." in mode order."""
    lines = []
    for weight, point in zip(mu.weights, mu.points):
        pairs = ",".join(f"{z.real:.17g}:{z.imag:.17g}" for z in point)
        lines.append(f"{weight:.17g}; {pairs}")
    return "\n".join(lines) + "\n"


def write_measure(path: Path, mu: ClassicalMeasure) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_measure(mu))
    return path


def read_measure(path: Path, label: str | None = None) -> ClassicalMeasure:
    path = Path(path)
    weights, points = [], []
    try:
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                weight, pairs = line.split(";")
                point = []
                for pair in pairs.strip().split(","):
                    re, im = pair.split(":")
                    point.append(complex(float(re), float(im)))
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: malformed atom {line!r}") from e
            weights.append(float(weight))
            points.append(point)
    except OSError as e:
        raise DataError(f"cannot read measure file {path}: {e}") from e
    if not weights:
        raise DataError(f"{path} holds no atoms")
    if len({len(p) for p in points}) != 1:
        raise DataError(f"{path}: atoms have different mode counts")
    return ClassicalMeasure(np.array(weights), np.array(points), label or path.stem)
