"""Probability mass over the cells of a grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import GridSpec

__all__ = ["Histogram", "DiscreteMeasure", "write_histogram_csv", "read_histogram_csv"]


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted atoms in the plane."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if len(points) != len(weights):
            raise ValueError("points and weights differ in length")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    def atoms(self):
        return self.points, self.weights


@dataclass(frozen=True)
class Histogram:
    """Mass over a ``d x d`` grid, indexed ``mass[x, y]``."""

    grid: GridSpec
    mass: np.ndarray

    def __post_init__(self):
        d = self.grid.cells_per_side
        mass = np.array(self.mass, dtype=float).reshape(d, d)
        if np.any(mass < 0):
            raise ValueError("histogram mass must be non-negative")
        if abs(mass.sum() - 1.0) > 1e-9:
            raise ValueError(f"histogram mass sums to {mass.sum()!r}, expected 1")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_counts(cls, grid: GridSpec, counts) -> "Histogram":
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        if total <= 0:
            raise ValueError("cannot normalize all-zero counts")
        return cls(grid, counts / total)

    @classmethod
    def uniform(cls, grid: GridSpec) -> "Histogram":
        return cls(grid, np.full(grid.n_cells, 1.0 / grid.n_cells))

    @classmethod
    def point_mass(cls, grid: GridSpec, cell) -> "Histogram":
        mass = np.zeros(grid.n_cells)
        mass[grid.flat_index(cell)] = 1.0
        return cls(grid, mass)

    def atoms(self):
        return self.grid.centers(), self.mass.ravel()

    def total_variation(self, other: "Histogram") -> float:
        return 0.5 * float(np.abs(self.mass - other.mass).sum())


def write_histogram_csv(hist: Histogram, path) -> None:
    """Write ``x_index,y_index,mass`` rows."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x_index", "y_index", "mass"])
        for (x, y), m in zip(hist.grid.cells(), hist.mass.ravel()):
            writer.writerow([int(x), int(y), repr(float(m))])


def read_histogram_csv(path, grid: GridSpec) -> Histogram:
    mass = np.zeros((grid.d, grid.d))
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            mass[int(row["x_index"]), int(row["y_index"])] = float(row["mass"])
    return Histogram(grid, mass)
