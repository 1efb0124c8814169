"""Synthetic point sets, CSV ingestion and bucketizing."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import GridSpec
from .histogram import Histogram

__all__ = [
    "DatasetKind",
    "DatasetSpec",
    "BBox",
    "CsvFormatError",
    "generate",
    "load_points_csv",
    "write_points_csv",
    "bucketize",
    "MNORMAL_CENTERS",
]

MNORMAL_CENTERS = ((0.0, 0.0), (2.5, 2.5), (-2.0, 1.5))
MNORMAL_RHOS = (0.5, 0.0, -0.2)


class DatasetKind(str, enum.Enum):
    GAUSSIAN = "normal"
    SZIPF = "szipf"
    MNORMAL = "mnormal"
    CSV = "csv"


class CsvFormatError(ValueError):
    pass


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(f"degenerate bounding box {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def is_square(self) -> bool:
        return math.isclose(self.width, self.height, rel_tol=1e-9)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return (
            (pts[:, 0] >= self.x_min) & (pts[:, 0] <= self.x_max) & (pts[:, 1] >= self.y_min) & (pts[:, 1] <= self.y_max)
        )

    def grid(self, cells_per_side: int) -> GridSpec:
        if not self.is_square:
            raise ValueError(f"bounding box {self} is not square")
        return GridSpec.from_cells(cells_per_side, self.width, origin=(self.x_min, self.y_min))

    @classmethod
    def square_around(cls, points) -> "BBox":
        """Smallest axis-aligned square anchored at the points' lower-left extent."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        lo = pts.min(axis=0)
        side = float((pts.max(axis=0) - lo).max())
        return cls(float(lo[0]), float(lo[1]), float(lo[0]) + side, float(lo[1]) + side)


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for one point set.

    ``centered_mnormal`` places all three MNormal blocks at the origin instead of
    the default translated centers.
    """

    kind: DatasetKind
    n: int = 100_000
    mean: tuple[float, float] = (0.0, 0.0)
    variance: tuple[float, float] = (1.0, 1.0)
    rho: float = 0.5
    bbox: BBox = None
    path: str = None
    centered_mnormal: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", DatasetKind(self.kind))
        if self.kind is not DatasetKind.CSV and self.n < 1:
            raise ValueError(f"sample count must be >= 1, got {self.n}")
        if not -1 < self.rho < 1:
            raise ValueError(f"correlation must lie in (-1, 1), got {self.rho}")
        if self.kind is DatasetKind.CSV and not self.path:
            raise ValueError("csv dataset needs a path")

    def default_bbox(self) -> BBox:
        if self.bbox is not None:
            return self.bbox
        if self.kind is DatasetKind.GAUSSIAN:
            return BBox(-5.0, -5.0, 5.0, 5.0)
        if self.kind is DatasetKind.SZIPF:
            return BBox(0.0, 0.0, 1.0, 1.0)
        return None


def _bivariate_normal(rng, n, mean, variance, rho):
    sx, sy = math.sqrt(variance[0]), math.sqrt(variance[1])
    cov = [[sx * sx, rho * sx * sy], [rho * sx * sy, sy * sy]]
    return rng.multivariate_normal(mean, cov, size=n, method="cholesky")


def _bivariate_normal_in(rng, n, mean, variance, rho, bbox: BBox):
    """Rejection-resample until every point lies strictly inside ``bbox``."""
    out = np.empty((0, 2))
    while len(out) < n:
        draw = _bivariate_normal(rng, max(n - len(out), 16), mean, variance, rho)
        inside = (
            (draw[:, 0] > bbox.x_min) & (draw[:, 0] < bbox.x_max) & (draw[:, 1] > bbox.y_min) & (draw[:, 1] < bbox.y_max)
        )
        out = np.vstack([out, draw[inside]])
    return out[:n]


def generate(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    """Sample ``spec.n`` points as an ``(n, 2)`` array."""
    if spec.kind is DatasetKind.GAUSSIAN:
        return _bivariate_normal_in(rng, spec.n, spec.mean, spec.variance, spec.rho, spec.default_bbox())
    if spec.kind is DatasetKind.SZIPF:
        # density 1 / ((x + 1) ln 2) on [0, 1): CDF log2(1 + x), inverse 2^u - 1
        return np.exp2(rng.random((spec.n, 2))) - 1.0
    if spec.kind is DatasetKind.MNORMAL:
        centers = [(0.0, 0.0)] * 3 if spec.centered_mnormal else MNORMAL_CENTERS
        sizes = [spec.n // 3 + (1 if k < spec.n % 3 else 0) for k in range(3)]
        blocks = []
        for size, center, rho in zip(sizes, centers, MNORMAL_RHOS):
            if spec.bbox is None:
                blocks.append(_bivariate_normal(rng, size, center, spec.variance, rho))
            else:
                blocks.append(_bivariate_normal_in(rng, size, center, spec.variance, rho, spec.bbox))
        return np.vstack(blocks)
    points, _ = load_points_csv(spec.path, spec.bbox)
    return points


def _parse_row(row, lineno):
    if len(row) < 2:
        raise CsvFormatError(f"line {lineno}: expected two columns, got {len(row)}")
    try:
        return float(row[0]), float(row[1])
    except ValueError:
        raise CsvFormatError(f"line {lineno}: non-numeric field in {row[:2]!r}") from None


def load_points_csv(path, bbox: BBox = None) -> tuple[np.ndarray, int]:
    """Read ``x,y`` rows, skipping an optional header; returns the points inside ``bbox`` and the dropped count."""
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if lineno == 1:
                try:
                    float(row[0]), float(row[1])
                except (ValueError, IndexError):
                    continue
            rows.append(_parse_row(row, lineno))
    points = np.array(rows, dtype=float).reshape(-1, 2)
    if bbox is None:
        kept = points
    else:
        kept = points[bbox.contains(points)]
    if len(kept) == 0:
        raise CsvFormatError(f"{path}: empty after filtering")
    return kept, len(points) - len(kept)


def write_points_csv(points, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in np.asarray(points, dtype=float):
            writer.writerow([repr(float(x)), repr(float(y))])


def bucketize(points, grid: GridSpec, bbox: BBox = None) -> tuple[Histogram, np.ndarray]:
    """Map points to cells; points on the upper edges fall in the last row or column."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("no points to bucketize")
    if bbox is not None:
        if not bbox.is_square:
            raise ValueError(f"bounding box {bbox} is not square")
        origin = np.array([bbox.x_min, bbox.y_min])
        g = bbox.width / grid.d
    else:
        origin = np.asarray(grid.origin)
        g = grid.cell_side
    cells = np.floor((pts - origin) / g).astype(np.int64)
    np.clip(cells, 0, grid.d - 1, out=cells)
    counts = np.bincount(cells[:, 0] * grid.d + cells[:, 1], minlength=grid.n_cells)
    return Histogram.from_counts(grid, counts), cells
