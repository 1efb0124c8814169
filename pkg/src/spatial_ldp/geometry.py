"""Discrete disk geometry around an input cell.

Coordinates are in cell units with the input cell at offset ``(0, 0)``.
A cell at offset ``(x, y)`` is the closed square ``[x - 1/2, x + 1/2] x [y - 1/2, y + 1/2]``.
Classification against the circle of integer radius ``b_hat`` is done in exact
integer arithmetic; the closed-form counts are kept alongside as cross-checks.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "CellClass",
    "GridSpec",
    "DiskPartition",
    "ClosedFormCheck",
    "classify_cell",
    "classify_offsets",
    "shrunken_area",
    "shrunken_area_formula",
    "diagonal_mixed_area",
    "strict_quarter_mixed",
    "strict_quarter_pure_count",
    "mixed_quarter_closed_form",
    "pure_quarter_closed_form",
    "pure_low_area",
    "disk_shape",
    "output_domain",
    "build_disk_partition",
    "closed_form_check",
]

# Lower clamp for shrunk fractions; the rectangle construction goes negative for
# a few cells whose radial point falls outside the cell's lower-left quadrant.
SHRUNK_FLOOR = 1e-9

_LOW, _MIXED, _HIGH = 0, 1, 2


class CellClass(enum.Enum):
    PURE_HIGH = "pure_high"
    PURE_LOW = "pure_low"
    MIXED = "mixed"


_CODE_TO_CLASS = {_LOW: CellClass.PURE_LOW, _MIXED: CellClass.MIXED, _HIGH: CellClass.PURE_HIGH}


@dataclass(frozen=True)
class GridSpec:
    """Square discretization of a ``domain_side x domain_side`` region.

    ``origin`` is the lower-left corner of the domain in data coordinates.
    """

    domain_side: float
    cell_side: float
    cells_per_side: int
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        L, g, d = self.domain_side, self.cell_side, self.cells_per_side
        if not (L > 0 and g > 0):
            raise ValueError(f"domain_side and cell_side must be positive, got L={L}, g={g}")
        if int(d) != d or d < 1:
            raise ValueError(f"cells_per_side must be a positive integer, got {d}")
        tol = 1e-9 * L
        if not (d * g <= L + tol and L < (d + 1) * g - tol):
            raise ValueError(f"inconsistent grid: d={d}, g={g}, L={L}")
        object.__setattr__(self, "cells_per_side", int(d))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def from_cells(cls, cells_per_side: int, domain_side: float = None, origin=(0.0, 0.0)) -> "GridSpec":
        """Grid with ``cells_per_side`` cells; defaults to unit cells."""
        if domain_side is None:
            domain_side = float(cells_per_side)
        return cls(domain_side, domain_side / cells_per_side, cells_per_side, origin)

    @classmethod
    def from_cell_side(cls, domain_side: float, cell_side: float, origin=(0.0, 0.0)) -> "GridSpec":
        d = int(math.floor(domain_side / cell_side + 1e-9))
        return cls(domain_side, cell_side, d, origin)

    @property
    def d(self) -> int:
        return self.cells_per_side

    @property
    def n_cells(self) -> int:
        return self.cells_per_side**2

    def cells(self) -> np.ndarray:
        """All valid cell indices, shape ``(d*d, 2)``, ordered with ``x`` major."""
        d = self.cells_per_side
        xs, ys = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        return np.column_stack([xs.ravel(), ys.ravel()])

    def flat_index(self, cell) -> int:
        x, y = int(cell[0]), int(cell[1])
        if not self.contains(cell):
            raise ValueError(f"cell {cell} outside a {self.d}x{self.d} grid")
        return x * self.cells_per_side + y

    def contains(self, cell) -> bool:
        d = self.cells_per_side
        return 0 <= cell[0] < d and 0 <= cell[1] < d

    def centers(self, cells=None) -> np.ndarray:
        """Cell centers in length units relative to ``origin``."""
        cells = self.cells() if cells is None else np.asarray(cells)
        return (cells + 0.5) * self.cell_side


def classify_offsets(dx, dy, b_hat: int) -> np.ndarray:
    """Vectorized classifier returning codes 0 (low), 1 (mixed), 2 (high).

    A cell whose closed square merely touches the circle cannot occur for integer
    radii: the squared nearest distance is ``(odd^2 + odd^2) / 4`` or ``odd^2 / 4``,
    never ``b_hat^2``.
    """
    if b_hat < 1:
        raise ValueError(f"b_hat must be >= 1, got {b_hat}")
    ax = np.abs(np.asarray(dx, dtype=np.int64))
    ay = np.abs(np.asarray(dy, dtype=np.int64))
    b2 = int(b_hat) ** 2
    high = ax * ax + ay * ay <= b2
    nx = np.maximum(0, 2 * ax - 1)
    ny = np.maximum(0, 2 * ay - 1)
    touches = nx * nx + ny * ny < 4 * b2
    return np.where(high, _HIGH, np.where(touches, _MIXED, _LOW)).astype(np.int8)


def classify_cell(offset, b_hat: int) -> CellClass:
    return _CODE_TO_CLASS[int(classify_offsets(offset[0], offset[1], b_hat))]


def shrunken_area_formula(dx, dy, b_hat):
    """Raw shrunken-rectangle area ``4(dx*delta + 1/2)(dy*delta + 1/2)``, unclamped."""
    ax = np.abs(np.asarray(dx, dtype=float))
    ay = np.abs(np.asarray(dy, dtype=float))
    r = np.hypot(ax, ay)
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = b_hat / r - 1.0
        return 4.0 * (delta * ax + 0.5) * (delta * ay + 0.5)


def _clamp_shrunk(s):
    return np.clip(s, SHRUNK_FLOOR, 1.0)


def shrunken_area(offset, b_hat: int) -> float:
    """High-probability share of a mixed cell, from the shrunken rectangle."""
    if classify_cell(offset, b_hat) is not CellClass.MIXED:
        raise ValueError(f"offset {tuple(offset)} is not a mixed cell for b_hat={b_hat}")
    return float(_clamp_shrunk(shrunken_area_formula(offset[0], offset[1], b_hat)))


def diagonal_mixed_area(b_hat: int) -> float:
    """Shrunk area credited to the diagonal direction beyond the last whole diagonal cell.

    Returns 1 when that cell is in fact pure high.
    """
    if b_hat < 1:
        raise ValueError(f"b_hat must be >= 1, got {b_hat}")
    b_prime = b_hat / math.sqrt(2.0) - 0.5
    frac = b_prime - math.floor(b_prime)
    return 4.0 * frac * frac if frac < 0.5 else 1.0


def _diagonal_whole_cells(b_hat: int) -> int:
    return math.floor(b_hat / math.sqrt(2.0) - 0.5)


@lru_cache(maxsize=None)
def _quarter_cells(b_hat: int):
    """Cells with ``x > y >= 1`` grouped by class, from the authoritative classifier."""
    xs, ys = np.meshgrid(np.arange(b_hat + 2), np.arange(1, b_hat + 2), indexing="ij")
    keep = xs > ys
    xs, ys = xs[keep], ys[keep]
    codes = classify_offsets(xs, ys, b_hat)
    order = np.lexsort((xs, ys))
    cells = [(int(xs[k]), int(ys[k])) for k in order]
    codes = codes[order]
    mixed = tuple(c for c, k in zip(cells, codes) if k == _MIXED)
    high = tuple(c for c, k in zip(cells, codes) if k == _HIGH)
    return mixed, high


def strict_quarter_mixed(b_hat: int) -> list[tuple[int, int]]:
    """Mixed cells strictly between directions 0 and pi/4, ordered by row."""
    if b_hat < 1:
        raise ValueError(f"b_hat must be >= 1, got {b_hat}")
    return list(_quarter_cells(b_hat)[0])


def strict_quarter_pure_count(b_hat: int) -> int:
    """Number of pure-high cells with ``x > y >= 1``."""
    if b_hat < 1:
        raise ValueError(f"b_hat must be >= 1, got {b_hat}")
    return len(_quarter_cells(b_hat)[1])


def mixed_quarter_closed_form(b_hat: int) -> list[tuple[int, int]]:
    """Closed-form strict-quarter mixed cells: one per row ``i``, at the circle's crossing of ``y = i - 1/2``."""
    s2 = math.sqrt(2.0)
    height = math.ceil(b_hat / s2 - 0.5)
    r1 = math.floor(b_hat / s2 - 0.5) * s2 + 1.0 / s2
    r = math.sqrt(r1 * r1 + 1.0 + s2 * r1)
    count = height - math.floor(r / b_hat)
    return [(math.ceil(math.sqrt(b_hat**2 - (i - 0.5) ** 2) - 0.5), i) for i in range(1, count + 1)]


def pure_quarter_closed_form(b_hat: int) -> int:
    """Closed-form strict-quarter pure-high count (printed form, known to over-count)."""
    height = math.ceil(b_hat / math.sqrt(2.0) - 0.5)
    mixed = mixed_quarter_closed_form(b_hat)
    total = height * (height - 2 * len(mixed) - 1) / 2 + sum(x for x, _ in mixed)
    return int(round(total))


def pure_low_area(d: int, b_hat: int) -> int:
    """Closed-form pure-low area of the output domain, ``d^2 + 4 b d - 4 b - 1``."""
    if d < 1 or b_hat < 1:
        raise ValueError(f"need d >= 1 and b_hat >= 1, got d={d}, b_hat={b_hat}")
    return d * d + 4 * b_hat * d - 4 * b_hat - 1


@lru_cache(maxsize=None)
def _disk_shape(b_hat: int):
    r = np.arange(-b_hat - 1, b_hat + 2)
    xs, ys = np.meshgrid(r, r, indexing="ij")
    codes = classify_offsets(xs, ys, b_hat)
    keep = codes != _LOW
    offsets = np.column_stack([xs[keep], ys[keep]])
    codes = codes[keep]
    share = np.ones(len(offsets))
    m = codes == _MIXED
    share[m] = _clamp_shrunk(shrunken_area_formula(offsets[m, 0], offsets[m, 1], b_hat))
    for arr in (offsets, codes, share):
        arr.setflags(write=False)
    return offsets, codes, share


def disk_shape(b_hat: int):
    """Offsets of all pure-high and mixed cells.

    Returns ``(offsets, codes, high_share)`` where ``high_share`` is 1 for pure-high
    cells and the clamped shrunk fraction for mixed cells.
    """
    if b_hat < 1:
        raise ValueError(f"b_hat must be >= 1, got {b_hat}")
    return _disk_shape(int(b_hat))


@lru_cache(maxsize=None)
def _output_domain(d: int, b_hat: int) -> np.ndarray:
    offsets, _, _ = _disk_shape(b_hat)
    span = d + 2 * b_hat
    mask = np.zeros((span, span), dtype=bool)
    for ox, oy in offsets + b_hat:
        mask[ox : ox + d, oy : oy + d] = True
    xs, ys = np.nonzero(mask)
    cells = np.column_stack([xs - b_hat, ys - b_hat])
    cells.setflags(write=False)
    return cells


def output_domain(d: int, b_hat: int) -> np.ndarray:
    """Absolute output cells: the union of the disk shape translated to every input cell."""
    if d < 1 or b_hat < 1:
        raise ValueError(f"need d >= 1 and b_hat >= 1, got d={d}, b_hat={b_hat}")
    return _output_domain(int(d), int(b_hat))


@dataclass(frozen=True)
class DiskPartition:
    """Area accounting of one input cell's output domain and the resulting densities."""

    b_hat: int
    epsilon: float
    d: int
    S_H: float
    S_L: float
    p_hat: float
    q_hat: float
    A_q_area: float
    diagonal_area: float
    pure_high_cells: tuple = field(repr=False)
    mixed_cells: tuple = field(repr=False)

    @property
    def total_area(self) -> float:
        return self.S_H + self.S_L

    @property
    def high_mass(self) -> float:
        return self.p_hat * self.S_H


def build_disk_partition(b_hat: int, epsilon: float, d: int) -> DiskPartition:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if b_hat < 1 or d < 1:
        raise ValueError(f"need b_hat >= 1 and d >= 1, got b_hat={b_hat}, d={d}")
    b_hat, d = int(b_hat), int(d)

    mixed_q = strict_quarter_mixed(b_hat)
    pure_q = strict_quarter_pure_count(b_hat)
    shrunk_q = [float(_clamp_shrunk(shrunken_area_formula(x, y, b_hat))) for x, y in mixed_q]
    diag = diagonal_mixed_area(b_hat)
    whole_diag = _diagonal_whole_cells(b_hat)

    S_H = 1 + 4 * (b_hat + whole_diag + diag) + 8 * (pure_q + sum(shrunk_q))
    A_q = float(len(output_domain(d, b_hat)) - len(disk_shape(b_hat)[0]))
    S_L = A_q + 4 * (1 - diag) + 8 * sum(1 - s for s in shrunk_q)

    # p = e^eps / (S_H e^eps + S_L), written to stay finite for large eps
    p_hat = 1.0 / (S_H + S_L * math.exp(-epsilon))
    q_hat = p_hat * math.exp(-epsilon)

    offsets, codes, share = disk_shape(b_hat)
    high = tuple((int(x), int(y)) for (x, y), c in zip(offsets, codes) if c == _HIGH)
    mixed = tuple(((int(x), int(y)), float(s)) for (x, y), c, s in zip(offsets, codes, share) if c == _MIXED)
    return DiskPartition(
        b_hat=b_hat,
        epsilon=float(epsilon),
        d=d,
        S_H=S_H,
        S_L=S_L,
        p_hat=p_hat,
        q_hat=q_hat,
        A_q_area=A_q,
        diagonal_area=diag,
        pure_high_cells=high,
        mixed_cells=mixed,
    )


@dataclass(frozen=True)
class ClosedFormCheck:
    b_hat: int
    mixed_enumerated: tuple
    mixed_closed_form: tuple
    pure_enumerated: int
    pure_closed_form: int
    low_enumerated: int
    low_closed_form: int
    d: int

    @property
    def mixed_agrees(self) -> bool:
        return set(self.mixed_enumerated) == set(self.mixed_closed_form)

    @property
    def pure_agrees(self) -> bool:
        return self.pure_enumerated == self.pure_closed_form

    @property
    def low_agrees(self) -> bool:
        return self.low_enumerated == self.low_closed_form


def closed_form_check(b_hat: int, d: int = None) -> ClosedFormCheck:
    """Compare every closed-form count with enumeration for one radius."""
    d = b_hat if d is None else d
    low_enum = len(output_domain(d, b_hat)) - len(disk_shape(b_hat)[0])
    return ClosedFormCheck(
        b_hat=b_hat,
        mixed_enumerated=tuple(strict_quarter_mixed(b_hat)),
        mixed_closed_form=tuple(mixed_quarter_closed_form(b_hat)),
        pure_enumerated=strict_quarter_pure_count(b_hat),
        pure_closed_form=pure_quarter_closed_form(b_hat),
        low_enumerated=low_enum,
        low_closed_form=pure_low_area(d, b_hat),
        d=d,
    )
