"""Randomized reporting: Disk Area, Hybrid Uniform-Exponential, and a categorical baseline."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import lambertw

from .geometry import (
    _HIGH,
    _MIXED,
    DiskPartition,
    GridSpec,
    _clamp_shrunk,
    build_disk_partition,
    classify_offsets,
    disk_shape,
    output_domain,
    shrunken_area_formula,
)
from .histogram import DiscreteMeasure

__all__ = [
    "Mechanism",
    "MechanismSpec",
    "Kernel",
    "FanRingTable",
    "GridAreaResponse",
    "dam_params",
    "huem_q",
    "optimal_b",
    "cell_radius",
    "fan_ring_table",
    "build_kernel",
    "grid_area_response",
    "sample_continuous",
]

# Below this budget the radius formula is 0/0; its limit is used instead.
_SMALL_EPSILON = 1e-6


class Mechanism(str, enum.Enum):
    DAM = "dam"
    HUEM = "huem"
    GRR = "grr"


def _check_epsilon(epsilon):
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be a positive finite number, got {epsilon}")


def dam_params(b: float, epsilon: float, L: float = 1.0) -> tuple[float, float]:
    """High and low densities ``(p, q)`` of the continuous disk mechanism on an ``L x L`` square."""
    if not (b > 0 and L > 0):
        raise ValueError(f"b and L must be positive, got b={b}, L={L}")
    _check_epsilon(epsilon)
    rest = (4 * L * b + L * L) * math.exp(-epsilon)
    p = 1.0 / (math.pi * b * b + rest)
    return p, p * math.exp(-epsilon)


def huem_q(b: float, epsilon: float, L: float = 1.0) -> float:
    """Low density of the continuous hybrid uniform-exponential mechanism."""
    if not (b > 0 and L > 0):
        raise ValueError(f"b and L must be positive, got b={b}, L={L}")
    _check_epsilon(epsilon)
    e2 = epsilon * epsilon
    return e2 / (2 * math.pi * math.expm1(epsilon) * b * b - 2 * math.pi * epsilon * b * b + e2 * (4 * L * b + L * L))


def optimal_b(epsilon: float, L: float = 1.0) -> float:
    """Radius maximizing the mutual-information bound of the disk mechanism."""
    _check_epsilon(epsilon)
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    if epsilon < _SMALL_EPSILON:
        return L * (2 + math.sqrt(4 + math.pi)) / math.pi
    # Divide numerator and denominator by e^eps so large budgets stay finite.
    em = math.exp(-epsilon)
    m1 = 1 - (1 + epsilon) * em  # (e^eps - 1 - eps) e^-eps
    m2 = em - 1 + epsilon  # (1 - e^eps + eps e^eps) e^-eps
    # b = (2 m2 + sqrt(4 m2^2 + pi e^eps m1 m2)) / (pi e^eps m1) with scaled m1, m2
    num = 2 * m2 + math.sqrt(4 * m2 * m2 + math.pi * m1 * m2 / em)
    return L * num * em / (math.pi * m1)


def cell_radius(b: float) -> int:
    """Integer cell radius ``floor(b)`` for a radius in cell units, at least 1."""
    return max(1, int(math.floor(b + 1e-12)))


@dataclass(frozen=True)
class FanRingTable:
    """Discrete exponential profile: ring densities, blended border cells and the low density."""

    b_hat: int
    epsilon: float
    q: float
    ring_densities: np.ndarray
    border_cells: tuple = field(repr=False)
    factors: np.ndarray = field(repr=False)
    span: int = 0

    def density(self, offset) -> float:
        x, y = offset
        if max(abs(x), abs(y)) > self.span:
            return self.q
        return float(self.q * self.factors[x + self.span, y + self.span])


def _huem_factors(b_hat: int, epsilon: float, span: int):
    """Density relative to ``q`` for every offset in ``[-span, span]^2``."""
    r = np.arange(-span, span + 1)
    xs, ys = np.meshgrid(r, r, indexing="ij")
    r2 = xs * xs + ys * ys
    ring = np.maximum(1, np.ceil(np.sqrt(r2)).astype(np.int64))
    # ring j in 1..b_hat has factor e^{(1 - (j-1)/b_hat) eps}; beyond the disk it is 1
    ring_factor = np.exp((1.0 - (np.arange(1, b_hat + 2) - 1) / b_hat) * epsilon)
    ring_factor[b_hat] = 1.0
    factors = np.where(ring <= b_hat, ring_factor[np.minimum(ring, b_hat + 1) - 1], 1.0)

    # A cell straddles at most one circle k = ceil(rho) - 1.
    inner = ring - 1
    border = []
    for k in range(1, b_hat + 1):
        sel = (inner == k) & (classify_offsets(xs, ys, k) == _MIXED)
        if not sel.any():
            continue
        share = _clamp_shrunk(shrunken_area_formula(xs[sel], ys[sel], k))
        outer_factor = ring_factor[k] if k < b_hat else 1.0
        factors[sel] = share * ring_factor[k - 1] + (1 - share) * outer_factor
        for x, y, s, f in zip(xs[sel], ys[sel], share, factors[sel]):
            border.append(((int(x), int(y)), k, float(s), float(f)))
    return factors, ring_factor[:b_hat], border


@lru_cache(maxsize=None)
def _huem_factor_table(b_hat: int, epsilon: float):
    span = b_hat + 1
    factors, rings, border = _huem_factors(b_hat, epsilon, span)
    factors.setflags(write=False)
    offsets, _, _ = disk_shape(b_hat)
    shape_sum = float(factors[offsets[:, 0] + span, offsets[:, 1] + span].sum())
    return factors, rings, tuple(border), shape_sum


def fan_ring_table(b_hat: int, epsilon: float, d: int) -> FanRingTable:
    """Discrete HUEM densities for a ``d x d`` input grid.

    Rows are translates of one another, so a single ``q`` normalizes all of them:
    the disk shape carries ``q * factor`` per cell and the rest of the output domain ``q``.
    """
    if b_hat < 1 or d < 1:
        raise ValueError(f"need b_hat >= 1 and d >= 1, got b_hat={b_hat}, d={d}")
    _check_epsilon(epsilon)
    b_hat = int(b_hat)
    factors, rings, border, shape_sum = _huem_factor_table(b_hat, float(epsilon))
    n_low = len(output_domain(d, b_hat)) - len(disk_shape(b_hat)[0])
    q = 1.0 / (shape_sum + n_low)
    border = tuple((off, k, s, q * f) for off, k, s, f in border)
    return FanRingTable(b_hat, float(epsilon), q, q * rings, border, factors, b_hat + 1)


@dataclass(frozen=True)
class Kernel:
    """Row-stochastic matrix from input cells to output cells."""

    probabilities: np.ndarray
    input_cells: np.ndarray
    output_cells: np.ndarray
    kind: Mechanism = None
    epsilon: float = None
    b_hat: int = None
    grid: GridSpec = None

    def __post_init__(self):
        P = np.array(self.probabilities, dtype=float)
        inputs = np.array(self.input_cells, dtype=np.int64).reshape(-1, 2)
        outputs = np.array(self.output_cells, dtype=np.int64).reshape(-1, 2)
        if P.shape != (len(inputs), len(outputs)):
            raise ValueError(f"probabilities shape {P.shape} does not match {len(inputs)} inputs x {len(outputs)} outputs")
        if np.any(P < 0):
            raise ValueError("kernel entries must be non-negative")
        bad = np.abs(P.sum(axis=1) - 1.0) > 1e-9
        if bad.any():
            raise ValueError(f"kernel row {int(np.argmax(bad))} does not sum to 1")
        for arr in (P, inputs, outputs):
            arr.setflags(write=False)
        object.__setattr__(self, "probabilities", P)
        object.__setattr__(self, "input_cells", inputs)
        object.__setattr__(self, "output_cells", outputs)

    @classmethod
    def from_matrix(cls, probabilities) -> "Kernel":
        """Kernel over abstract cells ``(i, 0)`` for hand-built examples."""
        P = np.asarray(probabilities, dtype=float)
        n, m = P.shape
        idx = lambda k: np.column_stack([np.arange(k), np.zeros(k, dtype=np.int64)])
        return cls(P, idx(n), idx(m))

    @property
    def shape(self):
        return self.probabilities.shape

    def row(self, cell) -> np.ndarray:
        hits = np.flatnonzero((self.input_cells == np.asarray(cell)).all(axis=1))
        if len(hits) == 0:
            raise KeyError(f"no input cell {tuple(cell)}")
        return self.probabilities[hits[0]]

    def output_centers(self) -> np.ndarray:
        g = 1.0 if self.grid is None else self.grid.cell_side
        return (self.output_cells + 0.5) * g

    def row_measure(self, cell) -> DiscreteMeasure:
        return DiscreteMeasure(self.output_centers(), self.row(cell))


def _offset_kernel(grid: GridSpec, b_hat: int, table: np.ndarray, span: int, background: float):
    """Kernel whose entry depends only on ``output - input``; ``table`` covers ``[-span, span]^2``."""
    inputs = grid.cells()
    outputs = output_domain(grid.d, b_hat)
    dx = outputs[None, :, 0] - inputs[:, None, 0]
    dy = outputs[None, :, 1] - inputs[:, None, 1]
    inside = (np.abs(dx) <= span) & (np.abs(dy) <= span)
    P = np.full(dx.shape, background)
    P[inside] = table[dx[inside] + span, dy[inside] + span]
    return inputs, outputs, P


def build_kernel(kind, grid: GridSpec, b_hat: int, epsilon: float) -> Kernel:
    kind = Mechanism(kind)
    _check_epsilon(epsilon)
    if kind is Mechanism.GRR:
        n = grid.n_cells
        em = math.exp(-epsilon)
        diag = 1.0 / (1.0 + (n - 1) * em)
        P = np.full((n, n), diag * em)
        np.fill_diagonal(P, diag)
        cells = grid.cells()
        return Kernel(P, cells, cells, kind, float(epsilon), None, grid)

    if b_hat is None or b_hat < 1:
        raise ValueError(f"b_hat must be >= 1 for {kind.value}, got {b_hat}")
    b_hat = int(b_hat)
    span = b_hat + 1
    if kind is Mechanism.DAM:
        part = build_disk_partition(b_hat, epsilon, grid.d)
        offsets, _, share = disk_shape(b_hat)
        table = np.full((2 * span + 1, 2 * span + 1), part.q_hat)
        table[offsets[:, 0] + span, offsets[:, 1] + span] = part.p_hat * share + part.q_hat * (1 - share)
        inputs, outputs, P = _offset_kernel(grid, b_hat, table, span, part.q_hat)
    else:
        rings = fan_ring_table(b_hat, epsilon, grid.d)
        inputs, outputs, P = _offset_kernel(grid, b_hat, rings.q * rings.factors, span, rings.q)
    return Kernel(P, inputs, outputs, kind, float(epsilon), b_hat, grid)


@dataclass(frozen=True)
class MechanismSpec:
    """Mechanism choice and its parameters; ``b_hat`` is ignored for GRR."""

    kind: Mechanism
    epsilon: float
    b_hat: int = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Mechanism(self.kind))
        _check_epsilon(self.epsilon)
        if self.kind is not Mechanism.GRR and (self.b_hat is None or self.b_hat < 1):
            raise ValueError(f"b_hat must be >= 1 for {self.kind.value}")

    def kernel(self, grid: GridSpec) -> Kernel:
        return _cached_kernel(self.kind, float(self.epsilon), self.b_hat, grid)

    def partition(self, grid: GridSpec) -> DiskPartition:
        return build_disk_partition(self.b_hat, self.epsilon, grid.d)


@lru_cache(maxsize=32)
def _cached_kernel(kind, epsilon, b_hat, grid):
    return build_kernel(kind, grid, b_hat, epsilon)


class GridAreaResponse:
    """Sampler for one disk partition on one grid.

    Draws first pick one of four regions (pure low, low part of mixed cells,
    shrunk part of mixed cells, pure high) with weights ``<1, 1, e^eps, e^eps>``
    times their areas, then a cell inside the chosen region.
    """

    def __init__(self, partition: DiskPartition, grid: GridSpec):
        if partition.d != grid.d:
            raise ValueError(f"partition built for d={partition.d}, grid has d={grid.d}")
        self.partition = partition
        self.grid = grid
        b = partition.b_hat
        self.output_cells = output_domain(grid.d, b)
        side = grid.d + 2 * b
        self._column = np.full((side, side), -1, dtype=np.int64)
        self._column[self.output_cells[:, 0] + b, self.output_cells[:, 1] + b] = np.arange(len(self.output_cells))

        offsets, codes, share = disk_shape(b)
        self._high = offsets[codes == _HIGH]
        self._mixed = offsets[codes == _MIXED]
        s = share[codes == _MIXED]
        em = math.exp(-partition.epsilon)
        n_low = len(self.output_cells) - len(offsets)
        # region weights scaled by e^-eps
        w = np.array([n_low * em, (1 - s).sum() * em, s.sum(), float(len(self._high))])
        self._region_p = w / w.sum()
        ws = (1 - s) * em + s
        self._mixed_p = ws / ws.sum() if len(ws) else ws
        self._low_cache = {}

    def _columns(self, cell, offsets) -> np.ndarray:
        b = self.partition.b_hat
        return self._column[offsets[:, 0] + cell[0] + b, offsets[:, 1] + cell[1] + b]

    def _low_columns(self, cell) -> np.ndarray:
        key = (int(cell[0]), int(cell[1]))
        cols = self._low_cache.get(key)
        if cols is None:
            mask = np.ones(len(self.output_cells), dtype=bool)
            mask[self._columns(cell, self._high)] = False
            mask[self._columns(cell, self._mixed)] = False
            cols = np.flatnonzero(mask)
            self._low_cache[key] = cols
        return cols

    def sample_columns(self, cell, size: int, rng: np.random.Generator) -> np.ndarray:
        """Output-column indices of ``size`` independent reports of ``cell``."""
        if not self.grid.contains(cell):
            raise ValueError(f"cell {tuple(cell)} outside the {self.grid.d}x{self.grid.d} input grid")
        region = rng.choice(4, size=size, p=self._region_p)
        out = np.empty(size, dtype=np.int64)
        low = region == 0
        if low.any():
            cols = self._low_columns(cell)
            out[low] = cols[rng.integers(len(cols), size=int(low.sum()))]
        mixed = (region == 1) | (region == 2)
        if mixed.any():
            cols = self._columns(cell, self._mixed)
            out[mixed] = cols[rng.choice(len(cols), size=int(mixed.sum()), p=self._mixed_p)]
        high = region == 3
        if high.any():
            cols = self._columns(cell, self._high)
            out[high] = cols[rng.integers(len(cols), size=int(high.sum()))]
        return out

    def sample(self, cell, rng: np.random.Generator, size: int = None):
        cols = self.sample_columns(cell, 1 if size is None else size, rng)
        cells = self.output_cells[cols]
        return tuple(int(v) for v in cells[0]) if size is None else cells


@lru_cache(maxsize=32)
def _responder(partition: DiskPartition, grid: GridSpec) -> GridAreaResponse:
    return GridAreaResponse(partition, grid)


def grid_area_response(cell, partition: DiskPartition, grid: GridSpec, rng: np.random.Generator) -> tuple[int, int]:
    """One randomized report of ``cell`` as an absolute output cell index."""
    return _responder(partition, grid).sample(cell, rng)


def _in_rounded_square(pts: np.ndarray, L: float, b: float) -> np.ndarray:
    nearest = np.clip(pts, 0.0, L)
    return np.hypot(*(pts - nearest).T) <= b


def _huem_radius(u: np.ndarray, b: float, epsilon: float) -> np.ndarray:
    """Inverse CDF of the density proportional to ``r e^{-eps r / b}`` on ``[0, b]``."""
    lam = epsilon / b
    top = -math.expm1(-epsilon) - epsilon * math.exp(-epsilon)  # CDF at r = b
    w = lambertw((u * top - 1.0) / math.e, k=-1).real
    return np.clip(-(w + 1.0) / lam, 0.0, b)


def sample_continuous(kind, point, b: float, epsilon: float, rng: np.random.Generator, L: float = 1.0, size: int = None):
    """Randomize a point of ``[0, L]^2`` with the continuous DAM or HUEM."""
    kind = Mechanism(kind)
    if kind is Mechanism.GRR:
        raise ValueError("GRR has no continuous form")
    v = np.asarray(point, dtype=float)
    if v.shape != (2,) or np.any(v < 0) or np.any(v > L):
        raise ValueError(f"point {point} outside [0, {L}]^2")
    n = 1 if size is None else int(size)

    if kind is Mechanism.DAM:
        p, q = dam_params(b, epsilon, L)
        disk_mass = math.pi * b * b * p
    else:
        q = huem_q(b, epsilon, L)
        disk_mass = 1.0 - q * (4 * L * b + L * L)

    in_disk = rng.random(n) < disk_mass
    out = np.empty((n, 2))
    k = int(in_disk.sum())
    if k:
        theta = rng.uniform(0, 2 * math.pi, k)
        if kind is Mechanism.DAM:
            r = b * np.sqrt(rng.random(k))
        else:
            r = _huem_radius(rng.random(k), b, epsilon)
        out[in_disk] = v + np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    missing = np.flatnonzero(~in_disk)
    while len(missing):
        prop = rng.uniform(-b, L + b, size=(len(missing), 2))
        ok = _in_rounded_square(prop, L, b) & (np.hypot(*(prop - v).T) > b)
        out[missing[ok]] = prop[ok]
        missing = missing[~ok]
    return tuple(out[0]) if size is None else out
