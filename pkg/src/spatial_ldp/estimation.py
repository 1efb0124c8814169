"""Report collection and maximum-likelihood reconstruction of the input histogram."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d

from .data import BBox, bucketize
from .geometry import GridSpec
from .histogram import Histogram
from .mechanisms import Kernel, Mechanism, MechanismSpec, _responder

__all__ = [
    "NoisyCounts",
    "Smoothing",
    "Acceleration",
    "EmConfig",
    "EmResult",
    "collect",
    "em_fit",
    "em_estimate",
    "PipelineResult",
    "run_pipeline",
]

_BINOMIAL = np.array([0.25, 0.5, 0.25])


@dataclass(frozen=True)
class NoisyCounts:
    """Report counts per output cell."""

    output_cells: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        cells = np.array(self.output_cells, dtype=np.int64).reshape(-1, 2)
        counts = np.array(self.counts, dtype=np.int64).ravel()
        if len(cells) != len(counts):
            raise ValueError(f"{len(cells)} output cells but {len(counts)} counts")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        cells.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "output_cells", cells)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        return self.counts / self.total


class Smoothing(str, enum.Enum):
    NONE = "none"
    BINOMIAL = "binomial"


class Acceleration(str, enum.Enum):
    NONE = "none"
    OVERRELAXED = "overrelaxed"


@dataclass(frozen=True)
class EmConfig:
    """EM stopping rule and options.

    ``acceleration="overrelaxed"`` raises the multiplicative EM update to a
    power ``omega >= 1`` that grows while the log-likelihood keeps improving and
    falls back to the plain step otherwise, so monotonicity is kept. It makes a
    large difference when the maximizer sits on the simplex boundary, where plain
    EM only approaches it at rate ``1/k``.
    """

    max_iterations: int = 10_000
    tolerance: float = 1e-6
    smoothing: Smoothing = Smoothing.NONE
    acceleration: Acceleration = Acceleration.NONE

    def __post_init__(self):
        object.__setattr__(self, "smoothing", Smoothing(self.smoothing))
        object.__setattr__(self, "acceleration", Acceleration(self.acceleration))
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")


@dataclass(frozen=True)
class EmResult:
    theta: np.ndarray
    iterations: int
    log_likelihood: np.ndarray
    converged: bool

    @property
    def final_log_likelihood(self) -> float:
        return float(self.log_likelihood[-1])


def _smooth(theta: np.ndarray, d: int) -> np.ndarray:
    grid = theta.reshape(d, d)
    grid = convolve1d(grid, _BINOMIAL, axis=0, mode="reflect")
    grid = convolve1d(grid, _BINOMIAL, axis=1, mode="reflect")
    flat = grid.ravel()
    return flat / flat.sum()


def _check_alignment(counts: NoisyCounts, kernel: Kernel):
    if kernel.shape[1] != len(counts.counts):
        raise ValueError(f"kernel has {kernel.shape[1]} outputs, counts have {len(counts.counts)}")
    if not np.array_equal(kernel.output_cells, counts.output_cells):
        raise ValueError("kernel output cells do not match the counts' output cells")
    if counts.total == 0:
        raise ValueError("all-zero counts")


def _log_lik(c, denom):
    with np.errstate(divide="ignore"):
        return float(np.dot(c, np.log(denom)))


def em_fit(counts: NoisyCounts, kernel: Kernel, config: EmConfig = EmConfig()) -> EmResult:
    """Maximize ``sum_o c_o log(sum_i K[i, o] theta_i)`` over the input simplex.

    Starts from the uniform histogram. Stops once the relative change of the
    log-likelihood drops below ``config.tolerance`` or after
    ``config.max_iterations`` updates.
    """
    _check_alignment(counts, kernel)
    if config.smoothing is Smoothing.BINOMIAL:
        if kernel.grid is None or kernel.shape[0] != kernel.grid.n_cells:
            raise ValueError("binomial smoothing needs a kernel over a full grid")
        d = kernel.grid.d

    # zero-count columns contribute nothing to either step
    keep = counts.counts > 0
    K = kernel.probabilities[:, keep]
    c = counts.counts[keep].astype(float)
    N = c.sum()
    n = K.shape[0]

    theta = np.full(n, 1.0 / n)
    denom = theta @ K
    ll = _log_lik(c, denom)
    trace = [ll]
    omega = 1.0
    converged = False
    it = 0
    while it < config.max_iterations:
        it += 1
        ratio = K @ (c / denom) / N
        step = theta * ratio
        step /= step.sum()
        if config.acceleration is Acceleration.OVERRELAXED and omega > 1.0:
            with np.errstate(divide="ignore", invalid="ignore"):
                trial = theta * np.power(ratio, omega)
            trial /= trial.sum()
            trial_denom = trial @ K
            trial_ll = _log_lik(c, trial_denom)
            plain_denom = step @ K
            plain_ll = _log_lik(c, plain_denom)
            if trial_ll >= plain_ll:
                new, new_denom, new_ll = trial, trial_denom, trial_ll
                omega = min(omega * 1.5, 1e6)
            else:
                new, new_denom, new_ll = step, plain_denom, plain_ll
                omega = 1.5
        else:
            new = step
            new_denom = new @ K
            new_ll = _log_lik(c, new_denom)
            if config.acceleration is Acceleration.OVERRELAXED:
                omega = 1.5
        if config.smoothing is Smoothing.BINOMIAL:
            new = _smooth(new, d)
            new_denom = new @ K
            new_ll = _log_lik(c, new_denom)
        change = abs(new_ll - ll) / max(abs(ll), 1e-300)
        theta, denom, ll = new, new_denom, new_ll
        trace.append(ll)
        if change < config.tolerance:
            converged = True
            break
    return EmResult(theta, it, np.array(trace), converged)


def em_estimate(counts: NoisyCounts, kernel: Kernel, config: EmConfig = EmConfig()) -> Histogram:
    """Estimated input histogram; needs a kernel built over a grid."""
    if kernel.grid is None:
        raise ValueError("em_estimate needs a kernel over a grid; use em_fit for abstract kernels")
    theta = em_fit(counts, kernel, config).theta
    return Histogram(kernel.grid, theta / theta.sum())


def collect(
    points,
    grid: GridSpec,
    mechanism: MechanismSpec,
    rng: np.random.Generator,
    bbox: BBox = None,
) -> NoisyCounts:
    """Bucketize every point and randomize it independently.

    DAM reports go through the region-then-cell responder; HUEM and GRR draw
    straight from their kernel rows.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("collect needs at least one point")
    _, cells = bucketize(pts, grid, bbox)
    per_cell = np.bincount(cells[:, 0] * grid.d + cells[:, 1], minlength=grid.n_cells)
    kernel = mechanism.kernel(grid)
    totals = np.zeros(kernel.shape[1], dtype=np.int64)
    inputs = grid.cells()
    if mechanism.kind is Mechanism.DAM:
        responder = _responder(mechanism.partition(grid), grid)
        for idx in np.flatnonzero(per_cell):
            cols = responder.sample_columns(inputs[idx], int(per_cell[idx]), rng)
            totals += np.bincount(cols, minlength=len(totals))
    else:
        P = kernel.probabilities
        for idx in np.flatnonzero(per_cell):
            totals += rng.multinomial(int(per_cell[idx]), P[idx])
    return NoisyCounts(kernel.output_cells, totals)


@dataclass(frozen=True)
class PipelineResult:
    estimate: Histogram
    truth: Histogram
    diagnostics: dict = field(default_factory=dict)


def run_pipeline(
    points,
    grid: GridSpec,
    mechanism: MechanismSpec,
    em_config: EmConfig,
    rng: np.random.Generator,
    bbox: BBox = None,
) -> PipelineResult:
    truth, _ = bucketize(points, grid, bbox)
    counts = collect(points, grid, mechanism, rng, bbox)
    kernel = mechanism.kernel(grid)
    fit = em_fit(counts, kernel, em_config)
    estimate = Histogram(grid, fit.theta / fit.theta.sum())
    diagnostics = {
        "iterations": fit.iterations,
        "log_likelihood": fit.final_log_likelihood,
        "converged": fit.converged,
        "reports": counts.total,
    }
    return PipelineResult(estimate, truth, diagnostics)
