"""Privacy accounting for reporting kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .geometry import GridSpec
from .mechanisms import Kernel

__all__ = ["PrivacyReport", "NonPrivateKernel", "certify_ldp", "worst_column", "local_privacy", "privacy_report"]


class NonPrivateKernel(ValueError):
    """Raised by :func:`certify_ldp` with ``strict=True`` when some column has a zero entry."""

    def __init__(self, column):
        super().__init__(f"output column {column} has a zero entry; no finite epsilon")
        self.column = column


def _column_log_ratios(P):
    hi = P.max(axis=0)
    lo = P.min(axis=0)
    with np.errstate(divide="ignore"):
        return np.where(lo > 0, np.log(hi) - np.log(np.where(lo > 0, lo, 1.0)), np.inf)


def worst_column(kernel: Kernel) -> int:
    """Index of the output column attaining the largest log ratio."""
    return int(np.argmax(_column_log_ratios(kernel.probabilities)))


def certify_ldp(kernel: Kernel, strict: bool = False) -> float:
    """Smallest epsilon for which ``kernel`` is epsilon-LDP.

    A column with a zero entry next to a positive one gives ``inf``; with
    ``strict=True`` that raises :class:`NonPrivateKernel` naming the column.
    """
    ratios = _column_log_ratios(kernel.probabilities)
    worst = int(np.argmax(ratios))
    value = float(ratios[worst])
    if math.isinf(value) and strict:
        raise NonPrivateKernel(worst)
    return max(value, 0.0)


def local_privacy(kernel: Kernel, grid: GridSpec = None) -> float:
    """Expected distance between the true cell and a posterior draw, under a uniform prior.

    For every output ``o`` the adversary samples a guess with probability
    proportional to ``K[., o]``; the result is in the grid's length units.
    """
    P = kernel.probabilities
    n = P.shape[0]
    if grid is None:
        grid = kernel.grid
    if grid is None:
        points = kernel.input_cells.astype(float)
    else:
        if len(kernel.input_cells) != grid.n_cells:
            raise ValueError("kernel inputs do not cover the grid")
        points = grid.centers(kernel.input_cells)
    D = cdist(points, points)
    col = P.sum(axis=0)
    live = col > 0
    P, col = P[:, live], col[live]
    # sum over o of k_o . (D k_o) / (n sum k_o)
    quad = np.einsum("io,io->o", P, D @ P)
    return float((quad / (n * col)).sum())


@dataclass(frozen=True)
class PrivacyReport:
    max_log_ratio: float
    local_privacy: float

    @property
    def certified_epsilon(self) -> float:
        return self.max_log_ratio


def privacy_report(kernel: Kernel, grid: GridSpec = None) -> PrivacyReport:
    return PrivacyReport(certify_ldp(kernel), local_privacy(kernel, grid))
