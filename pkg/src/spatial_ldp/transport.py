"""Wasserstein distances between discrete measures.

The exact distance solves the transportation problem with a primal simplex on
the spanning-tree basis (MODI potentials). Sinkhorn iterations run in the log
domain with a halving schedule for the regularization. Sliced distances
project both measures onto evenly spaced directions in ``[0, pi)``.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .histogram import DiscreteMeasure, Histogram

__all__ = [
    "TransportPlan",
    "SinkhornResult",
    "OptimalityError",
    "cost_matrix",
    "solve_transport",
    "wasserstein_exact",
    "sinkhorn",
    "sinkhorn_plan",
    "wasserstein_1d",
    "sliced_wasserstein",
    "support_size",
]

_MASS_TOL = 1e-9


class OptimalityError(RuntimeError):
    pass


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between source and target atoms.

    ``cost`` is the objective ``sum c_ij R_ij`` in length^p units, not its root.
    """

    coupling: np.ndarray
    cost: float
    duality_gap: float = 0.0
    pivots: int = 0

    def marginal_error(self, a, b) -> float:
        R = self.coupling
        return float(max(np.abs(R.sum(axis=1) - a).max(), np.abs(R.sum(axis=0) - b).max()))


def cost_matrix(X, Y, p: float = 2.0) -> np.ndarray:
    """``C[i, j] = |X_i - Y_j|_2 ** p``."""
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    Y = np.asarray(Y, dtype=float).reshape(-1, 2)
    D = cdist(X, Y)
    return D if p == 1 else D**p


def _atoms(measure):
    if isinstance(measure, (Histogram, DiscreteMeasure)):
        points, weights = measure.atoms()
    else:
        points, weights = measure
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    weights = np.asarray(weights, dtype=float).ravel()
    if len(points) != len(weights):
        raise ValueError("points and weights differ in length")
    if np.any(weights < 0):
        raise ValueError("negative mass")
    if abs(weights.sum() - 1.0) > _MASS_TOL:
        raise ValueError(f"measure is not normalized (total mass {weights.sum()!r})")
    return points, weights


def _pair(P, Q):
    if isinstance(P, Histogram) and isinstance(Q, Histogram) and P.grid != Q.grid:
        raise ValueError("histograms live on different grids")
    return _atoms(P), _atoms(Q)


def support_size(P, Q) -> int:
    """Number of atoms carrying mass on either side."""
    (_, a), (_, b) = _pair(P, Q)
    return int((a > 0).sum() + (b > 0).sum())


# transportation simplex


def _northwest_corner(a, b):
    m, n = len(a), len(b)
    a, b = a.copy(), b.copy()
    basis, flows = [], []
    i = j = 0
    while i < m and j < n:
        x = min(a[i], b[j])
        basis.append((i, j))
        flows.append(x)
        a[i] -= x
        b[j] -= x
        # advance exactly one index so the basis stays a spanning tree
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return basis, flows


class _Tree:
    """Basis tree over nodes ``0..m-1`` (rows) and ``m..m+n-1`` (columns)."""

    def __init__(self, m, n, basis, flows):
        self.m, self.n = m, n
        self.adj = [dict() for _ in range(m + n)]
        for (i, j), x in zip(basis, flows):
            self.add(i, j, x)

    def add(self, i, j, x):
        self.adj[i][self.m + j] = x
        self.adj[self.m + j][i] = x

    def remove(self, i, j):
        del self.adj[i][self.m + j]
        del self.adj[self.m + j][i]

    def set_flow(self, i, j, x):
        self.adj[i][self.m + j] = x
        self.adj[self.m + j][i] = x

    def flow(self, i, j):
        return self.adj[i][self.m + j]

    def orient(self, C):
        """Parents, depths and potentials with ``u_0 = 0`` and ``u_i + v_j = c_ij`` on the basis."""
        m = self.m
        N = m + self.n
        parent = np.full(N, -1)
        depth = np.zeros(N, dtype=np.int64)
        pot = np.zeros(N)
        seen = np.zeros(N, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            node = queue.popleft()
            for nb in self.adj[node]:
                if seen[nb]:
                    continue
                seen[nb] = True
                parent[nb] = node
                depth[nb] = depth[node] + 1
                c = C[node, nb - m] if node < m else C[nb, node - m]
                pot[nb] = c - pot[node]
                queue.append(nb)
        if not seen.all():
            raise RuntimeError("basis is not a spanning tree")
        self.parent, self.depth = parent, depth
        return pot[:m], pot[m:]

    def path(self, s, t):
        """Tree path from node ``s`` to node ``t`` as a node list."""
        left, right = [s], [t]
        while s != t:
            if self.depth[s] >= self.depth[t]:
                s = self.parent[s]
                left.append(s)
            else:
                t = self.parent[t]
                right.append(t)
        return left + right[-2::-1]


def solve_transport(a, b, C, max_pivots: int = 200_000, tol: float = 1e-12) -> TransportPlan:
    """Exact optimal coupling of ``a`` and ``b`` under cost ``C``.

    Entering cells are chosen by most negative reduced cost. After a run of
    degenerate pivots the rule switches to smallest index for both entering and
    leaving cells, which rules out cycling. Optimality is certified by the
    duality gap of the final potentials.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    rows = np.flatnonzero(a > 0)
    cols = np.flatnonzero(b > 0)
    coupling = np.zeros(C.shape)
    if len(rows) == 0 or len(cols) == 0:
        raise ValueError("empty marginal")
    a_s, b_s = a[rows], b[cols]
    b_s = b_s * (a_s.sum() / b_s.sum())
    Cs = C[np.ix_(rows, cols)]
    m, n = Cs.shape
    scale = max(float(np.abs(Cs).max()), 1.0)

    basis, flows = _northwest_corner(a_s, b_s)
    tree = _Tree(m, n, basis, flows)
    pivots = 0
    degenerate_run = 0
    while True:
        u, v = tree.orient(Cs)
        reduced = Cs - u[:, None] - v[None, :]
        if reduced.min() >= -tol * scale:
            break
        if pivots >= max_pivots:
            raise OptimalityError(f"no optimum after {pivots} pivots")
        bland = degenerate_run > 50
        if bland:
            i, j = np.unravel_index(np.flatnonzero(reduced.ravel() < -tol * scale)[0], reduced.shape)
        else:
            i, j = np.unravel_index(np.argmin(reduced), reduced.shape)
        i, j = int(i), int(j)

        # cycle: entering edge (i, j) then the tree path from column j back to row i
        nodes = tree.path(m + j, i)
        edges = []
        for k in range(len(nodes) - 1):
            x, y = nodes[k], nodes[k + 1]
            edges.append((x, y - m) if x < m else (y, x - m))
        minus = edges[0::2]
        plus = edges[1::2]
        theta = min(tree.flow(r, c) for r, c in minus)
        candidates = [e for e in minus if tree.flow(*e) <= theta]
        leave = min(candidates) if bland else candidates[0]
        for e in minus:
            tree.set_flow(*e, tree.flow(*e) - theta)
        for e in plus:
            tree.set_flow(*e, tree.flow(*e) + theta)
        tree.remove(*leave)
        tree.add(i, j, theta)
        pivots += 1
        degenerate_run = degenerate_run + 1 if theta <= 0 else 0

    R = np.zeros((m, n))
    for r in range(m):
        for node, x in tree.adj[r].items():
            R[r, node - m] = x
    np.clip(R, 0.0, None, out=R)
    primal = float((Cs * R).sum())
    # shift v onto the dual feasible region so a.u + b.v is a true lower bound
    v_feasible = v + np.minimum(reduced.min(axis=0), 0.0)
    gap = primal - float(a_s @ u + b_s @ v_feasible)
    coupling[np.ix_(rows, cols)] = R
    if abs(gap) > 1e-7 * scale:
        raise OptimalityError(f"duality gap {gap:.3e} exceeds tolerance")
    return TransportPlan(coupling, primal, gap, pivots)


def _same_measure(X, a, Y, b) -> bool:
    return X.shape == Y.shape and np.array_equal(X, Y) and np.allclose(a, b, rtol=0, atol=1e-15)


def wasserstein_exact(P, Q, p: float = 2.0) -> tuple[float, TransportPlan]:
    """``W_p(P, Q)`` and the optimal plan; the value is the p-th root of the optimal cost."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    (X, a), (Y, b) = _pair(P, Q)
    if _same_measure(X, a, Y, b):
        plan = TransportPlan(np.diag(a), 0.0)
        return 0.0, plan
    C = cost_matrix(X, Y, p)
    plan = solve_transport(a, b, C)
    return max(plan.cost, 0.0) ** (1.0 / p), plan


# Sinkhorn


@dataclass(frozen=True)
class SinkhornResult:
    value: float
    plan: np.ndarray
    marginal_violation: float
    converged: bool
    reg: float
    history: tuple = ()


def _round_to_marginals(R, a, b):
    """Nearest feasible coupling in the sense of Altschuler, Weed and Rigollet."""
    R = R * np.minimum(1.0, a / np.maximum(R.sum(axis=1), 1e-300))[:, None]
    R = R * np.minimum(1.0, b / np.maximum(R.sum(axis=0), 1e-300))[None, :]
    ea = a - R.sum(axis=1)
    eb = b - R.sum(axis=0)
    total = ea.sum()
    if total > 0:
        R = R + np.outer(ea, eb) / total
    return R


def sinkhorn_plan(
    P,
    Q,
    p: float = 2.0,
    reg: float = None,
    max_iter: int = 10_000,
    tol: float = 1e-6,
    levels: int = 6,
) -> SinkhornResult:
    """Annealed log-domain Sinkhorn.

    ``reg`` is the starting regularization (default a tenth of the median cost)
    and is halved ``levels - 1`` times with warm-started potentials. Each level
    stops when the row-marginal L1 violation drops below ``tol``. The reported
    value is the cost of the plan rounded onto the exact marginals, to the
    power ``1/p``.
    """
    if reg is not None and not reg > 0:
        raise ValueError(f"reg must be > 0, got {reg}")
    if levels < 1 or max_iter < 1:
        raise ValueError("levels and max_iter must be >= 1")
    (X, a_full), (Y, b_full) = _pair(P, Q)
    rows = np.flatnonzero(a_full > 0)
    cols = np.flatnonzero(b_full > 0)
    a, b = a_full[rows], b_full[cols]
    C = cost_matrix(X[rows], Y[cols], p)
    full = np.zeros((len(a_full), len(b_full)))
    if not C.any():
        full[np.ix_(rows, cols)] = np.outer(a, b)
        return SinkhornResult(0.0, full, 0.0, True, 0.0, (0.0,))
    if reg is None:
        reg = 0.1 * float(np.median(C))
        if reg <= 0:
            reg = 0.1 * float(C[C > 0].min())

    log_a, log_b = np.log(a), np.log(b)
    f = np.zeros(len(a))
    g = np.zeros(len(b))
    history = []
    violation = np.inf
    converged = False
    for level in range(levels):
        eps = reg / 2**level
        converged = False
        for it in range(1, max_iter + 1):
            f = eps * (log_a - logsumexp((g[None, :] - C) / eps, axis=1))
            g = eps * (log_b - logsumexp((f[:, None] - C) / eps, axis=0))
            if it % 10 and it != max_iter:
                continue
            R = np.exp((f[:, None] + g[None, :] - C) / eps)
            violation = float(np.abs(R.sum(axis=1) - a).sum())
            if violation < tol:
                converged = True
                break
        rounded = _round_to_marginals(R, a, b)
        history.append(float((C * rounded).sum()))
    if not converged:
        warnings.warn(f"Sinkhorn stopped with marginal violation {violation:.3e}", RuntimeWarning, stacklevel=2)
    full[np.ix_(rows, cols)] = rounded
    value = max(history[-1], 0.0) ** (1.0 / p)
    return SinkhornResult(value, full, violation, converged, eps, tuple(history))


def sinkhorn(P, Q, p: float = 2.0, reg: float = None, max_iter: int = 10_000, tol: float = 1e-6) -> float:
    return sinkhorn_plan(P, Q, p, reg, max_iter, tol).value


# one-dimensional and sliced


def wasserstein_1d(u_positions, u_weights, v_positions, v_weights, p: float = 1.0) -> float:
    """``W_p`` on the line through the quantile coupling."""
    x = np.asarray(u_positions, dtype=float).ravel()
    y = np.asarray(v_positions, dtype=float).ravel()
    wu = np.asarray(u_weights, dtype=float).ravel()
    wv = np.asarray(v_weights, dtype=float).ravel()
    for w, pos in ((wu, x), (wv, y)):
        if len(w) != len(pos):
            raise ValueError("positions and weights differ in length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > _MASS_TOL:
            raise ValueError("weights must be non-negative and sum to 1")
    return _w1d(x, wu, y, wv, p)


def _w1d(x, wu, y, wv, p):
    ox, oy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    x, wu, y, wv = x[ox], wu[ox], y[oy], wv[oy]
    cu = np.cumsum(wu)
    cv = np.cumsum(wv)
    cu[-1] = cv[-1] = 1.0
    levels = np.union1d(cu, cv)
    widths = np.diff(np.concatenate([[0.0], levels]))
    # quantile at the left-open interval (level_{k-1}, level_k]
    mids = levels - widths / 2
    qx = x[np.minimum(np.searchsorted(cu, mids), len(x) - 1)]
    qy = y[np.minimum(np.searchsorted(cv, mids), len(y) - 1)]
    gap = np.abs(qx - qy)
    if p == 1:
        return float(np.dot(widths, gap))
    return float(np.dot(widths, gap**p)) ** (1.0 / p)


def sliced_wasserstein(P, Q, n_angles: int = 64, p: float = 1.0) -> float:
    """Mean over angles ``k pi / n_angles`` of ``W_p^p`` between projections, to the power ``1/p``."""
    if n_angles < 1:
        raise ValueError(f"n_angles must be >= 1, got {n_angles}")
    (X, a), (Y, b) = _pair(P, Q)
    theta = np.arange(n_angles) * (math.pi / n_angles)
    dirs = np.column_stack([np.cos(theta), np.sin(theta)])
    px, py = X @ dirs.T, Y @ dirs.T
    vals = np.array([_w1d(px[:, k], a, py[:, k], b, p) ** p for k in range(n_angles)])
    # sorted reduction keeps the mean independent of evaluation order
    mean = float(np.sort(vals).sum() / n_angles)
    return mean if p == 1 else mean ** (1.0 / p)
