import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spatial_ldp.geometry import GridSpec
from spatial_ldp.mechanisms import Kernel, build_kernel
from spatial_ldp.privacy import NonPrivateKernel, certify_ldp, local_privacy, privacy_report, worst_column


def two_cell(p):
    return Kernel.from_matrix([[p, 1 - p], [1 - p, p]])


@pytest.mark.parametrize("kind", ["dam", "huem"])
@pytest.mark.parametrize("eps", [0.7, 3.5])
def test_spatial_kernels_hit_the_budget(kind, eps):
    K = build_kernel(kind, GridSpec.from_cells(4), 2, eps)
    assert certify_ldp(K) == pytest.approx(eps, abs=1e-12)


def test_grr_two_by_two():
    K = build_kernel("grr", GridSpec.from_cells(2), None, math.log(3))
    assert certify_ldp(K) == pytest.approx(math.log(3), abs=1e-12)


def test_uniform_kernel_is_free():
    assert certify_ldp(Kernel.from_matrix(np.full((3, 4), 0.25))) == 0.0


def test_zero_entry_is_non_private():
    K = Kernel.from_matrix([[1.0, 0.0], [0.5, 0.5]])
    assert math.isinf(certify_ldp(K))
    assert worst_column(K) == 1
    with pytest.raises(NonPrivateKernel) as err:
        certify_ldp(K, strict=True)
    assert err.value.column == 1


def test_identity_has_zero_local_privacy():
    assert local_privacy(Kernel.from_matrix(np.eye(3))) == 0.0


def test_uniform_two_cell_local_privacy():
    assert local_privacy(two_cell(0.5)) == pytest.approx(0.5)


@given(st.floats(0.0, 1.0))
def test_two_cell_local_privacy_closed_form(p):
    assert local_privacy(two_cell(p)) == pytest.approx(2 * p * (1 - p), abs=1e-12)


def test_local_privacy_peaks_at_half():
    ps = np.linspace(0, 1, 101)
    lp = [local_privacy(two_cell(p)) for p in ps]
    assert ps[int(np.argmax(lp))] == pytest.approx(0.5)
    assert lp[0] == lp[-1] == 0.0


def test_local_privacy_scales_with_cell_side():
    small = GridSpec.from_cells(3, 3.0)
    big = GridSpec.from_cells(3, 6.0)
    K_small = build_kernel("dam", small, 1, 2.0)
    K_big = build_kernel("dam", big, 1, 2.0)
    assert local_privacy(K_big) == pytest.approx(2 * local_privacy(K_small), rel=1e-12)


def test_local_privacy_matches_explicit_sum():
    rng = np.random.default_rng(0)
    P = rng.dirichlet(np.ones(5), size=4)
    K = Kernel.from_matrix(P)
    pts = K.input_cells.astype(float)
    n = len(P)
    total = 0.0
    for o in range(P.shape[1]):
        col = P[:, o]
        for i in range(n):
            for j in range(n):
                total += col[i] * col[j] * np.linalg.norm(pts[i] - pts[j]) / (n * col.sum())
    assert local_privacy(K) == pytest.approx(total, rel=1e-12)


def test_more_budget_less_local_privacy():
    grid = GridSpec.from_cells(5)
    lo = privacy_report(build_kernel("dam", grid, 1, 1.0))
    hi = privacy_report(build_kernel("dam", grid, 1, 5.0))
    assert hi.local_privacy < lo.local_privacy
    assert hi.certified_epsilon == pytest.approx(5.0)
