import math

import numpy as np
import pytest
from scipy import stats

from spatial_ldp.data import (
    BBox,
    CsvFormatError,
    DatasetSpec,
    bucketize,
    generate,
    load_points_csv,
    write_points_csv,
)
from spatial_ldp.geometry import GridSpec
from spatial_ldp.histogram import Histogram, read_histogram_csv, write_histogram_csv


def test_gaussian_inside_range():
    pts = generate(DatasetSpec("normal", n=300_000), np.random.default_rng(0))
    assert pts.shape == (300_000, 2)
    assert np.all((pts > -5) & (pts < 5))


def test_gaussian_correlation():
    n = 300_000
    pts = generate(DatasetSpec("normal", n=n, rho=0.5), np.random.default_rng(1))
    r = np.corrcoef(pts.T)[0, 1]
    # standard error of the sample correlation is about (1 - rho^2) / sqrt(n)
    assert abs(r - 0.5) < 3 * (1 - 0.25) / math.sqrt(n)


def test_szipf_marginals():
    pts = generate(DatasetSpec("szipf", n=100_000), np.random.default_rng(2))
    for k in range(2):
        assert stats.kstest(pts[:, k], lambda x: np.log2(1 + np.clip(x, 0, 1))).pvalue > 0.01


def test_mnormal_blocks():
    pts = generate(DatasetSpec("mnormal", n=30_001), np.random.default_rng(3))
    assert len(pts) == 30_001
    lo, hi = pts.min(), pts.max()
    assert lo < -4 and hi > 5  # translated centers widen the range
    centered = generate(DatasetSpec("mnormal", n=30_000, centered_mnormal=True), np.random.default_rng(3))
    assert abs(centered.mean()) < 0.05


def test_generators_reproducible():
    spec = DatasetSpec("mnormal", n=1000)
    a = generate(spec, np.random.default_rng(7))
    b = generate(spec, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_spec_validation():
    with pytest.raises(ValueError):
        DatasetSpec("normal", n=0)
    with pytest.raises(ValueError):
        DatasetSpec("normal", rho=1.0)
    with pytest.raises(ValueError):
        DatasetSpec("csv")
    with pytest.raises(ValueError):
        BBox(0, 0, 0, 1)


def test_csv_filters_box(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("0.1,0.2\n0.5,0.5\n0.9,0.3\n3.0,0.1\n")
    pts, dropped = load_points_csv(path, BBox(0, 0, 1, 1))
    assert len(pts) == 3 and dropped == 1


def test_csv_header_skipped(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("lat,lon\n40.1,-73.9\n41.0,-74.2\n")
    pts, dropped = load_points_csv(path)
    assert pts.tolist() == [[40.1, -73.9], [41.0, -74.2]] and dropped == 0


def test_csv_empty_after_filtering(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("5,5\n6,6\n")
    with pytest.raises(CsvFormatError, match="empty after filtering"):
        load_points_csv(path, BBox(0, 0, 1, 1))


def test_csv_malformed_line_number(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("x,y\n1,2\n3,abc\n")
    with pytest.raises(CsvFormatError, match="line 3"):
        load_points_csv(path)


def test_csv_round_trip(tmp_path):
    pts = np.random.default_rng(0).random((20, 2))
    write_points_csv(pts, tmp_path / "p.csv")
    back, _ = load_points_csv(tmp_path / "p.csv")
    assert np.array_equal(back, pts)


def test_bucketize_corners():
    box = BBox(-5, -5, 5, 5)
    grid = box.grid(4)
    _, cells = bucketize([[-5, -5], [5, 5], [0, 0], [-5, 4.99]], grid, box)
    assert cells.tolist() == [[0, 0], [3, 3], [2, 2], [0, 3]]


def test_bucketize_uniform_masses():
    grid = GridSpec.from_cells(4, 1.0)
    n = 1_000_000
    pts = np.random.default_rng(5).random((n, 2))
    hist, _ = bucketize(pts, grid)
    sigma = math.sqrt((1 / 16) * (15 / 16) / n)
    assert np.all(np.abs(hist.mass - 1 / 16) < 4 * sigma)
    assert hist.mass.sum() == pytest.approx(1.0)


def test_bucketize_rejects_non_square_box():
    with pytest.raises(ValueError):
        bucketize([[0.5, 0.5]], GridSpec.from_cells(2), BBox(0, 0, 1, 2))


def test_histogram_csv_round_trip(tmp_path):
    grid = GridSpec.from_cells(3)
    h = Histogram(grid, np.random.default_rng(1).dirichlet(np.ones(9)))
    write_histogram_csv(h, tmp_path / "h.csv")
    assert tmp_path.joinpath("h.csv").read_text().splitlines()[0] == "x_index,y_index,mass"
    back = read_histogram_csv(tmp_path / "h.csv", grid)
    assert np.array_equal(back.mass, h.mass)


def test_histogram_validation():
    grid = GridSpec.from_cells(2)
    with pytest.raises(ValueError):
        Histogram(grid, [0.5, 0.5, 0.5, -0.5])
    with pytest.raises(ValueError):
        Histogram(grid, [0.3, 0.3, 0.3, 0.3])
    with pytest.raises(ValueError):
        Histogram.from_counts(grid, [0, 0, 0, 0])
