"""Seeded end-to-end runs and one-axis sweeps."""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .data import BBox, DatasetSpec, generate
from .estimation import EmConfig, run_pipeline
from .histogram import Histogram
from .mechanisms import Mechanism, MechanismSpec, cell_radius, optimal_b
from .transport import sinkhorn, sliced_wasserstein, wasserstein_exact

__all__ = [
    "Metric",
    "ConfigError",
    "ExperimentConfig",
    "EXACT_SUPPORT_CAP",
    "distance",
    "run_experiment",
    "run_sweep",
    "write_sweep",
    "spearman_rho",
]

EXACT_SUPPORT_CAP = 500
SWEEP_AXES = ("epsilon", "d", "b", "b_mult", "mechanism")


class ConfigError(ValueError):
    """Invalid or unsupported experiment configuration."""


class Metric(str, enum.Enum):
    EXACT_W2 = "exact-w2"
    SINKHORN_W2 = "sinkhorn-w2"
    SLICED_W1 = "sliced-w1"


@dataclass(frozen=True)
class ExperimentConfig:
    """One operating point.

    The disk radius is ``b`` cells when given, otherwise ``b_mult`` times the
    loss-minimizing radius for a ``d``-cell side; either way it is floored to a
    whole number of cells and kept at least 1.
    """

    dataset: DatasetSpec
    mechanism: Mechanism = Mechanism.DAM
    epsilon: float = 3.5
    d: int = 5
    b: float = None
    b_mult: float = 1.0
    seeds: tuple = (0,)
    metric: Metric = Metric.EXACT_W2
    em: EmConfig = field(default_factory=EmConfig)
    n_angles: int = 256

    def __post_init__(self):
        try:
            object.__setattr__(self, "mechanism", Mechanism(self.mechanism))
            object.__setattr__(self, "metric", Metric(self.metric))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise ConfigError(f"epsilon must be positive and finite, got {self.epsilon}")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"d must be a positive integer, got {self.d}")
        if self.b is not None and not self.b > 0:
            raise ConfigError(f"b must be positive, got {self.b}")
        if self.b is None and not self.b_mult > 0:
            raise ConfigError(f"b_mult must be positive, got {self.b_mult}")
        if self.metric is Metric.EXACT_W2 and 2 * self.d * self.d > EXACT_SUPPORT_CAP:
            raise ConfigError(
                f"exact-w2 on a {self.d}x{self.d} grid needs {2 * self.d * self.d} support cells "
                f"(cap {EXACT_SUPPORT_CAP}); use --metric sinkhorn-w2"
            )

    @property
    def b_cells(self) -> float:
        return float(self.b) if self.b is not None else self.b_mult * optimal_b(self.epsilon, self.d)

    @property
    def b_hat(self) -> int:
        return cell_radius(self.b_cells)

    def mechanism_spec(self) -> MechanismSpec:
        b_hat = None if self.mechanism is Mechanism.GRR else self.b_hat
        return MechanismSpec(self.mechanism, self.epsilon, b_hat)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        ds = dataclasses.asdict(self.dataset)
        ds["kind"] = self.dataset.kind.value
        ds.pop("extra", None)
        return {
            "dataset": ds,
            "mechanism": self.mechanism.value,
            "epsilon": self.epsilon,
            "d": self.d,
            "b": self.b,
            "b_mult": None if self.b is not None else self.b_mult,
            "b_hat": None if self.mechanism is Mechanism.GRR else self.b_hat,
            "seeds": list(self.seeds),
            "metric": self.metric.value,
            "em": {
                "max_iterations": self.em.max_iterations,
                "tolerance": self.em.tolerance,
                "smoothing": self.em.smoothing.value,
                "acceleration": self.em.acceleration.value,
            },
            "n_angles": self.n_angles,
        }


def distance(truth: Histogram, estimate: Histogram, metric, n_angles: int = 256) -> float:
    metric = Metric(metric)
    if metric is Metric.EXACT_W2:
        if 2 * truth.grid.n_cells > EXACT_SUPPORT_CAP:
            raise ConfigError(f"exact-w2 refused above {EXACT_SUPPORT_CAP} support cells; use sinkhorn-w2")
        return wasserstein_exact(truth, estimate, 2)[0]
    if metric is Metric.SINKHORN_W2:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return sinkhorn(truth, estimate, 2)
    return sliced_wasserstein(truth, estimate, n_angles, 1)


def _points_and_bbox(spec: DatasetSpec, seed: int):
    points = generate(spec, np.random.default_rng([seed, 0]))
    bbox = spec.default_bbox() or BBox.square_around(points)
    return points, bbox


def run_seed(config: ExperimentConfig, seed: int) -> dict:
    points, bbox = _points_and_bbox(config.dataset, seed)
    grid = bbox.grid(config.d)
    result = run_pipeline(points, grid, config.mechanism_spec(), config.em, np.random.default_rng([seed, 1]), bbox)
    w = distance(result.truth, result.estimate, config.metric, config.n_angles)
    return {"seed": seed, "distance": w, **result.diagnostics}


def _summary(values) -> dict:
    v = np.asarray(values, dtype=float)
    q1, q3 = np.percentile(v, [25, 75])
    return {"median": float(np.median(v)), "mean": float(v.mean()), "iqr": float(q3 - q1)}


def run_experiment(config: ExperimentConfig) -> dict:
    """Pipeline once per seed; returns a JSON-ready record with the full configuration."""
    rows = [run_seed(config, s) for s in config.seeds]
    return {"config": config.to_dict(), "runs": rows, **_summary([r["distance"] for r in rows])}


def run_sweep(config: ExperimentConfig, axis: str, values) -> list[dict]:
    """Run ``config`` with ``axis`` set to each of ``values``; one record per value."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"cannot sweep {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ConfigError("empty sweep list")
    records = []
    for value in values:
        changes = {axis: value}
        if axis == "b_mult":
            changes["b"] = None
        if axis == "d":
            changes["d"] = int(value)
        record = run_experiment(config.replace(**changes))
        record["axis"] = axis
        record["value"] = value
        records.append(record)
    return records


def write_sweep(records: list[dict], out: Path) -> tuple[Path, Path]:
    """Write ``<out>.csv`` (one row per axis value and seed) and ``<out>.json`` manifest."""
    out = Path(out)
    csv_path = out.with_suffix(".csv")
    json_path = out.with_suffix(".json")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "mechanism", "epsilon", "d", "b_hat", "metric", "seed", "distance", "median", "iqr"])
        for rec in records:
            cfg = rec["config"]
            for run in rec["runs"]:
                writer.writerow(
                    [
                        rec["axis"],
                        rec["value"],
                        cfg["mechanism"],
                        cfg["epsilon"],
                        cfg["d"],
                        cfg["b_hat"],
                        cfg["metric"],
                        run["seed"],
                        repr(run["distance"]),
                        repr(rec["median"]),
                        repr(rec["iqr"]),
                    ]
                )
    manifest = {"csv": csv_path.name, "records": records}
    json_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return csv_path, json_path


def spearman_rho(x, y) -> float:
    return float(spearmanr(x, y).statistic)
