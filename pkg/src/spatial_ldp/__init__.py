"""Planar local differential privacy on grids: disk-area and exponential-ring
mechanisms, EM reconstruction, Wasserstein metrics and privacy accounting."""

from .data import BBox, DatasetKind, DatasetSpec, bucketize, generate, load_points_csv, write_points_csv
from .estimation import EmConfig, EmResult, NoisyCounts, PipelineResult, collect, em_estimate, em_fit, run_pipeline
from .geometry import (
    CellClass,
    DiskPartition,
    GridSpec,
    build_disk_partition,
    classify_cell,
    closed_form_check,
    output_domain,
    pure_low_area,
    shrunken_area,
)
from .histogram import DiscreteMeasure, Histogram, read_histogram_csv, write_histogram_csv
from .mechanisms import (
    GridAreaResponse,
    Kernel,
    Mechanism,
    MechanismSpec,
    build_kernel,
    cell_radius,
    dam_params,
    fan_ring_table,
    grid_area_response,
    huem_q,
    optimal_b,
    sample_continuous,
)
from .privacy import PrivacyReport, certify_ldp, local_privacy, privacy_report
from .transport import TransportPlan, sinkhorn, sliced_wasserstein, wasserstein_1d, wasserstein_exact

__version__ = "0.1.0"
