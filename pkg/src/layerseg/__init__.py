"""Pseudo-real-time graph-search segmentation of retinal layer boundaries
in OCT B-scans, with en-face projection analytics, batch scheduling and a
latency benchmark harness."""

from .config import DEFAULT_CONFIG, RunConfig
from .enface import (
    Volume,
    enface_volume,
    enface_volume_octa,
    enface_volume_octa_static,
    enface_volume_static,
    merit,
    mip_between,
    speckle_variance,
)
from .errors import (
    DimensionMismatch,
    InvalidBand,
    LayersegError,
    MissingBoundary,
    SearchRegionDisconnected,
    VolumeFormatError,
)
from .graph import (
    DARK_TO_LIGHT,
    LIGHT_TO_DARK,
    W_MIN,
    GradientField,
    LayerPath,
    WeightGraph,
    apply_roi,
    build_weights,
    extract_boundary,
    shortest_path,
    vertical_gradient,
)
from .pipeline import (
    BatchPlan,
    BatchReport,
    BenchmarkTable,
    PhantomSpec,
    benchmark,
    generate_phantom,
    run_batched,
)
from .preprocess import (
    CropWindow,
    PreprocessedScan,
    crop,
    crop_threshold,
    preprocess,
    row_average,
)
from .segmentation import (
    ANATOMICAL_ORDER,
    BoundaryName,
    LayerBoundary,
    SegmentationResult,
    assign_ilm_rpe,
    dependency_closure,
    finalize,
    segment,
    segment_inner,
    segment_precise,
    segment_rough,
)

__version__ = "0.1.0"
