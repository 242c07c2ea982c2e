"""Iterative six-boundary segmentation of a single B-scan.

The boundaries are found in order of prominence.  The two hyper-reflective
boundaries (ILM and RPE) are first located coarsely on the rough image and
then refined on the resized image inside a narrow band around each coarse
curve.  Each of the four inner boundaries is then searched strictly between
two previously segmented bounding curves:

    boundary    upper bound   lower bound   polarity
    INL/OPL     ILM           RPE           dark-to-light
    NFL/GCL     ILM           INL/OPL       light-to-dark
    IPL/INL     NFL/GCL       INL/OPL       light-to-dark
    OPL/ONL     INL/OPL       RPE           light-to-dark

Requesting a boundary implicitly segments everything it depends on.  Final
curves are interpolated back to the original image width, smoothed with a
centered moving average, scaled to original depth coordinates and offset by
the crop window.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_CONFIG, RunConfig
from .errors import SearchRegionDisconnected
from .graph import (
    DARK_TO_LIGHT,
    LIGHT_TO_DARK,
    WeightGraph,
    apply_roi,
    build_weights,
    extract_boundary,
    roi_from_image_mask,
    shortest_path,
    vertical_gradient,
)
from .preprocess import CropWindow, PreprocessedScan, preprocess


class BoundaryName(enum.Enum):
    ILM = "ILM"
    NFL_GCL = "NFL_GCL"
    IPL_INL = "IPL_INL"
    INL_OPL = "INL_OPL"
    OPL_ONL = "OPL_ONL"
    RPE = "RPE"


# top-to-bottom anatomical order of the boundaries
ANATOMICAL_ORDER = (
    BoundaryName.ILM,
    BoundaryName.NFL_GCL,
    BoundaryName.IPL_INL,
    BoundaryName.INL_OPL,
    BoundaryName.OPL_ONL,
    BoundaryName.RPE,
)

# (upper bound, lower bound, gradient polarity) for each inner boundary
INNER_TABLE = {
    BoundaryName.INL_OPL: (BoundaryName.ILM, BoundaryName.RPE, DARK_TO_LIGHT),
    BoundaryName.NFL_GCL: (BoundaryName.ILM, BoundaryName.INL_OPL, LIGHT_TO_DARK),
    BoundaryName.IPL_INL: (BoundaryName.NFL_GCL, BoundaryName.INL_OPL, LIGHT_TO_DARK),
    BoundaryName.OPL_ONL: (BoundaryName.INL_OPL, BoundaryName.RPE, LIGHT_TO_DARK),
}

# execution order of the inner searches
INNER_ORDER = (
    BoundaryName.INL_OPL,
    BoundaryName.NFL_GCL,
    BoundaryName.IPL_INL,
    BoundaryName.OPL_ONL,
)

ROUGH_STAGE = "Rough"

STAGE_LABELS = {
    BoundaryName.ILM: "ILM",
    BoundaryName.RPE: "RPE",
    BoundaryName.INL_OPL: "INL/OPL",
    BoundaryName.NFL_GCL: "NFL/GCL",
    BoundaryName.IPL_INL: "IPL/INL",
    BoundaryName.OPL_ONL: "OPL/ONL",
}

# Table-2-style stage order: rough pass, precise ILM/RPE, then inner layers
STAGE_ORDER = (ROUGH_STAGE, "ILM", "RPE", "INL/OPL", "NFL/GCL", "IPL/INL", "OPL/ONL")


@dataclass(frozen=True)
class LayerBoundary:
    """One named boundary as per-column sub-pixel depths in original image
    coordinates."""

    name: BoundaryName
    depths: np.ndarray


@dataclass(frozen=True)
class SegmentationResult:
    boundaries: dict[BoundaryName, LayerBoundary]
    stage_ms: dict[str, float]
    crop: CropWindow
    implicit: frozenset[BoundaryName]
    carried_over: frozenset[BoundaryName]
    resized_curves: dict[BoundaryName, np.ndarray]  # pre-smoothing, resized coords
    original_shape: tuple[int, int]

    @property
    def total_ms(self) -> float:
        return sum(self.stage_ms.values())


def dependency_closure(layers) -> frozenset[BoundaryName]:
    """Requested boundaries plus every bound they transitively require."""
    closure: set[BoundaryName] = set()
    stack = list(layers)
    if not stack:
        raise ValueError("at least one boundary must be requested")
    while stack:
        b = stack.pop()
        if b in closure:
            continue
        closure.add(b)
        if b in INNER_TABLE:
            upper, lower, _ = INNER_TABLE[b]
            stack.append(upper)
            stack.append(lower)
    return frozenset(closure)


def round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def upscale_curve(curve: np.ndarray, target_width: int) -> np.ndarray:
    """Interpolate a curve from a half-resolution image onto an image of
    ``target_width`` columns, doubling both coordinates."""
    curve = np.asarray(curve, dtype=np.float64)
    positions = 2.0 * np.arange(curve.size)
    return np.interp(np.arange(target_width), positions, curve * 2.0)


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with replicated ends; window must be odd."""
    if window == 1:
        return np.asarray(values, dtype=np.float64).copy()
    half = window // 2
    padded = np.pad(np.asarray(values, dtype=np.float64), half, mode="edge")
    kernel = np.full(window, 1.0 / window)
    return np.convolve(padded, kernel, mode="valid")


class _FrameGraphs:
    """Lazy per-polarity weight graphs of one resized image."""

    def __init__(self, resized: np.ndarray, config: RunConfig):
        self._resized = resized
        self._config = config
        self._graphs: dict[str, WeightGraph] = {}

    def get(self, polarity: str) -> WeightGraph:
        if polarity not in self._graphs:
            grad = vertical_gradient(self._resized, polarity)
            self._graphs[polarity] = build_weights(grad, form=self._config.weight_form)
        return self._graphs[polarity]


def segment_rough(pre: PreprocessedScan, config: RunConfig = DEFAULT_CONFIG,
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Coarse two-layer search on the rough image.

    The search region is the set of pixels brighter than the rough-image
    mean.  After the first path is found its pixels are removed from the
    region and the search repeats for the second layer.  Both curves are
    returned in rough-image coordinates, in discovery order.
    """
    rough = pre.rough
    height, width = rough.shape
    grad = vertical_gradient(rough, DARK_TO_LIGHT)
    graph = build_weights(grad, form=config.weight_form)
    roi = roi_from_image_mask(rough > rough.mean())
    path1 = shortest_path(apply_roi(graph, roi))
    first = extract_boundary(path1, width)
    roi2 = roi.copy()
    roi2[path1.rows, path1.cols] = False
    roi2[:, 0] = True
    roi2[:, -1] = True
    path2 = shortest_path(apply_roi(graph, roi2))
    second = extract_boundary(path2, width)
    return first, second


def assign_ilm_rpe(curve_a: np.ndarray, curve_b: np.ndarray,
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Label the shallower curve (smaller mean depth) ILM and the other RPE.

    An exact tie labels the first curve ILM.
    """
    if curve_a.shape != curve_b.shape:
        raise ValueError("curves must have equal width")
    if curve_b.mean() < curve_a.mean():
        return curve_b, curve_a
    return curve_a, curve_b


def _band_roi(height: int, width: int, center: np.ndarray, half_band: float) -> np.ndarray:
    lo = round_half_up(center - half_band)
    hi = round_half_up(center + half_band)
    rows = np.arange(height, dtype=np.float64)[:, None]
    return roi_from_image_mask((rows >= lo[None, :]) & (rows <= hi[None, :]))


def segment_precise(pre: PreprocessedScan, rough_curve: np.ndarray,
                    which: BoundaryName, config: RunConfig = DEFAULT_CONFIG,
                    graphs: _FrameGraphs | None = None) -> np.ndarray:
    """Refine a rough ILM or RPE curve on the resized image.

    The rough curve is upscaled to resized coordinates and the search is
    confined to ``precise_half_band`` rows on each side of it.
    """
    if which not in (BoundaryName.ILM, BoundaryName.RPE):
        raise ValueError(f"precise search applies to ILM or RPE, not {which}")
    resized = pre.resized
    height, width = resized.shape
    if graphs is None:
        graphs = _FrameGraphs(resized, config)
    center = upscale_curve(rough_curve, width)
    roi = _band_roi(height, width, center, config.precise_half_band)
    path = shortest_path(apply_roi(graphs.get(DARK_TO_LIGHT), roi))
    return extract_boundary(path, width)


def segment_inner(pre: PreprocessedScan, done: dict[BoundaryName, np.ndarray],
                  target: BoundaryName, config: RunConfig = DEFAULT_CONFIG,
                  graphs: _FrameGraphs | None = None) -> np.ndarray:
    """Segment one inner boundary between its two bounding curves.

    ``done`` maps already-segmented boundaries to resized-coordinate curves.
    The search region lies strictly between the bounds, shrunk by
    ``inner_margin`` rows on each side.
    """
    if target not in INNER_TABLE:
        raise ValueError(f"{target} is not an inner boundary")
    upper_name, lower_name, polarity = INNER_TABLE[target]
    if upper_name not in done or lower_name not in done:
        raise ValueError(
            f"{STAGE_LABELS[target]} requires {STAGE_LABELS[upper_name]} and "
            f"{STAGE_LABELS[lower_name]} to be segmented first")
    resized = pre.resized
    height, width = resized.shape
    if graphs is None:
        graphs = _FrameGraphs(resized, config)
    upper = done[upper_name]
    lower = done[lower_name]
    rows = np.arange(height, dtype=np.float64)[:, None]
    mask = (rows > upper[None, :] + config.inner_margin) & \
           (rows < lower[None, :] - config.inner_margin)
    path = shortest_path(apply_roi(graphs.get(polarity), roi_from_image_mask(mask)))
    return extract_boundary(path, width)


def finalize(resized_curves: dict[BoundaryName, np.ndarray], crop: CropWindow,
             original_shape: tuple[int, int], stage_ms: dict[str, float],
             config: RunConfig = DEFAULT_CONFIG,
             implicit: frozenset[BoundaryName] = frozenset(),
             carried_over: frozenset[BoundaryName] = frozenset()) -> SegmentationResult:
    """Map resized-coordinate curves back to the original image.

    Each curve is linearly interpolated to the original width, smoothed with
    a centered moving average, scaled by the x2 depth factor, offset by the
    crop begin row, and clamped to [0, height).
    """
    height, width = original_shape
    boundaries: dict[BoundaryName, LayerBoundary] = {}
    upper_limit = np.nextafter(float(height), 0.0)
    for name, curve in resized_curves.items():
        positions = 2.0 * np.arange(curve.size)
        lateral = np.interp(np.arange(width), positions, curve)
        smoothed = moving_average(lateral, config.smooth_window)
        depths = np.clip(smoothed * 2.0 + crop.begin_row, 0.0, upper_limit)
        boundaries[name] = LayerBoundary(name=name, depths=depths)
    return SegmentationResult(
        boundaries=boundaries,
        stage_ms=dict(stage_ms),
        crop=crop,
        implicit=implicit,
        carried_over=carried_over,
        resized_curves={k: v.copy() for k, v in resized_curves.items()},
        original_shape=original_shape,
    )


def _carry_curve(prior: SegmentationResult, name: BoundaryName,
                 crop: CropWindow, resized_width: int) -> np.ndarray:
    """Previous-frame boundary converted into current resized coordinates."""
    depths = prior.boundaries[name].depths
    cols = np.minimum(2 * np.arange(resized_width), depths.size - 1)
    return (depths[cols] - crop.begin_row) / 2.0


def _can_carry(prior: SegmentationResult | None, name: BoundaryName,
               original_shape: tuple[int, int]) -> bool:
    return (prior is not None and prior.original_shape == original_shape
            and name in prior.boundaries)


def segment_preprocessed(pre: PreprocessedScan, layers,
                         config: RunConfig = DEFAULT_CONFIG,
                         prior: SegmentationResult | None = None,
                         preprocess_ms: float = 0.0) -> SegmentationResult:
    """Segmentation driver operating on an already-preprocessed scan.

    ``preprocess_ms`` is folded into the rough stage timing so accumulated
    stage times cover the whole pipeline regardless of where preprocessing
    ran.  When a stage's search region is disconnected and ``prior`` holds a
    result for the same scan geometry, the previous boundary is carried over
    and flagged instead of failing the frame.
    """
    closure = dependency_closure(layers)
    implicit = closure - frozenset(layers)
    original_shape = (pre.original_height, pre.original_width)
    graphs = _FrameGraphs(pre.resized, config)
    stage_ms: dict[str, float] = {}
    resized_curves: dict[BoundaryName, np.ndarray] = {}
    carried: set[BoundaryName] = set()

    t0 = time.perf_counter()
    rough_curves: dict[BoundaryName, np.ndarray] | None = None
    try:
        first, second = segment_rough(pre, config)
        rough_ilm, rough_rpe = assign_ilm_rpe(first, second)
        rough_curves = {BoundaryName.ILM: rough_ilm, BoundaryName.RPE: rough_rpe}
    except SearchRegionDisconnected as err:
        if not (_can_carry(prior, BoundaryName.ILM, original_shape)
                and _can_carry(prior, BoundaryName.RPE, original_shape)):
            err.stage = ROUGH_STAGE
            raise
    stage_ms[ROUGH_STAGE] = preprocess_ms + (time.perf_counter() - t0) * 1e3

    for name in (BoundaryName.ILM, BoundaryName.RPE):
        if name not in closure:
            continue
        t0 = time.perf_counter()
        if rough_curves is None:  # rough pass failed; fall back to the prior
            resized_curves[name] = _carry_curve(prior, name, pre.crop,
                                                pre.resized.shape[1])
            carried.add(name)
        else:
            try:
                resized_curves[name] = segment_precise(
                    pre, rough_curves[name], name, config, graphs)
            except SearchRegionDisconnected as err:
                if not _can_carry(prior, name, original_shape):
                    err.stage = STAGE_LABELS[name]
                    raise
                resized_curves[name] = _carry_curve(prior, name, pre.crop,
                                                    pre.resized.shape[1])
                carried.add(name)
        stage_ms[STAGE_LABELS[name]] = (time.perf_counter() - t0) * 1e3

    for name in INNER_ORDER:
        if name not in closure:
            continue
        t0 = time.perf_counter()
        try:
            resized_curves[name] = segment_inner(pre, resized_curves, name,
                                                 config, graphs)
        except SearchRegionDisconnected as err:
            if not _can_carry(prior, name, original_shape):
                err.stage = STAGE_LABELS[name]
                raise
            resized_curves[name] = _carry_curve(prior, name, pre.crop,
                                                pre.resized.shape[1])
            carried.add(name)
        stage_ms[STAGE_LABELS[name]] = (time.perf_counter() - t0) * 1e3

    return finalize(resized_curves, pre.crop, original_shape, stage_ms, config,
                    implicit=implicit, carried_over=frozenset(carried))


def segment(scan: np.ndarray, layers, config: RunConfig = DEFAULT_CONFIG,
            prior: SegmentationResult | None = None) -> SegmentationResult:
    """Segment the requested boundaries of one B-scan.

    ``layers`` is any iterable of BoundaryName; bounds they depend on are
    segmented automatically and reported in ``result.implicit``.  Per-stage
    wall times are recorded in Table-order under ``result.stage_ms``.
    """
    t0 = time.perf_counter()
    pre = preprocess(scan, config)
    pre_ms = (time.perf_counter() - t0) * 1e3
    return segment_preprocessed(pre, layers, config, prior=prior,
                                preprocess_ms=pre_ms)
