"""En-face projections between boundaries, speckle-variance OCTA, and the
image-quality merit value used to drive sensorless adaptive optics.

An en-face image has one row per B-scan (or per B-scan pair for OCTA) and
one column per A-line.  Projections use maximum intensity between the two
bounding depths; a mean reduction is available for OCTA.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidBand, MissingBoundary
from .segmentation import BoundaryName, SegmentationResult

A_SCAN_RATE_HZ = 100_000

# An en-face image is a plain 2-D array: rows = frames (or frame pairs),
# columns = A-lines.
EnFaceImage = np.ndarray


@dataclass(frozen=True)
class Volume:
    """Ordered stack of same-sized B-scans, shaped (frames, height, width)."""

    frames: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.frames, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise ValueError(f"volume must be (frames, height, width), got {arr.shape}")
        object.__setattr__(self, "frames", arr)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def frame_period_s(self, a_scan_rate_hz: int = A_SCAN_RATE_HZ) -> float:
        """Seconds to acquire one B-scan: one A-scan per column."""
        return self.width / a_scan_rate_hz


def _rounded_band(scan: np.ndarray, top: np.ndarray, bottom: np.ndarray,
                  ) -> tuple[np.ndarray, np.ndarray]:
    height, width = scan.shape
    top = np.asarray(top, dtype=np.float64)
    bottom = np.asarray(bottom, dtype=np.float64)
    if top.shape != (width,) or bottom.shape != (width,):
        raise InvalidBand(f"band curves must have width {width}")
    t = np.clip(np.floor(top + 0.5), 0, height - 1).astype(np.int64)
    b = np.clip(np.floor(bottom + 0.5), 0, height - 1).astype(np.int64)
    bad = np.flatnonzero(t > b)
    if bad.size:
        raise InvalidBand(
            f"top boundary below bottom boundary in {bad.size} columns "
            f"(first at column {int(bad[0])})")
    return t, b


def mip_between(scan: np.ndarray, top: np.ndarray, bottom: np.ndarray,
                reduce: str = "max") -> np.ndarray:
    """Per-column reduction of a B-scan between two depth curves.

    Curves are rounded half-up and the interval is inclusive, so a band of
    height one samples exactly one row.  ``reduce`` is "max" (maximum
    intensity projection, default) or "mean".
    """
    scan = np.asarray(scan, dtype=np.float64)
    t, b = _rounded_band(scan, top, bottom)
    rows = np.arange(scan.shape[0])[:, None]
    inside = (rows >= t[None, :]) & (rows <= b[None, :])
    if reduce == "max":
        return np.where(inside, scan, -np.inf).max(axis=0)
    if reduce == "mean":
        return np.where(inside, scan, 0.0).sum(axis=0) / inside.sum(axis=0)
    raise ValueError(f"unknown reduction {reduce!r}")


def _boundary_curve(result: SegmentationResult, name: BoundaryName,
                    frame: int) -> np.ndarray:
    if name not in result.boundaries:
        raise MissingBoundary(f"frame {frame} has no {name.value} boundary")
    return result.boundaries[name].depths


def enface_volume(vol: Volume, results: list[SegmentationResult],
                  top: BoundaryName, bottom: BoundaryName,
                  reduce: str = "max") -> EnFaceImage:
    """Project a volume between two segmented boundaries, one row per frame."""
    if len(results) != vol.n_frames:
        raise ValueError("one segmentation result per frame is required")
    rows = []
    for f in range(vol.n_frames):
        rows.append(mip_between(vol.frames[f],
                                _boundary_curve(results[f], top, f),
                                _boundary_curve(results[f], bottom, f),
                                reduce=reduce))
    return np.stack(rows)


def enface_volume_static(vol: Volume, top_row: float, bottom_row: float,
                         reduce: str = "max") -> EnFaceImage:
    """Projection between two fixed depths, as with segmentation turned off."""
    top = np.full(vol.width, float(top_row))
    bottom = np.full(vol.width, float(bottom_row))
    rows = [mip_between(vol.frames[f], top, bottom, reduce=reduce)
            for f in range(vol.n_frames)]
    return np.stack(rows)


def speckle_variance(frame_a: np.ndarray, frame_b: np.ndarray) -> np.ndarray:
    """Two-sample population variance per pixel: ((a-b)/2)^2.

    Two B-scans acquired at the same lateral location decorrelate where
    there is flow, so the variance image is an angiography contrast.
    """
    a = np.asarray(frame_a, dtype=np.float64)
    b = np.asarray(frame_b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"frame shapes differ: {a.shape} vs {b.shape}")
    return (a - b) ** 2 / 4.0


def enface_volume_octa(vol: Volume, results: list[SegmentationResult],
                       top: BoundaryName, bottom: BoundaryName,
                       reduce: str = "max") -> EnFaceImage:
    """Speckle-variance projection over consecutive frame pairs.

    Frames (0, 1), (2, 3), ... are paired; the band comes from the first
    frame of each pair.  Output has one row per pair; a trailing unpaired
    frame is ignored.
    """
    if len(results) != vol.n_frames:
        raise ValueError("one segmentation result per frame is required")
    n_pairs = vol.n_frames // 2
    if n_pairs == 0:
        raise ValueError("OCTA projection needs at least two frames")
    rows = []
    for p in range(n_pairs):
        f = 2 * p
        var = speckle_variance(vol.frames[f], vol.frames[f + 1])
        rows.append(mip_between(var,
                                _boundary_curve(results[f], top, f),
                                _boundary_curve(results[f], bottom, f),
                                reduce=reduce))
    return np.stack(rows)


def enface_volume_octa_static(vol: Volume, top_row: float, bottom_row: float,
                              reduce: str = "max") -> EnFaceImage:
    """Static-depth speckle-variance projection over frame pairs."""
    n_pairs = vol.n_frames // 2
    if n_pairs == 0:
        raise ValueError("OCTA projection needs at least two frames")
    top = np.full(vol.width, float(top_row))
    bottom = np.full(vol.width, float(bottom_row))
    rows = []
    for p in range(n_pairs):
        var = speckle_variance(vol.frames[2 * p], vol.frames[2 * p + 1])
        rows.append(mip_between(var, top, bottom, reduce=reduce))
    return np.stack(rows)


def merit(img: EnFaceImage) -> float:
    """Sum of squared pixel intensities; the quantity maximized by the
    adaptive-optics optimization."""
    arr = np.asarray(img, dtype=np.float64)
    return float(np.sum(arr * arr))
