"""B-scan preprocessing: crop to the retinal band, log-compress, downsample, denoise.

A B-scan is a 2-D float array whose rows index depth and whose columns index
lateral position (A-lines).  Preprocessing produces two working images:

* the *resized* image -- cropped, log-scaled, downsampled by two and Gaussian
  blurred; the precise searches run on it, and
* the *rough* image -- the resized image downsampled by two again (no second
  blur); the initial coarse searches run on it.

All functions are pure; identical inputs give bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_CONFIG, RunConfig

HISTOGRAM_BINS = 10


@dataclass(frozen=True)
class CropWindow:
    """Row window kept by the cropping step; ``applied`` is False when the
    step was skipped (short image) or fell back to the full window."""

    begin_row: int
    end_row: int  # exclusive
    applied: bool

    def __post_init__(self) -> None:
        if not 0 <= self.begin_row < self.end_row:
            raise ValueError(f"invalid crop window [{self.begin_row}, {self.end_row})")


@dataclass(frozen=True)
class PreprocessedScan:
    """Working images plus the factors mapping their coordinates back to the
    original scan: row = resized_row * resized_scale + crop.begin_row."""

    crop: CropWindow
    resized: np.ndarray
    rough: np.ndarray
    original_height: int
    original_width: int
    resized_scale: int = 2
    rough_scale: int = 4


def validate_scan(scan: np.ndarray) -> np.ndarray:
    """Check B-scan invariants and return the image as a float64 array.

    Requires a 2-D array of at least 3x3 finite, non-negative values.
    """
    arr = np.asarray(scan, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"B-scan must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 3 or arr.shape[1] < 3:
        raise ValueError(f"B-scan must be at least 3x3, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("B-scan contains non-finite values")
    if arr.min() < 0.0:
        raise ValueError("B-scan contains negative values")
    return arr


def row_average(scan: np.ndarray) -> np.ndarray:
    """Mean intensity of each row, averaged along the lateral direction."""
    return np.asarray(scan, dtype=np.float64).mean(axis=1)


def crop_threshold(row_avgs: np.ndarray) -> float:
    """Background/retina threshold from a 10-bin histogram of row averages.

    Bin width is (max - min + 1) / 10.  The threshold is the upper edge of
    the fullest bin (the modal bin is overwhelmingly background rows); ties
    between equally full bins resolve to the lowest-valued bin.
    """
    avgs = np.asarray(row_avgs, dtype=np.float64)
    if avgs.size == 0:
        raise ValueError("row_avgs is empty")
    lo = float(avgs.min())
    hi = float(avgs.max())
    bin_size = (hi - lo + 1.0) / HISTOGRAM_BINS
    bins = np.floor((avgs - lo) / bin_size).astype(np.int64)
    np.clip(bins, 0, HISTOGRAM_BINS - 1, out=bins)
    counts = np.bincount(bins, minlength=HISTOGRAM_BINS)
    modal = int(np.argmax(counts))  # argmax returns the first (lowest) maximum
    return lo + (modal + 1) * bin_size


def crop(scan: np.ndarray, config: RunConfig = DEFAULT_CONFIG) -> tuple[CropWindow, np.ndarray]:
    """Crop a scan to the rows that contain retinal structure.

    Rows whose average exceeds the histogram threshold delimit the retina;
    the window is padded by ``crop_offset * height`` on each side (floor on
    the begin side, through the end of the padded row on the end side) so
    no retinal feature is lost.  Images of ``crop_min_height`` rows or fewer
    are returned whole, as is any image with no row above the threshold.
    """
    scan = validate_scan(scan)
    height = scan.shape[0]
    full = CropWindow(0, height, applied=False)
    if height <= config.crop_min_height:
        return full, scan
    avgs = row_average(scan)
    threshold = crop_threshold(avgs)
    above = np.flatnonzero(avgs > threshold)
    if above.size == 0:
        return full, scan
    first, last = int(above[0]), int(above[-1])
    pad = config.crop_offset * height
    begin = max(0, int(np.floor(first - pad)))
    end = min(height, int(np.floor(last + pad)) + 1)
    window = CropWindow(begin, end, applied=True)
    return window, scan[begin:end]


def block_mean_downsample(img: np.ndarray) -> np.ndarray:
    """Downsample by two in each direction using 2x2 block means.

    Output dimensions are ceil(input / 2); a ragged last row or column is
    averaged over the pixels actually present.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    row_starts = np.arange(0, h, 2)
    col_starts = np.arange(0, w, 2)
    sums = np.add.reduceat(np.add.reduceat(img, row_starts, axis=0), col_starts, axis=1)
    rows = np.minimum(row_starts + 2, h) - row_starts
    cols = np.minimum(col_starts + 2, w) - col_starts
    return sums / (rows[:, None] * cols[None, :])


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    """Sampled 1-D Gaussian kernel of size 2*radius + 1, normalized to sum 1."""
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img: np.ndarray, sigma: float = 1.0, radius: int = 2) -> np.ndarray:
    """Separable Gaussian blur with replicated borders.

    Computed as img + sum_i k_i * (shifted_i - img), which keeps constant
    images exactly constant and never leaves the input value range.
    """
    img = np.asarray(img, dtype=np.float64)
    kernel = gaussian_kernel(sigma, radius)
    out = img
    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        padded = np.pad(out, pad, mode="edge")
        acc = out.copy()
        for i, kv in enumerate(kernel):
            if axis == 0:
                shifted = padded[i:i + img.shape[0], :]
            else:
                shifted = padded[:, i:i + img.shape[1]]
            acc += kv * (shifted - out)
        out = acc
    return out


def preprocess(scan: np.ndarray, config: RunConfig = DEFAULT_CONFIG) -> PreprocessedScan:
    """Full preprocessing chain: crop, log(1 + v), downsample x2, blur, and
    a second x2 downsample for the rough image."""
    scan = validate_scan(scan)
    if config.crop_enabled:
        window, cropped = crop(scan, config)
    else:
        window, cropped = CropWindow(0, scan.shape[0], applied=False), scan
    logged = np.log1p(cropped)
    resized = gaussian_blur(block_mean_downsample(logged), config.blur_sigma, config.blur_radius)
    rough = block_mean_downsample(resized)
    return PreprocessedScan(
        crop=window,
        resized=resized,
        rough=rough,
        original_height=scan.shape[0],
        original_width=scan.shape[1],
    )
