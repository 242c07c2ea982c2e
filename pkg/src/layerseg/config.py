"""Run-time configuration for the segmentation pipeline.

Defaults follow the constants the algorithm was tuned with: crop offset 0.1,
cropping skipped for images of 200 rows or fewer, sigma-1 5x5 Gaussian blur,
and the minimum graph weight of 1e-5.
"""

from __future__ import annotations

from dataclasses import dataclass

WEIGHT_FORM_SUM = "sum"
WEIGHT_FORM_DIFFERENCE = "difference"


@dataclass(frozen=True)
class RunConfig:
    """Parameters controlling preprocessing, graph search and smoothing.

    crop_enabled       -- enable the retina-band cropping step
    crop_offset        -- fraction of image height added on each side of the band
    crop_min_height    -- images this tall or shorter are never cropped
    blur_sigma         -- Gaussian blur standard deviation (resized-image pixels)
    blur_radius        -- Gaussian kernel radius (kernel size = 2*radius + 1)
    weight_form        -- "sum": w = 2 - (g_a + g_b) + w_min (default);
                          "difference": w = 2 - (g_a - g_b) + w_min
    precise_half_band  -- half-height of the search band around a rough curve,
                          in resized-image rows
    inner_margin       -- rows excluded inside each bound of an inner search
    smooth_window      -- centered moving-average window for final curves (odd)
    batch_size         -- frames per acquisition batch; only the first frame of
                          each batch is segmented
    """

    crop_enabled: bool = True
    crop_offset: float = 0.1
    crop_min_height: int = 200
    blur_sigma: float = 1.0
    blur_radius: int = 2
    weight_form: str = WEIGHT_FORM_SUM
    precise_half_band: float = 5.0
    inner_margin: float = 1.0
    smooth_window: int = 5
    batch_size: int = 6

    def __post_init__(self) -> None:
        if not 0.0 <= self.crop_offset < 1.0:
            raise ValueError(f"crop_offset must be in [0, 1), got {self.crop_offset}")
        if self.crop_min_height < 0:
            raise ValueError("crop_min_height must be non-negative")
        if self.blur_sigma <= 0.0:
            raise ValueError("blur_sigma must be positive")
        if self.blur_radius < 1:
            raise ValueError("blur_radius must be at least 1")
        if self.weight_form not in (WEIGHT_FORM_SUM, WEIGHT_FORM_DIFFERENCE):
            raise ValueError(f"unknown weight_form {self.weight_form!r}")
        if self.precise_half_band < 0.0:
            raise ValueError("precise_half_band must be non-negative")
        if self.inner_margin < 0.0:
            raise ValueError("inner_margin must be non-negative")
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ValueError("smooth_window must be a positive odd integer")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


DEFAULT_CONFIG = RunConfig()
