"""Raw volume files, PGM image export, and boundary CSV serialization.

A volume on disk is a raw little-endian float32 payload (row-major within a
frame, frames consecutive) plus a text sidecar of ``key=value`` lines naming
``width``, ``height`` and ``frames``.  Boundary tables use the CSV schema
``frame,column,boundary,depth_px``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .enface import Volume
from .errors import VolumeFormatError
from .segmentation import BoundaryName, SegmentationResult

BYTES_PER_PIXEL = 4  # little-endian float32
BOUNDARY_CSV_HEADER = ["frame", "column", "boundary", "depth_px"]


def write_volume(raw_path: str | Path, meta_path: str | Path, vol: Volume) -> None:
    """Write the raw float32 payload and its metadata sidecar."""
    payload = np.ascontiguousarray(vol.frames, dtype="<f4")
    Path(raw_path).write_bytes(payload.tobytes())
    meta = (f"width={vol.width}\n"
            f"height={vol.height}\n"
            f"frames={vol.n_frames}\n")
    Path(meta_path).write_text(meta, encoding="utf-8")


def _parse_meta(meta_path: Path) -> dict[str, int]:
    fields: dict[str, int] = {}
    for lineno, line in enumerate(meta_path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise VolumeFormatError(f"{meta_path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        try:
            fields[key] = int(value.strip())
        except ValueError as err:
            raise VolumeFormatError(f"{meta_path}:{lineno}: {key} is not an integer") from err
    for key in ("width", "height", "frames"):
        if key not in fields:
            raise VolumeFormatError(f"{meta_path}: missing required key {key!r}")
        if fields[key] < 1:
            raise VolumeFormatError(f"{meta_path}: {key} must be positive")
    return fields


def read_volume(raw_path: str | Path, meta_path: str | Path) -> Volume:
    """Load a raw volume, validating the payload size against the sidecar."""
    raw_path = Path(raw_path)
    meta_path = Path(meta_path)
    if not raw_path.is_file():
        raise VolumeFormatError(f"volume payload not found: {raw_path}")
    if not meta_path.is_file():
        raise VolumeFormatError(f"volume metadata not found: {meta_path}")
    meta = _parse_meta(meta_path)
    width, height, frames = meta["width"], meta["height"], meta["frames"]
    expected = width * height * frames * BYTES_PER_PIXEL
    data = raw_path.read_bytes()
    if len(data) != expected:
        raise VolumeFormatError(
            f"{raw_path}: payload is {len(data)} bytes but metadata implies "
            f"{expected} ({frames} frames x {height} rows x {width} cols x "
            f"{BYTES_PER_PIXEL} bytes)")
    pixels = np.frombuffer(data, dtype="<f4").astype(np.float64)
    return Volume(frames=pixels.reshape(frames, height, width))


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    """8-bit binary PGM, min-max scaled; constant images map to black."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {arr.shape}")
    lo, hi = float(arr.min()), float(arr.max())
    if hi > lo:
        scaled = np.clip((arr - lo) / (hi - lo) * 255.0, 0.0, 255.0)
    else:
        scaled = np.zeros_like(arr)
    data = scaled.astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def write_boundary_csv(path: str | Path, results: list[SegmentationResult]) -> None:
    """One row per (frame, column, boundary) with full-precision depths."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BOUNDARY_CSV_HEADER)
        for frame, result in enumerate(results):
            for name in BoundaryName:
                if name not in result.boundaries:
                    continue
                depths = result.boundaries[name].depths
                for column in range(depths.size):
                    writer.writerow([frame, column, name.value, repr(float(depths[column]))])


def write_truth_csv(path: str | Path, truth: dict[BoundaryName, np.ndarray]) -> None:
    """Ground-truth curves in the same schema as segmentation output."""
    names = [n for n in BoundaryName if n in truth]
    n_frames = truth[names[0]].shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BOUNDARY_CSV_HEADER)
        for frame in range(n_frames):
            for name in names:
                curve = truth[name][frame]
                for column in range(curve.size):
                    writer.writerow([frame, column, name.value, repr(float(curve[column]))])


def read_boundary_csv(path: str | Path) -> dict[tuple[int, str], np.ndarray]:
    """Parse a boundary CSV into {(frame, boundary name): depth array}."""
    rows: dict[tuple[int, str], dict[int, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != BOUNDARY_CSV_HEADER:
            raise VolumeFormatError(f"{path}: unexpected CSV header {header}")
        for record in reader:
            frame, column, name, depth = record
            rows.setdefault((int(frame), name), {})[int(column)] = float(depth)
    out: dict[tuple[int, str], np.ndarray] = {}
    for key, columns in rows.items():
        width = max(columns) + 1
        curve = np.full(width, np.nan)
        for col, depth in columns.items():
            curve[col] = depth
        out[key] = curve
    return out
