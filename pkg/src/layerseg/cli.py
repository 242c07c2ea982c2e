"""Command-line interface.

Subcommands: ``segment`` (boundary CSV and optional annotated B-scans),
``enface`` (grayscale projection plus merit value), ``bench`` (per-stage
latency table with a figure), and ``phantom`` (synthetic volume generator).

Exit codes: 0 success, 1 segmentation/analysis failure, 2 I/O or format
error, 64 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import WEIGHT_FORM_DIFFERENCE, WEIGHT_FORM_SUM, RunConfig
from .enface import (
    enface_volume,
    enface_volume_octa,
    enface_volume_octa_static,
    enface_volume_static,
    merit,
)
from .errors import (
    DimensionMismatch,
    InvalidBand,
    MissingBoundary,
    SearchRegionDisconnected,
    VolumeFormatError,
)
from .pipeline import BatchPlan, PhantomSpec, benchmark, generate_phantom, run_batched
from .segmentation import BoundaryName, dependency_closure
from .volumeio import (
    write_boundary_csv,
    write_pgm,
    write_truth_csv,
    write_volume,
    read_volume,
)

EXIT_OK = 0
EXIT_SEGMENTATION = 1
EXIT_IO = 2
EXIT_USAGE = 64

_LAYER_ALIASES = {name.value.upper(): name for name in BoundaryName}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 64, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _parse_layers(text: str) -> list[BoundaryName]:
    if text.strip().lower() == "all":
        return list(BoundaryName)
    layers = []
    for token in text.split(","):
        key = token.strip().upper().replace("/", "_").replace("-", "_")
        if key not in _LAYER_ALIASES:
            raise argparse.ArgumentTypeError(
                f"unknown boundary {token.strip()!r}; choose from "
                f"{', '.join(n.value for n in BoundaryName)} or 'all'")
        layers.append(_LAYER_ALIASES[key])
    if not layers:
        raise argparse.ArgumentTypeError("layer list is empty")
    return layers


def _parse_layer(text: str) -> BoundaryName:
    layers = _parse_layers(text)
    if len(layers) != 1:
        raise argparse.ArgumentTypeError("expected a single boundary name")
    return layers[0]


def _parse_dims2(text: str) -> tuple[int, int]:
    """HxW: depth rows x A-lines, e.g. 496x400."""
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}")
    try:
        height, width = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers in HxW, got {text!r}")
    if height < 1 or width < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return height, width


def _parse_dims3(text: str) -> tuple[int, int, int]:
    """HxWxF: depth rows x A-lines x frames."""
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected HxWxF, got {text!r}")
    try:
        height, width, frames = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers in HxWxF, got {text!r}")
    if height < 1 or width < 1 or frames < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return height, width, frames


def _parse_reps(text: str) -> int:
    try:
        reps = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if reps < 10:
        raise argparse.ArgumentTypeError("at least 10 repetitions are required")
    return reps


def _parse_static(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected TOP,BOTTOM rows, got {text!r}")
    try:
        top, bottom = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers in TOP,BOTTOM, got {text!r}")
    return top, bottom


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline configuration")
    group.add_argument("--no-crop", action="store_true",
                       help="disable retina-band cropping")
    group.add_argument("--crop-offset", type=float, default=0.1,
                       help="crop padding as a fraction of height (default 0.1)")
    group.add_argument("--crop-min-height", type=int, default=200,
                       help="skip cropping at or below this height (default 200)")
    group.add_argument("--blur-sigma", type=float, default=1.0,
                       help="Gaussian blur sigma (default 1.0)")
    group.add_argument("--blur-radius", type=int, default=2,
                       help="Gaussian blur radius (default 2)")
    group.add_argument("--weight-form",
                       choices=[WEIGHT_FORM_SUM, WEIGHT_FORM_DIFFERENCE],
                       default=WEIGHT_FORM_SUM,
                       help="edge weight formula (default sum)")
    group.add_argument("--precise-band", type=float, default=5.0,
                       help="half-height of the precise search band (default 5)")
    group.add_argument("--inner-margin", type=float, default=1.0,
                       help="rows excluded inside inner-search bounds (default 1)")
    group.add_argument("--smooth-window", type=int, default=5,
                       help="moving-average window for final curves (default 5)")


def _config_from(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        crop_enabled=not args.no_crop,
        crop_offset=args.crop_offset,
        crop_min_height=args.crop_min_height,
        blur_sigma=args.blur_sigma,
        blur_radius=args.blur_radius,
        weight_form=args.weight_form,
        precise_half_band=args.precise_band,
        inner_margin=args.inner_margin,
        smooth_window=args.smooth_window,
        batch_size=getattr(args, "batch", 6),
    )


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> _Parser:
    parser = _Parser(prog="layerseg",
                     description="Graph-search segmentation of retinal layer "
                                 "boundaries in OCT B-scan volumes")
    sub = parser.add_subparsers(dest="command", required=True)

    p_seg = sub.add_parser("segment", help="segment a volume to a boundary CSV")
    p_seg.add_argument("--input", required=True, help="raw float32 volume file")
    p_seg.add_argument("--meta", required=True, help="metadata sidecar file")
    p_seg.add_argument("--layers", type=_parse_layers, default=list(BoundaryName),
                       help="comma-separated boundaries or 'all' (default all)")
    p_seg.add_argument("--batch", type=int, default=6,
                       help="frames per batch; the first frame of each batch is "
                            "segmented (default 6)")
    p_seg.add_argument("--out", default=".", help="output directory (default .)")
    p_seg.add_argument("--render", action="store_true",
                       help="also write annotated B-scan images for the "
                            "segmented frames")
    _add_config_options(p_seg)
    p_seg.set_defaults(handler=cmd_segment)

    p_enf = sub.add_parser("enface", help="project an en-face image between "
                                          "two boundaries")
    p_enf.add_argument("--input", required=True, help="raw float32 volume file")
    p_enf.add_argument("--meta", required=True, help="metadata sidecar file")
    p_enf.add_argument("--top", type=_parse_layer, default=None,
                       help="upper boundary name")
    p_enf.add_argument("--bottom", type=_parse_layer, default=None,
                       help="lower boundary name")
    p_enf.add_argument("--mode", choices=["oct", "octa"], default="oct",
                       help="intensity or speckle-variance projection")
    p_enf.add_argument("--static", type=_parse_static, default=None,
                       metavar="TOP,BOTTOM",
                       help="project between two fixed rows instead of "
                            "segmented boundaries")
    p_enf.add_argument("--reduce", choices=["max", "mean"], default="max",
                       help="projection reduction (default max)")
    p_enf.add_argument("--batch", type=int, default=6,
                       help="frames per segmentation batch (default 6)")
    p_enf.add_argument("--out", default=".", help="output directory (default .)")
    _add_config_options(p_enf)
    p_enf.set_defaults(handler=cmd_enface)

    p_bench = sub.add_parser("bench", help="per-stage latency benchmark on "
                                           "synthetic phantoms")
    p_bench.add_argument("--dims", type=_parse_dims2, required=True,
                         help="image size as HxW (depth rows x A-lines), "
                              "e.g. 496x400")
    p_bench.add_argument("--layers", type=_parse_layers, default=list(BoundaryName),
                         help="comma-separated boundaries or 'all' (default all)")
    p_bench.add_argument("--reps", type=_parse_reps, default=50,
                         help="repetitions, at least 10 (default 50)")
    p_bench.add_argument("--seed", type=int, default=0, help="phantom RNG seed")
    p_bench.add_argument("--out", default=".", help="output directory (default .)")
    _add_config_options(p_bench)
    p_bench.set_defaults(handler=cmd_bench)

    p_ph = sub.add_parser("phantom", help="generate a synthetic layered volume")
    p_ph.add_argument("--dims", type=_parse_dims3, default=(496, 400, 1),
                      help="volume size as HxWxF (default 496x400x1)")
    p_ph.add_argument("--drift", type=float, default=0.0,
                      help="axial drift per frame in pixels (default 0)")
    p_ph.add_argument("--noise", type=float, default=0.0,
                      help="multiplicative speckle amplitude in [0, 1) (default 0)")
    p_ph.add_argument("--sine-amplitude", type=float, default=0.0,
                      help="lateral sinusoid amplitude in pixels (default 0)")
    p_ph.add_argument("--sine-period", type=float, default=128.0,
                      help="lateral sinusoid period in pixels (default 128)")
    p_ph.add_argument("--seed", type=int, default=0, help="RNG seed")
    p_ph.add_argument("--out", default=".", help="output directory (default .)")
    p_ph.set_defaults(handler=cmd_phantom)

    return parser


def cmd_segment(args: argparse.Namespace) -> int:
    vol = read_volume(args.input, args.meta)
    config = _config_from(args)
    plan = BatchPlan(batch_size=args.batch, layers=frozenset(args.layers),
                     width=vol.width)
    results, reports = run_batched(vol, plan, config)
    out = _out_dir(args)
    csv_path = out / "boundaries.csv"
    write_boundary_csv(csv_path, results)
    print(f"wrote {csv_path}")
    if args.render:
        from .render import render_bscan

        for report in reports:
            frame = report.segmented_frame
            png = out / f"frame_{frame:04d}.png"
            render_bscan(png, vol.frames[frame], results[frame],
                         title=f"frame {frame}")
            print(f"wrote {png}")
    met = sum(r.met for r in reports)
    print(f"batches: {len(reports)}, deadline met: {met}/{len(reports)} "
          f"(deadline {reports[0].deadline_ms:.3f} ms)")
    return EXIT_OK


def cmd_enface(args: argparse.Namespace) -> int:
    vol = read_volume(args.input, args.meta)
    config = _config_from(args)
    if args.static is not None:
        top_row, bottom_row = args.static
        if args.mode == "oct":
            img = enface_volume_static(vol, top_row, bottom_row, reduce=args.reduce)
        else:
            img = enface_volume_octa_static(vol, top_row, bottom_row,
                                            reduce=args.reduce)
    else:
        if args.top is None or args.bottom is None:
            raise UsageError("--top and --bottom are required unless --static "
                             "is given")
        layers = dependency_closure([args.top, args.bottom])
        plan = BatchPlan(batch_size=args.batch, layers=layers, width=vol.width)
        results, _ = run_batched(vol, plan, config)
        if args.mode == "oct":
            img = enface_volume(vol, results, args.top, args.bottom,
                                reduce=args.reduce)
        else:
            img = enface_volume_octa(vol, results, args.top, args.bottom,
                                     reduce=args.reduce)
    out = _out_dir(args)
    pgm_path = out / f"enface_{args.mode}.pgm"
    write_pgm(pgm_path, img)
    print(f"wrote {pgm_path}")
    print(f"merit={merit(img)}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    height, width = args.dims
    config = _config_from(args)
    table = benchmark(height, width, args.layers, args.reps, config,
                      seed=args.seed)
    out = _out_dir(args)
    csv_path = out / f"bench_{height}x{width}.csv"
    csv_path.write_text(table.to_csv(), encoding="utf-8")
    print(f"wrote {csv_path}")
    from .render import render_benchmark

    png_path = out / f"bench_{height}x{width}.png"
    render_benchmark(png_path, table)
    print(f"wrote {png_path}")
    last = table.rows[-1]
    print(f"accumulated mean through {last.stage}: "
          f"{last.accumulated_mean_ms:.2f} ms over {table.repetitions} reps")
    return EXIT_OK


def cmd_phantom(args: argparse.Namespace) -> int:
    height, width, frames = args.dims
    try:
        spec = PhantomSpec(height=height, width=width, frames=frames,
                           drift_per_frame=args.drift, speckle=args.noise,
                           sine_amplitude=args.sine_amplitude,
                           sine_period=args.sine_period)
    except ValueError as err:
        raise UsageError(str(err)) from err
    vol, truth = generate_phantom(spec, seed=args.seed)
    out = _out_dir(args)
    raw_path = out / "volume.raw"
    meta_path = out / "volume.meta"
    truth_path = out / "truth.csv"
    write_volume(raw_path, meta_path, vol)
    write_truth_csv(truth_path, truth)
    for path in (raw_path, meta_path, truth_path):
        print(f"wrote {path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except UsageError as err:
        print(f"layerseg: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (VolumeFormatError, OSError, ValueError) as err:
        print(f"layerseg: error: {err}", file=sys.stderr)
        return EXIT_IO
    except (SearchRegionDisconnected, MissingBoundary, InvalidBand,
            DimensionMismatch) as err:
        print(f"layerseg: error: {err}", file=sys.stderr)
        return EXIT_SEGMENTATION


if __name__ == "__main__":
    sys.exit(main())
