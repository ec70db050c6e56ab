"""Command-line entry point: ``rotostitch {stitch,metrics,select,synth,report}``.

Machine-readable JSON goes to stdout (or ``--out``); diagnostics go to stderr.
Exit codes: 0 ok, 1 input error, 2 config error, 3 internal failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .compose import stitch_video
from .config import SCHEMA, load_config, preprocess_config, resolve, stitch_config
from .errors import ConfigError, StitchError
from .harness import (
    HarnessConfig,
    all_combos,
    rows_to_table,
    run_phase1,
    run_phase2,
    run_phase3,
    run_phase4,
)
from .imgcore import read_image, write_image
from .metrics import all_metrics, edge_metric, overlap_metric
from .preprocess import preprocess_sequence
from .report import CLASSIFIERS, analyse_panorama, write_report
from .synth import CameraConfig, SequenceSpec, checker_texture, generate_sequence, random_texture

log = logging.getLogger("rotostitch")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3
IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".pnm")


class InputError(Exception):
    """Unreadable or missing input; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _emit(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=False)
    if out:
        Path(out).write_text(text + "\n")
        print(f"wrote {out}", file=sys.stderr)
    else:
        print(text)


def _read(path) -> np.ndarray:
    try:
        return read_image(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc


def list_frames(frames_dir) -> list[Path]:
    d = Path(frames_dir)
    if not d.is_dir():
        raise InputError(f"frames directory {d} does not exist")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())
    # the ground-truth strip written by `synth` is not a frame
    files = [p for p in files if p.name != "ground_truth.png"]
    if not files:
        raise InputError("no frames found")
    return files


def load_frames(frames_dir, values: dict) -> list[np.ndarray]:
    frames = [_read(p) for p in list_frames(frames_dir)]
    try:
        return preprocess_sequence(frames, preprocess_config(values))
    except ConfigError:
        raise
    except StitchError as exc:
        raise InputError(str(exc)) from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _config_values(args) -> dict:
    file_values = load_config(args.config) if args.config else {}
    overrides = {k: v for k, v in vars(args).items() if k in SCHEMA and v is not None}
    if args.seed is not None:
        overrides["seed"] = args.seed
    return resolve(file_values, overrides)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    grp = p.add_argument_group("pipeline configuration (dotted keys, override --config)")
    for key, (default, kind) in SCHEMA.items():
        if key in ("seed", "frames_dir", "output_dir"):
            continue
        flag = "--" + key
        if kind is bool:
            grp.add_argument(flag, dest=key, nargs="?", const="true", default=None, metavar="BOOL")
        else:
            grp.add_argument(flag, dest=key, default=None, metavar=str(getattr(kind, "__name__", kind)).upper())


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value config file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)


def cmd_stitch(args) -> int:
    values = _config_values(args)
    frames_dir = args.frames or values["frames_dir"]
    if not frames_dir:
        raise ConfigError("stitch needs --frames or frames_dir in the config")
    out_dir = Path(args.out or values["output_dir"])
    cfg = stitch_config(values)
    frames = load_frames(frames_dir, values)
    pano, stats = stitch_video(frames, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_image(out_dir / "panorama.png", pano)
    doc = stats.to_dict()
    doc["frames"] = len(frames)
    doc["frame_width"] = int(frames[0].shape[1])
    doc["panorama_width"] = int(pano.shape[1])
    (out_dir / "stitch_stats.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"stitched {len(frames)} frames into {pano.shape[1]}x{pano.shape[0]} -> {out_dir}", file=sys.stderr)
    _emit(
        {
            "panorama": str(out_dir / "panorama.png"),
            "stats": str(out_dir / "stitch_stats.json"),
            "panorama_width": doc["panorama_width"],
            "mean_shift": doc["mean_shift"],
            "iterations": len(doc["iterations"]),
        },
        None,
    )
    return EXIT_OK


def cmd_metrics(args) -> int:
    a = _read(args.image)
    doc = {"image": str(args.image), **all_metrics(a)}
    if args.other:
        b = _read(args.other)
        doc["other"] = str(args.other)
        try:
            doc["edge"] = edge_metric(a, b)
        except StitchError as exc:
            raise InputError(str(exc)) from exc
        try:
            doc["overlap"] = overlap_metric(a, b).to_dict()
        except StitchError as exc:
            doc["overlap"] = {"error": str(exc)}
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    _emit(doc, args.out)
    return EXIT_OK


def _int_list(text: str, what: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated integer list, got {text!r}") from None
    if not vals:
        raise ConfigError(f"{what} is empty")
    return vals


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    with path.open("w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        wr.writerows(rows)


def cmd_select(args) -> int:
    values = _config_values(args)
    phases = _int_list(args.phases, "--phases")
    if any(p not in (1, 2, 3, 4) for p in phases):
        raise ConfigError("phases must be drawn from 1,2,3,4")
    widths = _int_list(args.widths, "--widths")
    frames_dir = args.frames or values["frames_dir"]
    if not frames_dir:
        raise ConfigError("select needs --frames")
    hc = HarnessConfig(
        stitch=stitch_config(values),
        misalignment_thresh=values["harness.misalignment_thresh"],
        psnr_cap=values["harness.psnr_cap"],
    )
    frames = load_frames(frames_dir, values)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    combos = all_combos()
    doc: dict = {"frames": len(frames)}
    tables: dict[str, list[dict]] = {}
    if 1 in phases:
        tables["phase1"] = rows_to_table(run_phase1(combos, frames, hc))
    if 2 in phases:
        tables["phase2"] = rows_to_table(run_phase2(combos, frames, hc))
    if 3 in phases:
        rows, panos = run_phase3(combos, frames, args.repeats, hc)
        tables["phase3"] = rows_to_table(rows)
        for name, pano in panos.items():
            write_image(out.parent / f"phase3_{name.replace('+', '_')}.png", pano)
    if 4 in phases:
        tables["phase4"] = [r.to_dict() for r in run_phase4(widths, frames, hc)]
    doc.update(tables)
    for name, rows in tables.items():
        _write_csv(out.with_name(f"{out.stem}_{name}.csv"), rows)
    _emit(doc, str(out))
    return EXIT_OK


def cmd_synth(args) -> int:
    seed = args.seed or 0
    if args.texture in (None, "random"):
        tex = random_texture(args.texture_width, args.texture_height, seed=seed)
    elif args.texture == "checker":
        tex = checker_texture(
            args.texture_width, args.texture_height, cell=12, lo=60, hi=195, jitter=40, seed=seed
        )
    else:
        tex = _read(args.texture)
    try:
        cam = CameraConfig(
            frame_w=args.frame_width,
            frame_h=args.frame_height,
            mode=args.mode,
            distance=args.distance,
        )
        spec = SequenceSpec(
            tex,
            deg_per_frame=args.deg_per_frame,
            n_frames=args.frames,
            exposure_flicker=args.flicker,
            flicker_period=args.flicker_period,
            noise_sigma=args.noise,
            seed=args.seed or 0,
        )
    except StitchError as exc:
        raise ConfigError(str(exc)) from exc
    frames, truth, shift = generate_sequence(spec, cam)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digits = max(6, len(str(len(frames) - 1)))
    for i, f in enumerate(frames):
        write_image(out / f"frame_{i:0{digits}d}.png", f)
    write_image(out / "ground_truth.png", truth)
    manifest = {
        "true_shift_px": shift,
        "n_frames": spec.n_frames,
        "deg_per_frame": spec.deg_per_frame,
        "texture": str(args.texture) if args.texture else "random",
        "texture_width": int(tex.shape[1]),
        "texture_height": int(tex.shape[0]),
        "mode": cam.mode,
        "frame_width": cam.frame_w,
        "frame_height": int(frames[0].shape[0]),
        "distance": cam.distance,
        "flicker": spec.exposure_flicker,
        "flicker_period": spec.flicker_period,
        "noise": spec.noise_sigma,
        "seed": spec.seed,
        "ground_truth_width": int(truth.shape[1]),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(frames)} frames to {out}", file=sys.stderr)
    _emit(manifest, None)
    return EXIT_OK


def cmd_report(args) -> int:
    if args.classifier not in CLASSIFIERS:
        raise ConfigError(f"unknown classifier {args.classifier!r}; choose from {sorted(CLASSIFIERS)}")
    if args.labels and len(args.labels) != len(args.panorama):
        raise ConfigError("--label must be given once per --panorama")
    labels = args.labels or [f"t{i + 1}" for i in range(len(args.panorama))]
    clf = CLASSIFIERS[args.classifier]
    counts = []
    for i, (path, label) in enumerate(zip(args.panorama, labels)):
        img = _read(path)
        try:
            c, _, annotated = analyse_panorama(img, label, args.patch_size, args.areas, clf)
        except StitchError as exc:
            raise InputError(f"{path}: {exc}") from exc
        counts.append(c)
        if args.annotated:
            dst = Path(args.annotated)
            if len(args.panorama) > 1:
                dst = dst.with_name(f"{dst.stem}_{label}{dst.suffix}")
            write_image(dst, annotated)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report(counts, out)
    print(f"wrote {out}", file=sys.stderr)
    _emit({"timesteps": [c.to_dict() for c in counts]}, None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rotostitch", description="Unroll rotating cylindrical surfaces from video frames.")
    p.add_argument("--version", action="version", version=f"rotostitch {__version__}")
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stitch", help="stitch a directory of numbered frames")
    _common(s)
    s.add_argument("--frames", help="directory with numbered frame images")
    s.add_argument("--out", help="output directory (default: output_dir key or .)")
    _add_config_flags(s)
    s.set_defaults(func=cmd_stitch)

    m = sub.add_parser("metrics", help="quality metrics of an image or an image pair")
    _common(m)
    m.add_argument("image")
    m.add_argument("other", nargs="?", help="second image: adds edge and overlap metrics")
    m.add_argument("--out", help="write JSON here instead of stdout")
    m.set_defaults(func=cmd_metrics)

    sel = sub.add_parser("select", help="run the component selection phases")
    _common(sel)
    sel.add_argument("--frames")
    sel.add_argument("--phases", default="1,2,3,4")
    sel.add_argument("--widths", default="5,25,50,150")
    sel.add_argument("--repeats", type=int, default=3)
    sel.add_argument("--out", default="report.json")
    _add_config_flags(sel)
    sel.set_defaults(func=cmd_select)

    sy = sub.add_parser("synth", help="render a synthetic rotating-cylinder sequence")
    _common(sy)
    sy.add_argument(
        "--texture", help="texture image path, or 'random' (default) or 'checker' for a generated one"
    )
    sy.add_argument("--texture-width", type=int, default=2000)
    sy.add_argument("--texture-height", type=int, default=200)
    sy.add_argument("--deg-per-frame", type=float, required=True)
    sy.add_argument("--frames", type=int, required=True)
    sy.add_argument("--mode", choices=("orthographic", "perspective"), default="orthographic")
    sy.add_argument("--frame-width", type=int, default=200)
    sy.add_argument("--frame-height", type=int, default=None)
    sy.add_argument("--distance", type=float, default=4.0)
    sy.add_argument("--flicker", type=float, default=0.0)
    sy.add_argument("--flicker-period", type=float, default=7.0)
    sy.add_argument("--noise", type=float, default=0.0)
    sy.add_argument("--out", required=True)
    sy.set_defaults(func=cmd_synth)

    r = sub.add_parser("report", help="classify panorama patches and write the defect report")
    _common(r)
    r.add_argument("--panorama", action="append", required=True, help="repeat for each timestep")
    r.add_argument("--label", dest="labels", action="append")
    r.add_argument("--patch-size", type=int, default=150)
    r.add_argument("--areas", type=int, default=10)
    r.add_argument("--classifier", default="dark_ratio")
    r.add_argument("--out", default="report.json")
    r.add_argument("--annotated")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit 3
        log.debug("internal failure", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
