"""Command-line workflows: floor generation through localization benchmarks.

Every output file records the schema version and the flags that produced it.
Exit codes: 0 success, 2 invalid arguments or input, 3 missing file,
4 dictionary and dataset disagree on the number of textons.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .config import BinMismatchError, RunConfig
from .filtering import ArenaBounds
from .mapeval import LossParams, global_loss, loss_map
from .simulator.benchmark import AXES, benchmark_sweep, write_benchmark_csv
from .simulator.camera import CameraModel
from .simulator.floor import TextureSpec, generate_floor, load_floor, save_floor
from .simulator.landing import landing_experiment, write_landing_csv
from .simulator.pipeline import (
    CALIBRATION_FRAMES, DICTIONARY_IMAGES, TRAINING_LANES, Environment, build_dataset,
    calibrate, flight, flight_experiment, render_frames, run_localization, streams, training_trajectory,
)
from .simulator.trajectory import Trajectory, read_trajectory_csv, write_trajectory_csv
from .textons import train_dictionary

log = logging.getLogger("textonloc")

EXIT_OK, EXIT_INVALID, EXIT_MISSING, EXIT_MISMATCH = 0, 2, 3, 4
CAMERA_FLAGS = ("footprint", "noise", "blur", "rotation", "image_width", "image_height")


class UsageError(ValueError):
    pass


def _size(text: str) -> tuple[float, float]:
    try:
        w, h = (float(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT in metres, got {text!r}") from None
    return w, h


def _samples(text: str) -> int | None:
    if text == "full":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a sample count or 'full', got {text!r}") from None


def _flags(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}


def _check_positive(**values):
    for name, v in values.items():
        if v is not None and not v > 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive, got {v}")


def _camera(args, recorded: dict | None = None) -> CameraModel:
    """Camera from explicit flags, else from the flags recorded with the dataset, else defaults."""
    recorded = recorded or {}
    defaults = CameraModel()
    fallback = {"footprint": defaults.footprint_width, "noise": defaults.pixel_noise_sigma,
                "blur": defaults.blur_radius, "rotation": defaults.max_rotation,
                "image_width": defaults.out_width, "image_height": defaults.out_height}
    v = {}
    for name in CAMERA_FLAGS:
        given = getattr(args, name, None)
        if given is None:
            given = recorded.get(name)
        v[name] = fallback[name] if given is None else given
    return CameraModel(int(v["image_width"]), int(v["image_height"]), float(v["footprint"]),
                       float(v["noise"]), int(v["blur"]), float(v["rotation"]))


def _recorded_flags(path) -> dict:
    return fileio.read_header(path).get("flags", {})


def _require(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"no such file: {p}")


def _out_path(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_gen_floor(args) -> int:
    w, h = args.size
    _check_positive(size=min(w, h), mpp=args.mpp, feature_scale=args.feature_scale)
    spec = TextureSpec(feature_scale=args.feature_scale, richness=args.richness,
                       color_variation=args.color_variation, repeat_period=args.repeat_period)
    rng = np.random.default_rng(args.seed)
    floor = generate_floor(ArenaBounds(0.0, w, 0.0, h), args.mpp, spec, rng)
    ppm, meta = save_floor(floor, args.out, {"schema_version": fileio.SCHEMA_VERSION, "flags": _flags(args)})
    print(f"wrote {ppm} ({floor.image.width}x{floor.image.height} px) and {meta}")
    return EXIT_OK


def cmd_train_dictionary(args) -> int:
    _require(Path(args.floor) / "floor.ppm")
    _check_positive(textons=args.textons, images=args.images, patches_per_image=args.patches_per_image,
                    epochs=args.epochs, patch_size=args.patch_size)
    floor = load_floor(args.floor)
    cam = _camera(args)
    rng = np.random.default_rng(args.seed)
    traj = flight(floor, cam, args.images, rng, speed=args.speed)
    images = render_frames(floor, cam, traj, rng)
    dictionary = train_dictionary(images, args.textons, args.patches_per_image, args.epochs, rng=rng,
                                  patch_width=args.patch_size, patch_height=args.patch_size)
    fileio.save_dictionary(_out_path(args.out), dictionary, _flags(args))
    print(f"wrote {args.out}: {dictionary.size} textons of length {dictionary.patch_length}")
    return EXIT_OK


def cmd_build_dataset(args) -> int:
    _require(Path(args.floor) / "floor.ppm", args.dictionary, args.trajectory)
    floor = load_floor(args.floor)
    cam = _camera(args)
    dictionary = fileio.load_dictionary(args.dictionary)
    if args.trajectory:
        traj = read_trajectory_csv(args.trajectory)
    else:
        _check_positive(frames=args.frames, lanes=args.lanes)
        traj = training_trajectory(floor, cam, args.frames, args.lanes)
    ts = build_dataset(floor, cam, traj, dictionary, np.random.default_rng(args.seed))
    header = fileio.header_lines("build-dataset", _flags(args))
    fileio.write_dataset_csv(_out_path(args.out), ts, header)
    if args.save_trajectory:
        write_trajectory_csv(_out_path(args.save_trajectory), traj, header)
    print(f"wrote {args.out}: {len(ts)} histograms with {ts.n_bins} bins")
    return EXIT_OK


def cmd_eval_map(args) -> int:
    _require(args.dataset)
    _check_positive(sigma_x=args.sigma_x, sigma_y=args.sigma_y, cell_size=args.cell_size,
                    smoothing=args.smoothing)
    ts = fileio.read_dataset_csv(args.dataset)
    params = LossParams(args.sigma_x, args.sigma_y)
    loss = global_loss(ts, params)
    if args.out:
        xmin, ymin = ts.positions.min(axis=0)
        xmax, ymax = ts.positions.max(axis=0)
        pad = args.cell_size
        bounds = ArenaBounds(xmin - pad, xmax + pad, ymin - pad, ymax + pad)
        field = loss_map(ts, bounds, args.cell_size, params, args.smoothing)
        paths = fileio.write_loss_field(_out_path(args.out), field, params,
                                        fileio.header_lines("eval-map", _flags(args)))
        print("wrote " + ", ".join(str(p) for p in paths))
    print(repr(float(loss)))
    return EXIT_OK


def _load_environment(args) -> tuple[Environment, RunConfig]:
    _require(Path(args.floor) / "floor.ppm", args.dictionary, args.dataset)
    floor = load_floor(args.floor)
    dictionary = fileio.load_dictionary(args.dictionary)
    ts = fileio.read_dataset_csv(args.dataset)
    if ts.n_bins != dictionary.size:
        raise BinMismatchError(
            f"{args.dataset} has {ts.n_bins}-bin histograms but {args.dictionary} holds {dictionary.size} textons")
    cam = _camera(args, _recorded_flags(args.dataset))
    config = RunConfig(n_samples=args.samples, n_textons=dictionary.size, n_particles=args.particles, k=args.k,
                       patch_size=dictionary.patch_width, training_frames=len(ts), seed=args.seed,
                       drift=args.drift, test_frames=getattr(args, "test_frames", 415))
    env = Environment(floor, cam, dictionary, ts, Trajectory(ts.positions))
    return env, config


def cmd_localize(args) -> int:
    _require(args.test_trajectory, args.calibration_trajectory)
    env, config = _load_environment(args)
    cam_rng, cal_rng, test_rng = streams(args.seed + 7919, 3)
    if args.test_trajectory or args.calibration_trajectory:
        test = (read_trajectory_csv(args.test_trajectory) if args.test_trajectory
                else flight(env.floor, env.camera, config.test_frames, test_rng))
        cal = (read_trajectory_csv(args.calibration_trajectory) if args.calibration_trajectory
               else flight(env.floor, env.camera, args.calibration_frames, cal_rng))
        motion, mm = calibrate(env.training_set, env.floor, env.camera, env.dictionary, cal, config, cam_rng)
        result = run_localization(env.training_set, env.floor, env.camera, env.dictionary, test, config, motion, mm)
    else:
        result = flight_experiment(env, config, calibration_frames=args.calibration_frames)
    header = fileio.header_lines("localize", _flags(args))
    fileio.write_frames_csv(_out_path(args.out), result.records, header)
    if args.summary:
        fileio.write_summary_csv(_out_path(args.summary), result.summary, header)
    s = result.summary
    print(f"frames={s['frames']} mean_abs_error_x={s['mean_abs_error_x']:.4f} "
          f"mean_abs_error_y={s['mean_abs_error_y']:.4f} mean_loop_ms={s['mean_loop_ms']:.3f} "
          f"frequency_hz={s['frequency_hz']:.1f}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    env, config = _load_environment(args)
    try:
        values = [_samples(v) if args.axis == "samples" else int(v) for v in args.values.split(",")]
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(f"bad --values: {exc}") from None
    _check_positive(seeds=args.seeds)
    rows = benchmark_sweep(env, config, args.axis, values, range(args.seed, args.seed + args.seeds))
    write_benchmark_csv(_out_path(args.out), rows, fileio.header_lines("benchmark", _flags(args)))
    for r in rows:
        print(f"{args.axis}={r['value']} mean_abs_error={r['mean_abs_error']:.4f} "
              f"mean_loop_ms={r['mean_loop_ms']:.3f} frequency_hz={r['frequency_hz']:.1f}")
    return EXIT_OK


def cmd_landing(args) -> int:
    env, config = _load_environment(args)
    _check_positive(trials=args.trials, radius=args.radius, max_ticks=args.max_ticks)
    theta_x = args.theta if args.theta_x is None else args.theta_x
    theta_y = args.theta if args.theta_y is None else args.theta_y
    trials = landing_experiment(env, config, args.trials, zone_radius=args.radius,
                                thresholds=(theta_x, theta_y), max_ticks=args.max_ticks)
    write_landing_csv(_out_path(args.out), trials, fileio.header_lines("landing", _flags(args)))
    inside = sum(t.inside for t in trials)
    outliers = [round(t.outside_distance, 3) for t in trials if t.triggered and not t.inside]
    print(f"landed inside {inside}/{len(trials)}; triggered {sum(t.triggered for t in trials)}; "
          f"outlier distances (m): {outliers}")
    return EXIT_OK


def _add_camera(p, from_dataset: bool = False):
    g = p.add_argument_group("camera" + (" (defaults to the values recorded with the dataset)" if from_dataset else ""))
    d = CameraModel()
    g.add_argument("--footprint", type=float, default=None, help=f"floor width seen by the camera, m (default {d.footprint_width})")
    g.add_argument("--noise", type=float, default=None, help=f"pixel noise std (default {d.pixel_noise_sigma})")
    g.add_argument("--blur", type=int, default=None, help=f"box blur radius, px (default {d.blur_radius})")
    g.add_argument("--rotation", type=float, default=None, help="max random yaw, rad (default 0)")
    g.add_argument("--image-width", type=int, default=None, help=f"default {d.out_width}")
    g.add_argument("--image-height", type=int, default=None, help=f"default {d.out_height}")


def _add_run(p, samples_default=400):
    d = RunConfig()
    p.add_argument("--floor", required=True, help="directory with floor.ppm and floor.json")
    p.add_argument("--dictionary", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--samples", type=_samples, default=samples_default, help="patches per frame, or 'full'")
    p.add_argument("--particles", type=int, default=d.n_particles)
    p.add_argument("--k", type=int, default=d.k)
    p.add_argument("--drift", choices=("auto", "on", "off"), default=d.drift)
    p.add_argument("--seed", type=int, default=0)
    _add_camera(p, from_dataset=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="textonloc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    spec = TextureSpec()

    p = sub.add_parser("gen-floor", help="generate a synthetic floor map")
    p.add_argument("--size", type=_size, default=(5.0, 5.0), help="WIDTHxHEIGHT in metres (default 5x5)")
    p.add_argument("--mpp", type=float, default=0.005, help="metres per pixel")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--richness", type=float, default=spec.richness, help="texture contrast; 0 gives a constant floor")
    p.add_argument("--feature-scale", type=float, default=spec.feature_scale)
    p.add_argument("--color-variation", type=float, default=spec.color_variation)
    p.add_argument("--repeat-period", type=float, default=None, help="tile the texture with this period, m")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_floor)

    p = sub.add_parser("train-dictionary", help="learn a texton dictionary from an initial flight")
    p.add_argument("--floor", required=True)
    p.add_argument("--out", required=True, help="dictionary JSON path")
    p.add_argument("--textons", type=int, default=RunConfig().n_textons)
    p.add_argument("--images", type=int, default=DICTIONARY_IMAGES)
    p.add_argument("--patches-per-image", type=int, default=1000)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--patch-size", type=int, default=RunConfig().patch_size)
    p.add_argument("--speed", type=float, default=0.2, help="flight speed, m/tick")
    p.add_argument("--seed", type=int, default=0)
    _add_camera(p)
    p.set_defaults(func=cmd_train_dictionary)

    p = sub.add_parser("build-dataset", help="record full-sampling histograms along a sweep of the floor")
    p.add_argument("--floor", required=True)
    p.add_argument("--dictionary", required=True)
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.add_argument("--frames", type=int, default=RunConfig().training_frames)
    p.add_argument("--lanes", type=int, default=TRAINING_LANES)
    p.add_argument("--trajectory", default=None, help="tick,x,y CSV to use instead of the lawnmower sweep")
    p.add_argument("--save-trajectory", default=None, help="also write the trajectory used")
    p.add_argument("--seed", type=int, default=0)
    _add_camera(p)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("eval-map", help="global loss of a dataset; optional smoothed loss map")
    p.add_argument("--dataset", required=True)
    default_sigma = CameraModel().footprint_width
    p.add_argument("--sigma-x", type=float, default=default_sigma, help=f"m (default {default_sigma})")
    p.add_argument("--sigma-y", type=float, default=default_sigma, help=f"m (default {default_sigma})")
    p.add_argument("--cell-size", type=float, default=0.1)
    p.add_argument("--smoothing", type=float, default=None, help="kernel std, m (default 2 cells)")
    p.add_argument("--out", default=None, help="prefix for the .csv/.json/.pgm loss map")
    p.set_defaults(func=cmd_eval_map)

    p = sub.add_parser("localize", help="localize along a flight and log every frame")
    _add_run(p)
    p.add_argument("--test-frames", type=int, default=RunConfig().test_frames)
    p.add_argument("--test-trajectory", default=None, help="tick,x,y CSV flown instead of a random walk")
    p.add_argument("--calibration-frames", type=int, default=CALIBRATION_FRAMES)
    p.add_argument("--calibration-trajectory", default=None)
    p.add_argument("--out", required=True, help="per-frame CSV path")
    p.add_argument("--summary", default=None, help="summary CSV path")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("benchmark", help="speed/accuracy sweep along one parameter")
    _add_run(p)
    p.add_argument("--axis", choices=sorted(AXES), required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds, starting at --seed")
    p.add_argument("--test-frames", type=int, default=RunConfig().test_frames)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("landing", help="repeated triggered landings in random zones")
    _add_run(p)
    p.add_argument("--trials", type=int, default=6)
    p.add_argument("--radius", type=float, default=0.6, help="zone radius, m")
    p.add_argument("--theta", type=float, default=0.6, help="particle std threshold for both axes, m")
    p.add_argument("--theta-x", type=float, default=None)
    p.add_argument("--theta-y", type=float, default=None)
    p.add_argument("--max-ticks", type=int, default=1500)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_landing)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except BinMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
