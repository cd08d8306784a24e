"""Dataset construction, model calibration and the per-frame localization loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import filtering as pf
from ..config import BinMismatchError, RunConfig
from ..filtering import MeasurementModel, MotionModel
from ..images import ImageYuv
from ..knn import TrainingSet, estimate_measurement_covariances, predict
from ..textons import FullSampling, RandomSampling, TextonDictionary, extract_histogram, train_dictionary
from .camera import CameraModel, render_view
from .floor import FloorMap, TextureSpec, generate_floor
from .trajectory import Trajectory, make_trajectory

log = logging.getLogger(__name__)

DICTIONARY_IMAGES = 100
FLIGHT_SPEED = 0.05  # m/tick
CALIBRATION_FRAMES = 200
TRAINING_LANES = 9


def streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent generators derived from one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def run_streams(seed: int) -> list[np.random.Generator]:
    """Streams of one run: render, sampling, filter, calibration flight, test flight, calibration sampling."""
    return streams(seed, 6)


def sampling_mode(n_samples: int | None):
    return FullSampling() if n_samples is None else RandomSampling(n_samples)


def render_frames(floor: FloorMap, cam: CameraModel, traj: Trajectory, rng) -> list[ImageYuv]:
    return [render_view(floor, cam, p, rng) for p in traj.positions]


def build_dataset(floor: FloorMap, cam: CameraModel, traj: Trajectory, dictionary: TextonDictionary,
                  rng: np.random.Generator | None = None) -> TrainingSet:
    """Full-sampling histogram of a rendered frame at every trajectory point."""
    rng = np.random.default_rng(0) if rng is None else rng
    hists = np.empty((len(traj), dictionary.size))
    for i, p in enumerate(traj.positions):
        hists[i] = extract_histogram(render_view(floor, cam, p, rng), dictionary, FullSampling())
        if (i + 1) % 100 == 0:
            log.info("dataset: %d/%d frames", i + 1, len(traj))
    return TrainingSet(hists, traj.positions)


def training_trajectory(floor: FloorMap, cam: CameraModel, n_frames: int, lanes: int = TRAINING_LANES) -> Trajectory:
    """Lawnmower sweep over every reachable camera position, ``n_frames`` evenly spaced ticks."""
    return make_trajectory("waypoints", cam.inner_bounds(floor.bounds), n_frames, None, lanes=lanes)


def flight(floor: FloorMap, cam: CameraModel, n_frames: int, rng, speed: float = FLIGHT_SPEED,
           turn_sigma: float = 1.0) -> Trajectory:
    """Random-walk flight over the reachable part of the floor."""
    return make_trajectory("random_walk", cam.inner_bounds(floor.bounds), n_frames, speed, rng,
                           turn_sigma=turn_sigma)


@dataclass
class Environment:
    """Everything fixed before a flight: the floor, camera, dictionary and map dataset."""

    floor: FloorMap
    camera: CameraModel
    dictionary: TextonDictionary
    training_set: TrainingSet
    training_trajectory: Trajectory


def build_environment(config: RunConfig = RunConfig(), camera: CameraModel = CameraModel(),
                      texture: TextureSpec = TextureSpec(), meters_per_pixel: float = 0.005,
                      size: tuple[float, float] = (5.0, 5.0), floor_seed: int | None = None,
                      dictionary_images: int = DICTIONARY_IMAGES, patches_per_image: int = 1000,
                      epochs: int = 10) -> Environment:
    """Generate a floor, learn its dictionary from an initial flight, and record the map dataset."""
    seed = config.seed if floor_seed is None else floor_seed
    floor_rng, dict_rng, render_rng = streams(seed, 3)
    floor = generate_floor(pf.ArenaBounds(0.0, size[0], 0.0, size[1]), meters_per_pixel, texture, floor_rng)
    initial = flight(floor, camera, dictionary_images, dict_rng, speed=0.2)
    images = render_frames(floor, camera, initial, dict_rng)
    dictionary = train_dictionary(images, config.n_textons, patches_per_image, epochs, rng=dict_rng,
                                  patch_width=config.patch_size, patch_height=config.patch_size)
    traj = training_trajectory(floor, camera, config.training_frames)
    ts = build_dataset(floor, camera, traj, dictionary, render_rng)
    return Environment(floor, camera, dictionary, ts, traj)


def calibrate(ts: TrainingSet, floor: FloorMap, cam: CameraModel, dictionary: TextonDictionary,
              traj: Trajectory, config: RunConfig, rng: np.random.Generator,
              frames: Sequence[ImageYuv] | None = None) -> tuple[MotionModel, MeasurementModel]:
    """Fit the motion and measurement models on a ground-truth flight.

    Process noise comes from the forward differences of ``traj``; the
    rank-wise measurement covariances from k-NN predictions on its frames,
    extracted the same way as during localization.
    """
    motion = pf.estimate_process_noise(traj.positions)
    if config.drift == "off" or (config.drift == "auto" and not pf.has_drift(motion)):
        motion = motion.without_drift()
    mode = sampling_mode(config.n_samples)
    if frames is None:
        frames = render_frames(floor, cam, traj, rng)
    preds = [predict(ts, extract_histogram(img, dictionary, mode, rng), config.k) for img in frames]
    sigmas = estimate_measurement_covariances(traj.positions, preds)
    return motion, MeasurementModel(sigmas)


@dataclass
class FrameRecord:
    tick: int
    truth: tuple[float, float]
    z: np.ndarray  # (k, 2)
    z_distances: np.ndarray  # (k,)
    estimate: tuple[float, float]
    uncertainty: tuple[float, float]
    t_histogram: float
    t_knn: float
    t_filter: float
    t_map: float

    @property
    def t_loop(self) -> float:
        return self.t_histogram + self.t_knn + self.t_filter + self.t_map

    @property
    def error(self) -> tuple[float, float]:
        return self.estimate[0] - self.truth[0], self.estimate[1] - self.truth[1]


@dataclass
class RunResult:
    records: list[FrameRecord]
    config: RunConfig
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.summary:
            self.summary = summarize(self.records)

    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.records])


def summarize(records: Sequence[FrameRecord], skip: int = 0) -> dict:
    """Per-axis mean/std of absolute error, Euclidean RMSE and compute-only loop frequency."""
    recs = list(records)[skip:]
    err = np.abs(np.array([r.error for r in recs]))
    loop = np.array([r.t_loop for r in recs])
    return {
        "frames": len(recs),
        "mean_abs_error_x": float(err[:, 0].mean()),
        "mean_abs_error_y": float(err[:, 1].mean()),
        "std_abs_error_x": float(err[:, 0].std(ddof=1)) if len(recs) > 1 else 0.0,
        "std_abs_error_y": float(err[:, 1].std(ddof=1)) if len(recs) > 1 else 0.0,
        "rmse": float(np.sqrt(np.mean(np.sum(err**2, axis=1)))),
        "mean_loop_ms": float(loop.mean() * 1e3),
        "median_loop_ms": float(np.median(loop) * 1e3),
        "mean_histogram_ms": float(np.mean([r.t_histogram for r in recs]) * 1e3),
        "mean_knn_ms": float(np.mean([r.t_knn for r in recs]) * 1e3),
        "mean_filter_ms": float(np.mean([r.t_filter for r in recs]) * 1e3),
        "mean_map_ms": float(np.mean([r.t_map for r in recs]) * 1e3),
        "frequency_hz": float(1.0 / loop.mean()),
    }


def check_consistency(ts: TrainingSet, dictionary: TextonDictionary, config: RunConfig,
                      mm: MeasurementModel | None = None) -> None:
    if ts.n_bins != dictionary.size:
        raise BinMismatchError(f"training histograms have {ts.n_bins} bins, dictionary has {dictionary.size} textons")
    if config.n_textons != dictionary.size:
        raise BinMismatchError(f"config expects {config.n_textons} textons, dictionary has {dictionary.size}")
    if config.k > len(ts):
        raise ValueError(f"k={config.k} exceeds the training set size {len(ts)}")
    if mm is not None and mm.k != config.k:
        raise ValueError(f"measurement model has k={mm.k}, config has k={config.k}")


class Localizer:
    """The per-frame compute loop: histogram, k-NN, filter update and MAP estimate.

    Holds the particle state between frames.  Each :meth:`step` times its
    four stages separately.
    """

    def __init__(self, ts: TrainingSet, dictionary: TextonDictionary, config: RunConfig,
                 motion: MotionModel, mm: MeasurementModel, bounds: pf.ArenaBounds):
        check_consistency(ts, dictionary, config, mm)
        self.ts, self.dictionary, self.config = ts, dictionary, config
        self.motion, self.mm = motion, mm
        _, self._sample_rng, self._filter_rng = run_streams(config.seed)[:3]
        self._mode = sampling_mode(config.n_samples)
        self.state = pf.init_particles(config.n_particles, bounds, self._filter_rng)
        self.records: list[FrameRecord] = []

    def step(self, img: ImageYuv, truth) -> FrameRecord:
        clock = time.perf_counter
        t0 = clock()
        hist = extract_histogram(img, self.dictionary, self._mode, self._sample_rng)
        t1 = clock()
        pred = predict(self.ts, hist, self.config.k)
        t2 = clock()
        new_state = pf.update(self.state, pred.positions, self.motion, self.mm, self._filter_rng)
        t3 = clock()
        estimate = pf.map_estimate(new_state, pred.positions, self.motion, self.mm, self.state)
        t4 = clock()
        self.state = new_state
        rec = FrameRecord(len(self.records), (float(truth[0]), float(truth[1])), pred.positions, pred.distances,
                          estimate, pf.uncertainty(new_state), t1 - t0, t2 - t1, t3 - t2, t4 - t3)
        self.records.append(rec)
        return rec

    def result(self) -> RunResult:
        return RunResult(list(self.records), self.config)


def run_localization(ts: TrainingSet, floor: FloorMap, cam: CameraModel, dictionary: TextonDictionary,
                     test_traj: Trajectory, config: RunConfig, motion: MotionModel, mm: MeasurementModel,
                     frames: Sequence[ImageYuv] | None = None) -> RunResult:
    """Run the camera -> histogram -> k-NN -> filter -> MAP loop over ``test_traj``.

    Only the four compute stages are timed; rendering stands in for image
    acquisition.  Pre-rendered ``frames`` may be passed to share the same
    images across runs.
    """
    loc = Localizer(ts, dictionary, config, motion, mm, cam.inner_bounds(floor.bounds))
    render_rng = run_streams(config.seed)[0]
    for tick, truth in enumerate(test_traj.positions):
        img = frames[tick] if frames is not None else render_view(floor, cam, truth, render_rng)
        loc.step(img, truth)
    return loc.result()


def flight_frames(env: Environment, config: RunConfig, calibration_frames: int = CALIBRATION_FRAMES,
                  speed: float = FLIGHT_SPEED, turn_sigma: float = 1.0):
    """Calibration and test flights for ``config.seed``, with their rendered frames."""
    rngs = run_streams(config.seed)
    cal = flight(env.floor, env.camera, calibration_frames, rngs[3], speed, turn_sigma)
    test = flight(env.floor, env.camera, config.test_frames, rngs[4], speed, turn_sigma)
    return (cal, render_frames(env.floor, env.camera, cal, rngs[3]),
            test, render_frames(env.floor, env.camera, test, rngs[0]))


def flight_experiment(env: Environment, config: RunConfig, training_set: TrainingSet | None = None,
                      flights=None, **flight_kwargs) -> RunResult:
    """Calibrate on one random flight, then localize along another.

    ``flights`` is the output of :func:`flight_frames` and lets sweeps reuse
    the same rendered images across configurations.
    """
    return lockstep_experiments(env, [config], [training_set], flights, **flight_kwargs)[0]


def lockstep_experiments(env: Environment, configs: Sequence[RunConfig],
                         training_sets: Sequence[TrainingSet | None] | None = None,
                         flights=None, **flight_kwargs) -> list[RunResult]:
    """Several :func:`flight_experiment` runs over the same flights, advanced frame by frame together.

    All configurations must share a seed.  Interleaving the runs exposes
    them to the same machine load, so their timings can be compared
    directly; the order rotates every frame.  Results match separate runs.
    """
    if not configs:
        raise ValueError("no configurations given")
    if len({c.seed for c in configs}) != 1:
        raise ValueError("lockstep runs must share one seed")
    if training_sets is None:
        training_sets = [None] * len(configs)
    if flights is None:
        flights = flight_frames(env, configs[0], **flight_kwargs)
    cal, cal_frames, test, test_frames = flights
    bounds = env.camera.inner_bounds(env.floor.bounds)
    runs = []
    for config, ts in zip(configs, training_sets):
        ts = env.training_set if ts is None else ts
        motion, mm = calibrate(ts, env.floor, env.camera, env.dictionary, cal, config,
                               run_streams(config.seed)[5], cal_frames)
        runs.append(Localizer(ts, env.dictionary, config, motion, mm, bounds))
    n = len(runs)
    for tick, (img, truth) in enumerate(zip(test_frames, test.positions)):
        for j in range(n):
            runs[(tick + j) % n].step(img, truth)
    return [r.result() for r in runs]
