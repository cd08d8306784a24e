"""Repeated triggered landings: fly until the filter says the vehicle is in the zone."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import filtering as pf
from ..config import RunConfig
from ..filtering import LandingZone, MeasurementModel, MotionModel
from ..knn import TrainingSet, predict
from ..textons import TextonDictionary, extract_histogram
from .camera import CameraModel, render_view
from .floor import FloorMap
from .pipeline import CALIBRATION_FRAMES, Environment, calibrate, check_consistency, flight, run_streams, sampling_mode
from .trajectory import random_walk

LANDING_SPEED = 0.1  # m/tick
LANDING_TURN_SIGMA = 0.5


@dataclass
class LandingTrial:
    trial: int
    center: tuple[float, float]
    triggered: bool
    tick: int  # ticks flown in this trial when it ended
    estimate: tuple[float, float]
    truth: tuple[float, float]
    uncertainty: tuple[float, float]
    zone: LandingZone

    @property
    def truth_distance(self) -> float:
        return float(np.hypot(self.truth[0] - self.center[0], self.truth[1] - self.center[1]))

    @property
    def inside(self) -> bool:
        """True position within the zone at the moment of landing."""
        return self.triggered and self.truth_distance <= self.zone.r

    @property
    def outside_distance(self) -> float:
        """How far outside the zone circumference the vehicle landed (0 inside)."""
        return max(0.0, self.truth_distance - self.zone.r)

    def predicate_holds(self) -> bool:
        return pf.landing_trigger(self.estimate, self.uncertainty, self.zone)


def landing_simulation(ts: TrainingSet, floor: FloorMap, cam: CameraModel, dictionary: TextonDictionary,
                       config: RunConfig, motion: MotionModel, mm: MeasurementModel, n_trials: int,
                       zone_radius: float = 0.6, thresholds: tuple[float, float] = (0.6, 0.6),
                       rng: np.random.Generator | None = None, max_ticks: int = 1500,
                       speed: float = LANDING_SPEED, turn_sigma: float = LANDING_TURN_SIGMA,
                       centers=None) -> list[LandingTrial]:
    """Run ``n_trials`` landings with one continuously running filter.

    Each trial draws a zone centre (unless ``centers`` are given), then flies
    a random walk from wherever the last one ended until the trigger fires
    or ``max_ticks`` pass.  The trigger is checked on every frame.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    check_consistency(ts, dictionary, config, mm)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    inner = cam.inner_bounds(floor.bounds)
    mode = sampling_mode(config.n_samples)
    state = pf.init_particles(config.n_particles, inner, rng)
    truth = np.array([rng.uniform(inner.x_min, inner.x_max), rng.uniform(inner.y_min, inner.y_max)])
    trials = []
    for trial in range(n_trials):
        if centers is not None:
            center = tuple(float(c) for c in centers[trial])
        else:
            center = (float(rng.uniform(inner.x_min, inner.x_max)), float(rng.uniform(inner.y_min, inner.y_max)))
        zone = LandingZone(center, zone_radius, *thresholds)
        path = random_walk(inner, max_ticks, speed, rng, turn_sigma=turn_sigma, start=truth)
        record = None
        for tick, truth in enumerate(path, start=1):
            z = predict(ts, extract_histogram(render_view(floor, cam, truth, rng), dictionary, mode, rng), config.k)
            new_state = pf.update(state, z.positions, motion, mm, rng)
            estimate = pf.map_estimate(new_state, z.positions, motion, mm, state)
            state = new_state
            unc = pf.uncertainty(state)
            fired = pf.landing_trigger(estimate, unc, zone)
            if fired or tick == max_ticks:
                record = LandingTrial(trial, center, fired, tick, estimate,
                                      (float(truth[0]), float(truth[1])), unc, zone)
                break
        trials.append(record)
    return trials


def landing_experiment(env: Environment, config: RunConfig, n_trials: int = 6,
                       calibration_frames: int = CALIBRATION_FRAMES, **kwargs) -> list[LandingTrial]:
    """Calibrate on a flight of the landing kind, then run :func:`landing_simulation`."""
    rngs = run_streams(config.seed)
    speed = kwargs.get("speed", LANDING_SPEED)
    turn = kwargs.get("turn_sigma", LANDING_TURN_SIGMA)
    cal = flight(env.floor, env.camera, calibration_frames, rngs[3], speed, turn)
    motion, mm = calibrate(env.training_set, env.floor, env.camera, env.dictionary, cal, config, rngs[5])
    return landing_simulation(env.training_set, env.floor, env.camera, env.dictionary, config, motion, mm,
                              n_trials, rng=rngs[2], **kwargs)


def write_landing_csv(path, trials, header_lines=()) -> None:
    with open(Path(path), "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["trial", "center_x", "center_y", "triggered", "ticks", "estimate_x", "estimate_y",
                    "truth_x", "truth_y", "std_x", "std_y", "inside", "outside_distance"])
        for t in trials:
            w.writerow([t.trial, *t.center, int(t.triggered), t.tick, *t.estimate, *t.truth, *t.uncertainty,
                        int(t.inside), t.outside_distance])
