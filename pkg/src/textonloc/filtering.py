"""Particle filter over 2D position with a Gaussian-mixture measurement model.

Each k-NN neighbour contributes one bivariate Gaussian whose covariance
depends on the neighbour's rank.  The motion model is pure Gaussian process
noise around an optional mean step.  Every update resamples with Thrun's
resampling wheel, so particles leave :func:`update` equally weighted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .knn import MeasurementCovariances

# floor on covariance eigenvalues before inversion or sampling (m^2)
REGULARIZATION = 1e-6
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ArenaBounds:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not all(np.isfinite(vals)):
            raise ValueError("bounds must be finite")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"invalid bounds {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def shrink(self, dx: float, dy: float) -> "ArenaBounds":
        return ArenaBounds(self.x_min + dx, self.x_max - dx, self.y_min + dy, self.y_max - dy)

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return (
            (p[:, 0] >= self.x_min - tol) & (p[:, 0] <= self.x_max + tol)
            & (p[:, 1] >= self.y_min - tol) & (p[:, 1] <= self.y_max + tol)
        )


@dataclass(frozen=True)
class Particle:
    x: float
    y: float
    weight: float


@dataclass(frozen=True, eq=False)
class FilterState:
    """``M`` weighted particles approximating the position posterior at step ``t``."""

    positions: np.ndarray  # (M, 2)
    weights: np.ndarray  # (M,)
    t: int = 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64, ndmin=2)
        w = np.array(self.weights, dtype=np.float64, ndmin=1)
        if pos.ndim != 2 or pos.shape[1] != 2 or len(pos) < 1:
            raise ValueError("positions must have shape (M, 2) with M >= 1")
        if w.shape != (len(pos),):
            raise ValueError("one weight per particle required")
        if not np.all(np.isfinite(pos)):
            raise ValueError("particle positions must be finite")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @property
    def n_particles(self) -> int:
        return len(self.positions)

    @property
    def particles(self) -> list[Particle]:
        return [Particle(float(x), float(y), float(w)) for (x, y), w in zip(self.positions, self.weights)]


@dataclass(frozen=True)
class MotionModel:
    mean_step: np.ndarray  # (2,) metres per tick
    sigma_process: np.ndarray  # (2, 2) m^2

    def __post_init__(self):
        mean = np.asarray(self.mean_step, dtype=np.float64).reshape(2)
        sigma = np.asarray(self.sigma_process, dtype=np.float64).reshape(2, 2)
        _check_covariance(sigma, "sigma_process")
        object.__setattr__(self, "mean_step", mean)
        object.__setattr__(self, "sigma_process", sigma)

    @classmethod
    def isotropic(cls, std: float, mean_step=(0.0, 0.0)) -> "MotionModel":
        return cls(np.asarray(mean_step, dtype=float), np.eye(2) * std**2)

    def without_drift(self) -> "MotionModel":
        return MotionModel(np.zeros(2), self.sigma_process)


@dataclass(frozen=True)
class MeasurementModel:
    """Rank-dependent Gaussian-mixture measurement model."""

    covariances: MeasurementCovariances

    def __post_init__(self):
        for j, s in enumerate(self.covariances.sigmas):
            _check_covariance(s, f"sigma[{j}]")

    @classmethod
    def isotropic(cls, std: float, k: int = 1) -> "MeasurementModel":
        return cls(MeasurementCovariances(np.repeat(np.eye(2)[None] * std**2, k, axis=0)))

    @property
    def k(self) -> int:
        return self.covariances.k

    @property
    def sigmas(self) -> np.ndarray:
        return self.covariances.sigmas


@dataclass(frozen=True)
class LandingZone:
    center: tuple[float, float]
    r: float
    theta_x: float
    theta_y: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("landing zone radius must be positive")
        if self.theta_x < 0 or self.theta_y < 0:
            raise ValueError("thresholds must be non-negative")


def _check_covariance(sigma: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(sigma)):
        raise ValueError(f"{name} must be finite")
    if not np.allclose(sigma, sigma.T):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(sigma).min() < -1e-9:
        raise ValueError(f"{name} must be positive semi-definite")


def _regularized(sigma: np.ndarray) -> np.ndarray:
    """Raise eigenvalues below ``REGULARIZATION`` to it; well-conditioned matrices pass unchanged."""
    vals, vecs = np.linalg.eigh(sigma)
    if vals.min() >= REGULARIZATION:
        return sigma
    return (vecs * np.maximum(vals, REGULARIZATION)) @ vecs.T


def gaussian_logpdf(points, mean, sigma) -> np.ndarray:
    """Log density of N(mean, sigma) at each row of ``points``, sigma regularized."""
    s = _regularized(np.asarray(sigma, dtype=np.float64))
    diff = np.asarray(points, dtype=np.float64).reshape(-1, 2) - np.asarray(mean, dtype=np.float64)
    inv = np.linalg.inv(s)
    maha = np.einsum("ni,ij,nj->n", diff, inv, diff)
    return -0.5 * maha - _LOG_2PI - 0.5 * np.log(np.linalg.det(s))


def _check_measurements(z, mm: MeasurementModel) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64).reshape(-1, 2)
    if len(z) != mm.k:
        raise ValueError(f"got {len(z)} measurements, measurement model has k={mm.k}")
    return z


def gmm_log_weights(positions, z, mm: MeasurementModel) -> np.ndarray:
    """``log sum_i N(z_i; x_m, Sigma_i)`` for every particle position ``x_m``."""
    z = _check_measurements(z, mm)
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    terms = np.stack([gaussian_logpdf(positions, z[i], mm.sigmas[i]) for i in range(mm.k)])
    return logsumexp(terms, axis=0)


def gmm_weight(particle_pos, z, mm: MeasurementModel) -> float:
    """Sum over neighbours of the normalised bivariate Gaussian density of each measurement."""
    return float(np.exp(gmm_log_weights(particle_pos, z, mm))[0])


def init_particles(n_particles: int, bounds: ArenaBounds, rng: np.random.Generator) -> FilterState:
    if n_particles < 1:
        raise ValueError("need at least one particle")
    xs = rng.uniform(bounds.x_min, bounds.x_max, n_particles)
    ys = rng.uniform(bounds.y_min, bounds.y_max, n_particles)
    return FilterState(np.column_stack([xs, ys]), np.full(n_particles, 1.0 / n_particles), 0)


def estimate_process_noise(trajectory) -> MotionModel:
    """Mean and sample covariance of the forward differences of a ground-truth track."""
    traj = np.asarray(trajectory, dtype=np.float64).reshape(-1, 2)
    if len(traj) < 3:
        raise ValueError("need at least three positions to estimate process noise")
    steps = np.diff(traj, axis=0)
    return MotionModel(steps.mean(axis=0), np.cov(steps, rowvar=False, ddof=1))


def has_drift(motion: MotionModel, ratio: float = 0.5) -> bool:
    """Whether the mean step is large next to the step spread.

    A wandering flight has a small non-zero sample mean that would turn into
    a steady bias if fed to the predictor; genuine drift dominates the spread.
    """
    spread = np.sqrt(np.trace(motion.sigma_process))
    return bool(np.linalg.norm(motion.mean_step) > ratio * spread)


def resampling_wheel(weights, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Indices of ``n`` draws (default: one per particle) from Thrun's resampling wheel.

    Particles own arcs of a circle in proportion to their weight.  The wheel
    advances by uniform steps in ``[0, 2 w_max)`` and each stop selects the
    arc it lands on.  The first stop is measured from a uniformly random
    point of the circle rather than from the start of a random particle's
    arc; otherwise heavy particles are under-selected when there are few of
    them.  The walk is evaluated in closed form from cumulative sums.
    Weights need not be normalised.
    """
    w = _check_weights(weights)
    m = len(w)
    n = m if n is None else n
    cum = np.cumsum(w)
    total = cum[-1]
    start = rng.uniform(0.0, total)
    steps = rng.uniform(0.0, 2.0 * w.max(), size=n)
    stops = np.mod(start + np.cumsum(steps), total)
    # arcs are closed on the right, matching the "while beta > w[index]" walk
    idx = np.searchsorted(cum, stops, side="left")
    return np.minimum(idx, m - 1)


def _resampling_wheel_loop(weights, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Particle-by-particle walk of the same wheel; reference for :func:`resampling_wheel`."""
    w = _check_weights(weights)
    m = len(w)
    n = m if n is None else n
    cum = np.cumsum(w)
    start = rng.uniform(0.0, cum[-1])
    steps = rng.uniform(0.0, 2.0 * w.max(), size=n)
    index = int(np.searchsorted(cum, start, side="left"))
    beta = start - (cum[index] - w[index])
    out = np.empty(n, dtype=np.intp)
    for j, step in enumerate(steps.tolist()):
        beta += step
        while beta > w[index]:
            beta -= w[index]
            index = (index + 1) % m
        out[j] = index
    return out


def _check_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64).ravel()
    if len(w) < 1:
        raise ValueError("no particles to resample")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    if w.max() <= 0:
        raise ValueError("all particle weights are zero")
    return w


def predict_particles(state: FilterState, motion: MotionModel, rng: np.random.Generator) -> np.ndarray:
    chol = np.linalg.cholesky(_regularized(motion.sigma_process))
    noise = rng.standard_normal((state.n_particles, 2)) @ chol.T
    return state.positions + motion.mean_step + noise


def update(state: FilterState, z, motion: MotionModel, mm: MeasurementModel,
           rng: np.random.Generator) -> FilterState:
    """One predict / weight / resample cycle.

    Weights are formed in the log domain and rescaled by their maximum
    before resampling, so a measurement far from every particle still yields
    a valid proportional draw instead of an all-zero weight vector.
    """
    z = _check_measurements(z, mm)
    moved = predict_particles(state, motion, rng)
    logw = gmm_log_weights(moved, z, mm)
    weights = np.exp(logw - logw.max())
    idx = resampling_wheel(weights, rng)
    m = state.n_particles
    return FilterState(moved[idx], np.full(m, 1.0 / m), state.t + 1)


def map_scores(state: FilterState, z, motion: MotionModel, mm: MeasurementModel,
               previous: FilterState) -> np.ndarray:
    """Log of measurement likelihood times predicted prior density for every particle."""
    log_lik = gmm_log_weights(state.positions, z, mm)
    chol = np.linalg.cholesky(_regularized(motion.sigma_process))
    # whiten so the Mahalanobis distance becomes a squared Euclidean one
    a = solve_triangular(chol, state.positions.T, lower=True).T
    b = solve_triangular(chol, (previous.positions + motion.mean_step).T, lower=True).T
    maha = cdist(a, b, "sqeuclidean")  # (M, M')
    log_kernel = -0.5 * maha - _LOG_2PI - np.log(np.diag(chol)).sum()
    with np.errstate(divide="ignore"):
        log_prev_w = np.log(previous.weights / previous.weights.sum())
    log_prior = logsumexp(log_kernel + log_prev_w[None, :], axis=1)
    return log_lik + log_prior


def map_estimate(state: FilterState, z, motion: MotionModel, mm: MeasurementModel,
                 previous: FilterState) -> tuple[float, float]:
    """Position of the particle with the highest approximate posterior density."""
    best = int(np.argmax(map_scores(state, z, motion, mm, previous)))
    x, y = state.positions[best]
    return float(x), float(y)


def uncertainty(state: FilterState) -> tuple[float, float]:
    """Per-axis sample standard deviation of the particle cloud; ``(0, 0)`` for one particle."""
    if state.n_particles < 2:
        return 0.0, 0.0
    sx, sy = state.positions.std(axis=0, ddof=1)
    return float(sx), float(sy)


def landing_trigger(estimate, unc, zone: LandingZone) -> bool:
    dist = np.hypot(estimate[0] - zone.center[0], estimate[1] - zone.center[1])
    return bool(dist <= zone.r and unc[0] < zone.theta_x and unc[1] < zone.theta_y)
