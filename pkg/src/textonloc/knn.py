"""Exact k-nearest-neighbour position regression over texton histograms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """``N`` texton histograms paired with the ``(x, y)`` positions (m) they were seen at.

    Row order is significant: it breaks ties between equally distant entries.
    The same structure serves as the map dataset for environment evaluation.
    """

    histograms: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        hists = np.array(self.histograms, dtype=np.float64, ndmin=2)
        pos = np.array(self.positions, dtype=np.float64, ndmin=2)
        if hists.shape[0] < 1:
            raise ValueError("training set is empty")
        if pos.shape != (hists.shape[0], 2):
            raise ValueError(f"positions must have shape ({hists.shape[0]}, 2), got {pos.shape}")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(hists))):
            raise ValueError("histograms and positions must be finite")
        hists.setflags(write=False)
        pos.setflags(write=False)
        object.__setattr__(self, "histograms", hists)
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return self.histograms.shape[0]

    @property
    def n_bins(self) -> int:
        return self.histograms.shape[1]

    def subset(self, indices) -> "TrainingSet":
        indices = np.asarray(indices, dtype=np.intp)
        return TrainingSet(self.histograms[indices], self.positions[indices])


def fit(pairs: Iterable[tuple[Sequence[float], Sequence[float]]]) -> TrainingSet:
    """Build a :class:`TrainingSet` from ``(histogram, (x, y))`` pairs, keeping their order."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("training set is empty")
    hists = [np.asarray(h, dtype=np.float64).ravel() for h, _ in pairs]
    lengths = {len(h) for h in hists}
    if len(lengths) != 1:
        raise ValueError(f"histograms have inconsistent lengths {sorted(lengths)}")
    return TrainingSet(np.stack(hists), np.array([p for _, p in pairs], dtype=np.float64))


@dataclass(frozen=True)
class Prediction:
    """The ``k`` nearest training entries, closest first."""

    positions: np.ndarray  # (k, 2) metres
    distances: np.ndarray  # (k,)
    indices: np.ndarray  # (k,) rows of the training set

    @property
    def k(self) -> int:
        return len(self.distances)


def histogram_distances(ts: TrainingSet, query) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (ts.n_bins,):
        raise ValueError(f"query has shape {query.shape}, training set expects ({ts.n_bins},)")
    diff = ts.histograms - query
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def predict(ts: TrainingSet, query, k: int) -> Prediction:
    """Exact linear scan: the ``k`` entries nearest to ``query`` by Euclidean distance.

    Ties are resolved by training-set order.
    """
    if not 1 <= k <= len(ts):
        raise ValueError(f"k must lie in [1, {len(ts)}], got {k}")
    d = histogram_distances(ts, query)
    order = np.argsort(d, kind="stable")[:k]
    return Prediction(ts.positions[order], d[order], order)


@dataclass(frozen=True)
class MeasurementCovariances:
    """One 2x2 error covariance (m^2) per neighbour rank."""

    sigmas: np.ndarray  # (k, 2, 2)

    def __post_init__(self):
        sigmas = np.array(self.sigmas, dtype=np.float64, ndmin=3)
        if sigmas.ndim != 3 or sigmas.shape[1:] != (2, 2) or len(sigmas) < 1:
            raise ValueError(f"expected covariances of shape (k, 2, 2), got {sigmas.shape}")
        if not np.allclose(sigmas, sigmas.transpose(0, 2, 1)):
            raise ValueError("covariances must be symmetric")
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def k(self) -> int:
        return len(self.sigmas)

    def correlation(self, rank: int) -> float:
        s = self.sigmas[rank]
        denom = np.sqrt(s[0, 0] * s[1, 1])
        return float(s[0, 1] / denom) if denom > 0 else 0.0


def estimate_measurement_covariances(ground_truth, predictions: Sequence[Prediction]) -> MeasurementCovariances:
    """Per-rank sample covariance of ``truth - prediction`` over all timesteps.

    Uses the unbiased ``n - 1`` denominator.  A constant bias in the
    predictions does not enter the covariance.
    """
    truth = np.asarray(ground_truth, dtype=np.float64).reshape(-1, 2)
    if len(truth) != len(predictions):
        raise ValueError("ground truth and predictions differ in length")
    if len(truth) < 2:
        raise ValueError("need at least two samples to estimate a covariance")
    ks = {p.k for p in predictions}
    if len(ks) != 1:
        raise ValueError(f"predictions have differing k: {sorted(ks)}")
    predicted = np.stack([p.positions for p in predictions])  # (n, k, 2)
    errors = truth[:, None, :] - predicted
    sigmas = np.stack([np.cov(errors[:, j, :], rowvar=False, ddof=1) for j in range(predicted.shape[1])])
    return MeasurementCovariances(sigmas)
