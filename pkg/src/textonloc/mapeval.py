"""Environment suitability: compare actual histogram similarity with an ideal one.

The ideal similarity of two samples is a separable, non-normalised Gaussian
of their position offset.  The loss of a dataset is the mean, over all
ordered pairs, of cosine similarity minus ideal similarity.  Lower is
better: textures that differ more than the ideal pattern demands push the
loss down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filtering import ArenaBounds
from .knn import TrainingSet


@dataclass(frozen=True)
class LossParams:
    sigma_x: float
    sigma_y: float

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise ValueError("sigma_x and sigma_y must be positive")


def cosine_similarity(h_i, h_j) -> float:
    a = np.asarray(h_i, dtype=np.float64)
    b = np.asarray(h_j, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("histograms differ in length")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero histogram")
    return float(a @ b / (na * nb))


def ideal_similarity(pos_i, pos_j, params: LossParams) -> float:
    dx = pos_i[0] - pos_j[0]
    dy = pos_i[1] - pos_j[1]
    return float(np.exp(-dx * dx / (2 * params.sigma_x**2)) * np.exp(-dy * dy / (2 * params.sigma_y**2)))


def _similarity_matrices(ds: TrainingSet, params: LossParams) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(ds.histograms, axis=1)
    if np.any(norms == 0):
        raise ValueError("dataset contains a zero histogram")
    unit = ds.histograms / norms[:, None]
    cs = unit @ unit.T
    np.fill_diagonal(cs, 1.0)  # exact self-similarity, free of rounding
    dx = ds.positions[:, 0, None] - ds.positions[None, :, 0]
    dy = ds.positions[:, 1, None] - ds.positions[None, :, 1]
    de = np.exp(-dx * dx / (2 * params.sigma_x**2)) * np.exp(-dy * dy / (2 * params.sigma_y**2))
    return cs, de


def local_losses(ds: TrainingSet, params: LossParams) -> np.ndarray:
    """Loss of every sample against the whole dataset."""
    cs, de = _similarity_matrices(ds, params)
    return (cs - de).mean(axis=1)


def local_loss(ds: TrainingSet, i: int, params: LossParams) -> float:
    n = len(ds)
    if not -n <= i < n:
        raise IndexError(f"sample index {i} out of range for {n} entries")
    h, p = ds.histograms, ds.positions
    unit = h / np.linalg.norm(h, axis=1)[:, None]
    cs = unit @ unit[i]
    cs[i] = 1.0
    de = np.exp(-((p[:, 0] - p[i, 0]) ** 2) / (2 * params.sigma_x**2)) * np.exp(
        -((p[:, 1] - p[i, 1]) ** 2) / (2 * params.sigma_y**2)
    )
    return float(np.mean(cs - de))


def global_loss(ds: TrainingSet, params: LossParams) -> float:
    return float(local_losses(ds, params).mean())


@dataclass(frozen=True)
class LossField:
    """Smoothed local loss on a regular grid over the arena.

    ``grid[r, c]`` is the loss at cell centre ``(x_min + (c + .5) * cell_size,
    y_min + (r + .5) * cell_size)``; rows run along y.  Cells farther than the
    kernel cut-off from every sample hold NaN.  ``mass`` keeps the total
    kernel weight behind each cell, i.e. how much data supports it.
    """

    local_losses: np.ndarray
    grid: np.ndarray
    mass: np.ndarray
    bounds: ArenaBounds
    cell_size: float
    smoothing_sigma: float

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.grid.shape
        xs = self.bounds.x_min + (np.arange(nx) + 0.5) * self.cell_size
        ys = self.bounds.y_min + (np.arange(ny) + 0.5) * self.cell_size
        return xs, ys

    def value_at(self, x: float, y: float) -> float:
        c = int(np.clip((x - self.bounds.x_min) // self.cell_size, 0, self.grid.shape[1] - 1))
        r = int(np.clip((y - self.bounds.y_min) // self.cell_size, 0, self.grid.shape[0] - 1))
        return float(self.grid[r, c])


def loss_map(ds: TrainingSet, bounds: ArenaBounds, cell_size: float, params: LossParams,
             smoothing_sigma: float | None = None, truncate: float = 3.0) -> LossField:
    """Gaussian-kernel-weighted average of the local losses at every grid cell.

    The kernel is cut off at ``truncate`` standard deviations, like a
    truncated Gaussian filter.  ``smoothing_sigma`` defaults to two cells.
    """
    if not cell_size > 0:
        raise ValueError("cell_size must be positive")
    if len(ds) < 1:
        raise ValueError("empty dataset")
    sigma = 2.0 * cell_size if smoothing_sigma is None else smoothing_sigma
    if not sigma > 0:
        raise ValueError("smoothing_sigma must be positive")
    losses = local_losses(ds, params)
    nx = max(1, int(np.ceil(bounds.width / cell_size - 1e-9)))
    ny = max(1, int(np.ceil(bounds.height / cell_size - 1e-9)))
    xs = bounds.x_min + (np.arange(nx) + 0.5) * cell_size
    ys = bounds.y_min + (np.arange(ny) + 0.5) * cell_size
    grid = np.full((ny, nx), np.nan)
    mass = np.zeros((ny, nx))
    px, py = ds.positions[:, 0], ds.positions[:, 1]
    cutoff2 = (truncate * sigma) ** 2
    # one grid row at a time keeps memory at O(nx * N)
    for r, y in enumerate(ys):
        d2 = (xs[:, None] - px[None, :]) ** 2 + (y - py[None, :]) ** 2
        k = np.where(d2 <= cutoff2, np.exp(-d2 / (2 * sigma * sigma)), 0.0)
        total = k.sum(axis=1)
        mass[r] = total
        covered = total > 0
        grid[r, covered] = (k[covered] @ losses) / total[covered]
    return LossField(losses, grid, mass, bounds, float(cell_size), float(sigma))
