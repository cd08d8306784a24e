"""Texton dictionaries and texton-histogram features.

A patch is a flat vector holding the patch's Y block, then its U block, then
its V block, each block in row-major order.  A 6x6 patch therefore has 108
entries.  Dictionaries are learned with a one-dimensional Kohonen ring; the
trained unit positions are the textons.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .images import ImageYuv

log = logging.getLogger(__name__)

N_CHANNELS = 3
DEFAULT_PATCH_SIZE = 6
# rows of patch positions labelled per block in full sampling; bounds memory
_FULL_BLOCK_ROWS = 48
_RANDOM_CHUNK = 20000


@dataclass(frozen=True, eq=False)
class TextonDictionary:
    """``T`` prototype patches learned from images of one environment."""

    textons: np.ndarray
    patch_width: int = DEFAULT_PATCH_SIZE
    patch_height: int = DEFAULT_PATCH_SIZE

    def __post_init__(self):
        textons = np.array(self.textons, dtype=np.float64, ndmin=2)
        if self.patch_width < 1 or self.patch_height < 1:
            raise ValueError("patch dimensions must be positive")
        if textons.shape[0] < 1:
            raise ValueError("a dictionary needs at least one texton")
        if textons.shape[1] != self.patch_length:
            raise ValueError(
                f"textons have length {textons.shape[1]}, expected {self.patch_length} "
                f"for {self.patch_width}x{self.patch_height} patches"
            )
        if not np.all(np.isfinite(textons)):
            raise ValueError("textons must be finite")
        textons.setflags(write=False)
        object.__setattr__(self, "textons", textons)

    @property
    def size(self) -> int:
        return self.textons.shape[0]

    @property
    def patch_length(self) -> int:
        return N_CHANNELS * self.patch_width * self.patch_height

    def __len__(self):
        return self.size

    def __eq__(self, other):
        if not isinstance(other, TextonDictionary):
            return NotImplemented
        return (
            self.patch_width == other.patch_width
            and self.patch_height == other.patch_height
            and np.array_equal(self.textons, other.textons)
        )

    __hash__ = None


@dataclass(frozen=True)
class FullSampling:
    """Label every valid patch position of the image."""


@dataclass(frozen=True)
class RandomSampling:
    """Label ``n_samples`` uniformly drawn patch positions (with replacement)."""

    n_samples: int
    seed: int | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


SamplingMode = Union[FullSampling, RandomSampling]


def _check_fits(width, height, w_p, h_p):
    if w_p < 1 or h_p < 1:
        raise ValueError("patch dimensions must be positive")
    if width < w_p or height < h_p:
        raise ValueError(f"{w_p}x{h_p} patch does not fit in a {width}x{height} image")


def full_patch_positions(width: int, height: int, w_p: int, h_p: int) -> np.ndarray:
    """All top-left patch positions as an ``(n, 2)`` array of ``(x, y)``, row-major."""
    _check_fits(width, height, w_p, h_p)
    ys, xs = np.mgrid[0 : height - h_p + 1, 0 : width - w_p + 1]
    return np.column_stack([xs.ravel(), ys.ravel()])


def sample_patch_positions(width, height, w_p, h_p, n, rng: np.random.Generator) -> np.ndarray:
    """``n`` top-left positions drawn uniformly, with replacement, from the valid grid."""
    _check_fits(width, height, w_p, h_p)
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = rng.integers(0, width - w_p + 1, size=n)
    ys = rng.integers(0, height - h_p + 1, size=n)
    return np.column_stack([xs, ys])


def extract_patch(img: ImageYuv, x: int, y: int, w_p: int = DEFAULT_PATCH_SIZE,
                  h_p: int = DEFAULT_PATCH_SIZE) -> np.ndarray:
    if x < 0 or y < 0 or x + w_p > img.width or y + h_p > img.height:
        raise IndexError(f"{w_p}x{h_p} patch at ({x}, {y}) leaves the {img.width}x{img.height} image")
    return img.data[:, y : y + h_p, x : x + w_p].astype(np.float64).ravel()


def extract_patches(img: ImageYuv, positions: np.ndarray, w_p: int = DEFAULT_PATCH_SIZE,
                    h_p: int = DEFAULT_PATCH_SIZE) -> np.ndarray:
    """Gather patches at many positions into an ``(n, 3*w_p*h_p)`` matrix."""
    positions = np.asarray(positions, dtype=np.intp).reshape(-1, 2)
    xs, ys = positions[:, 0], positions[:, 1]
    if len(positions) and (
        xs.min() < 0 or ys.min() < 0 or xs.max() + w_p > img.width or ys.max() + h_p > img.height
    ):
        raise IndexError("patch position outside the image")
    rows = ys[:, None, None] + np.arange(h_p)[None, :, None]
    cols = xs[:, None, None] + np.arange(w_p)[None, None, :]
    # (3, n, h_p, w_p) -> (n, 3, h_p, w_p)
    block = img.data[:, rows, cols].transpose(1, 0, 2, 3)
    return block.reshape(len(positions), -1).astype(np.float64)


def nearest_texton(dictionary: TextonDictionary, patch) -> int:
    """Index of the texton closest to ``patch`` in Euclidean distance; lowest index on ties."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.shape != (dictionary.patch_length,):
        raise ValueError(f"patch has shape {patch.shape}, dictionary expects ({dictionary.patch_length},)")
    d2 = np.sum((dictionary.textons - patch) ** 2, axis=1)
    return int(np.argmin(d2))


def assign_textons(dictionary: TextonDictionary, patches: np.ndarray) -> np.ndarray:
    """Nearest-texton labels for every row of ``patches``.

    Uses the expansion ``|t|^2 - 2 p.t``, which has the same argmin as the
    full squared distance.
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 2 or patches.shape[1] != dictionary.patch_length:
        raise ValueError(f"patches must have shape (n, {dictionary.patch_length})")
    t = dictionary.textons
    score = np.sum(t * t, axis=1) - 2.0 * (patches @ t.T)
    return np.argmin(score, axis=1)


def _full_counts(img: ImageYuv, dictionary: TextonDictionary) -> np.ndarray:
    """Texton counts over every patch position.

    Works in float32 on intensities centred at 128, which keeps the dot
    products small enough that labels only differ from the float64 path on
    near-exact ties.
    """
    w_p, h_p = dictionary.patch_width, dictionary.patch_height
    centred = img.data.astype(np.float32) - np.float32(128.0)
    t = (dictionary.textons - 128.0).astype(np.float32)
    t_sq = np.sum(t * t, axis=1)
    windows = sliding_window_view(centred, (h_p, w_p), axis=(1, 2))
    # (3, H', W', h_p, w_p) -> (H', W', 3, h_p, w_p)
    windows = windows.transpose(1, 2, 0, 3, 4)
    counts = np.zeros(dictionary.size, dtype=np.int64)
    for r0 in range(0, windows.shape[0], _FULL_BLOCK_ROWS):
        block = windows[r0 : r0 + _FULL_BLOCK_ROWS].reshape(-1, dictionary.patch_length)
        labels = np.argmin(t_sq - 2.0 * (block @ t.T), axis=1)
        counts += np.bincount(labels, minlength=dictionary.size)
    return counts


def extract_histogram(img: ImageYuv, dictionary: TextonDictionary,
                      mode: SamplingMode = FullSampling(),
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """Relative frequencies of nearest textons over the sampled patches of ``img``.

    For :class:`RandomSampling` the positions come from ``rng`` when given,
    otherwise from a generator seeded with ``mode.seed``.
    """
    w_p, h_p = dictionary.patch_width, dictionary.patch_height
    _check_fits(img.width, img.height, w_p, h_p)
    if isinstance(mode, FullSampling):
        counts = _full_counts(img, dictionary)
    elif isinstance(mode, RandomSampling):
        if rng is None:
            rng = np.random.default_rng(mode.seed)
        positions = sample_patch_positions(img.width, img.height, w_p, h_p, mode.n_samples, rng)
        counts = np.zeros(dictionary.size, dtype=np.int64)
        for i in range(0, len(positions), _RANDOM_CHUNK):
            labels = assign_textons(dictionary, extract_patches(img, positions[i : i + _RANDOM_CHUNK], w_p, h_p))
            counts += np.bincount(labels, minlength=dictionary.size)
    else:
        raise TypeError(f"unknown sampling mode {mode!r}")
    return counts / counts.sum()


# -- dictionary learning -----------------------------------------------------


def ring_distances(n_units: int) -> np.ndarray:
    idx = np.arange(n_units)
    d = np.abs(idx[:, None] - idx[None, :])
    return np.minimum(d, n_units - d)


def train_kohonen(samples: np.ndarray, n_units: int, epochs: int = 10,
                  lr: tuple[float, float] = (0.5, 0.01),
                  radius: tuple[float, float] | None = None,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Train a 1-D Kohonen ring on the rows of ``samples`` and return its unit vectors.

    Units start at ``n_units`` randomly chosen samples.  Every epoch visits
    the samples in a fresh random order.  The learning rate and the Gaussian
    neighbourhood radius decay linearly from their start to end values over
    the whole run; at radius 0 only the winning unit moves, so the final
    phase is online k-means.
    """
    rng = np.random.default_rng() if rng is None else rng
    samples = np.asarray(samples, dtype=np.float64)
    n = len(samples)
    if n < 1:
        raise ValueError("no training samples")
    if n_units < 1:
        raise ValueError("n_units must be >= 1")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if radius is None:
        radius = (n_units / 2.0, 0.0)

    weights = samples[rng.choice(n, size=n_units, replace=n < n_units)].copy()
    ring2 = ring_distances(n_units).astype(np.float64) ** 2
    total = epochs * n
    lr0, lr1 = lr
    r0, r1 = radius
    step = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            frac = step / max(total - 1, 1)
            rate = lr0 + (lr1 - lr0) * frac
            r = r0 + (r1 - r0) * frac
            x = samples[i]
            diff = x - weights
            winner = int(np.argmin(np.einsum("ij,ij->i", diff, diff)))
            # below this radius the nearest neighbour gets < 1e-12 of the update
            if r < 0.135:
                weights[winner] += rate * diff[winner]
            else:
                h = np.exp(-ring2[winner] / (2.0 * r * r))
                weights += (rate * h)[:, None] * diff
            step += 1
    return weights


def sample_training_patches(images: Sequence[ImageYuv], patches_per_image: int,
                            w_p: int, h_p: int, rng: np.random.Generator) -> np.ndarray:
    blocks = []
    for img in images:
        _check_fits(img.width, img.height, w_p, h_p)
        positions = sample_patch_positions(img.width, img.height, w_p, h_p, patches_per_image, rng)
        blocks.append(extract_patches(img, positions, w_p, h_p))
    return np.concatenate(blocks)


def train_dictionary(images: Sequence[ImageYuv], n_textons: int = 20,
                     patches_per_image: int = 1000, epochs: int = 10,
                     lr: tuple[float, float] = (0.5, 0.01),
                     radius: tuple[float, float] | None = None,
                     rng: np.random.Generator | None = None,
                     patch_width: int = DEFAULT_PATCH_SIZE,
                     patch_height: int = DEFAULT_PATCH_SIZE) -> TextonDictionary:
    """Learn a texton dictionary from randomly sampled patches of ``images``.

    The defaults mirror the reference setup: 1,000 patches from each of the
    first 100 images of a flight give 100,000 training patches.
    """
    if len(images) < 1:
        raise ValueError("need at least one image")
    if n_textons < 1 or patches_per_image < 1:
        raise ValueError("n_textons and patches_per_image must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    patches = sample_training_patches(images, patches_per_image, patch_width, patch_height, rng)
    log.info("training %d textons on %d patches", n_textons, len(patches))
    units = train_kohonen(patches, n_textons, epochs=epochs, lr=lr, radius=radius, rng=rng)
    # units are convex combinations of inputs; clip float drift only
    return TextonDictionary(np.clip(units, 0.0, 255.0), patch_width, patch_height)
