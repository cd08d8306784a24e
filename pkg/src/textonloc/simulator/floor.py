"""Procedural floor textures built from multi-octave value noise."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..filtering import ArenaBounds
from ..images import ImageYuv, read_ppm, to_uint8, write_ppm

LUMA_AMPLITUDE = 45.0
CHROMA_AMPLITUDE = 30.0


@dataclass(frozen=True)
class TextureSpec:
    """Knobs of the synthetic floor.

    Attributes:
        feature_scale: size of the coarsest luma features, metres.
        octaves: number of noise octaves; each halves the feature size.
        persistence: amplitude ratio between successive octaves.
        richness: overall contrast; 0 yields a constant floor.
        color_variation: chroma contrast relative to luma.
        color_scale: size of the chroma blobs, metres.
        base_color: YUV colour the noise varies around.
        repeat_period: if set, one square tile of this side (metres) is
            stamped repeatedly over the floor, creating look-alike places.
    """

    feature_scale: float = 0.5
    octaves: int = 6
    persistence: float = 0.6
    richness: float = 1.0
    color_variation: float = 1.0
    color_scale: float = 1.0
    base_color: tuple[float, float, float] = (128.0, 128.0, 128.0)
    repeat_period: float | None = None

    def __post_init__(self):
        if self.feature_scale <= 0 or self.color_scale <= 0:
            raise ValueError("feature scales must be positive")
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")
        if self.richness < 0 or self.color_variation < 0:
            raise ValueError("richness and color_variation must be non-negative")
        if self.repeat_period is not None and self.repeat_period <= 0:
            raise ValueError("repeat_period must be positive")


@dataclass(frozen=True, eq=False)
class FloorMap:
    """Overhead image of the arena; pixel ``(row, col)`` covers the square whose
    lower corner is ``(x_min + col * mpp, y_min + row * mpp)``."""

    image: ImageYuv
    meters_per_pixel: float
    bounds: ArenaBounds

    def __post_init__(self):
        if not self.meters_per_pixel > 0:
            raise ValueError("meters_per_pixel must be positive")
        w = self.bounds.width / self.meters_per_pixel
        h = self.bounds.height / self.meters_per_pixel
        if abs(w - self.image.width) > 1e-6 * max(w, 1) or abs(h - self.image.height) > 1e-6 * max(h, 1):
            raise ValueError(
                f"{self.image.width}x{self.image.height} px image does not cover "
                f"{self.bounds.width}x{self.bounds.height} m at {self.meters_per_pixel} m/px"
            )


def _fade(t):
    return t * t * t * (t * (t * 6 - 15) + 10)


def value_noise(height: int, width: int, cell: float, rng: np.random.Generator) -> np.ndarray:
    """One octave of value noise with lattice spacing ``cell`` pixels, values in [0, 1]."""
    gh = int(np.ceil(height / cell)) + 2
    gw = int(np.ceil(width / cell)) + 2
    lattice = rng.random((gh, gw))
    y = (np.arange(height) + 0.5) / cell
    x = (np.arange(width) + 0.5) / cell
    yi, xi = y.astype(int), x.astype(int)
    fy, fx = _fade(y - yi)[:, None], _fade(x - xi)[None, :]
    top = lattice[np.ix_(yi, xi)] * (1 - fx) + lattice[np.ix_(yi, xi + 1)] * fx
    bottom = lattice[np.ix_(yi + 1, xi)] * (1 - fx) + lattice[np.ix_(yi + 1, xi + 1)] * fx
    return top * (1 - fy) + bottom * fy


def fractal_noise(height, width, cell, octaves, persistence, rng) -> np.ndarray:
    """Sum of octaves normalised to zero mean and unit standard deviation."""
    total = np.zeros((height, width))
    amp = 1.0
    for _ in range(octaves):
        if cell < 2.0:
            break
        total += amp * value_noise(height, width, cell, rng)
        amp *= persistence
        cell /= 2.0
    std = total.std()
    return (total - total.mean()) / std if std > 0 else total * 0.0


def generate_floor(bounds: ArenaBounds, meters_per_pixel: float, spec: TextureSpec = TextureSpec(),
                   rng: np.random.Generator | None = None) -> FloorMap:
    rng = np.random.default_rng() if rng is None else rng
    if not meters_per_pixel > 0:
        raise ValueError("meters_per_pixel must be positive")
    width = int(round(bounds.width / meters_per_pixel))
    height = int(round(bounds.height / meters_per_pixel))
    if width < 1 or height < 1:
        raise ValueError("floor would have zero pixels")

    if spec.repeat_period is not None:
        tile = max(1, int(round(spec.repeat_period / meters_per_pixel)))
        th, tw = min(tile, height), min(tile, width)
    else:
        th, tw = height, width

    base = np.asarray(spec.base_color, dtype=float)
    planes = np.empty((3, th, tw))
    amplitudes = (
        LUMA_AMPLITUDE * spec.richness,
        CHROMA_AMPLITUDE * spec.richness * spec.color_variation,
        CHROMA_AMPLITUDE * spec.richness * spec.color_variation,
    )
    for c in range(3):
        scale = spec.feature_scale if c == 0 else spec.color_scale
        octaves = spec.octaves if c == 0 else max(1, spec.octaves // 2)
        noise = fractal_noise(th, tw, scale / meters_per_pixel, octaves, spec.persistence, rng)
        planes[c] = base[c] + amplitudes[c] * noise

    if (th, tw) != (height, width):
        reps = (1, -(-height // th), -(-width // tw))
        planes = np.tile(planes, reps)[:, :height, :width]
    return FloorMap(ImageYuv(to_uint8(planes)), float(meters_per_pixel), bounds)


def save_floor(floor: FloorMap, directory, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``floor.ppm`` and a ``floor.json`` sidecar into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ppm, meta = directory / "floor.ppm", directory / "floor.json"
    write_ppm(ppm, floor.image)
    sidecar = {"meters_per_pixel": floor.meters_per_pixel, "bounds": asdict(floor.bounds)}
    if extra:
        sidecar.update(extra)
    meta.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return ppm, meta


def load_floor(directory) -> FloorMap:
    directory = Path(directory)
    meta = json.loads((directory / "floor.json").read_text())
    image = read_ppm(directory / "floor.ppm")
    return FloorMap(image, float(meta["meters_per_pixel"]), ArenaBounds(**meta["bounds"]))
