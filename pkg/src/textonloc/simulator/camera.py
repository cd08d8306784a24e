"""Downward-looking orthographic camera over a :class:`FloorMap`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..filtering import ArenaBounds
from ..images import ImageYuv, to_uint8
from .floor import FloorMap


@dataclass(frozen=True)
class CameraModel:
    """Axis-aligned view of a constant-height camera.

    ``footprint_width`` is the floor extent (m) imaged across the output
    width; the footprint height follows from the aspect ratio.
    """

    out_width: int = 640
    out_height: int = 480
    footprint_width: float = 1.0
    pixel_noise_sigma: float = 3.0
    blur_radius: int = 1
    max_rotation: float = 0.0

    def __post_init__(self):
        if self.out_width < 1 or self.out_height < 1:
            raise ValueError("output size must be positive")
        if not self.footprint_width > 0:
            raise ValueError("footprint_width must be positive")
        if self.pixel_noise_sigma < 0 or self.blur_radius < 0 or self.max_rotation < 0:
            raise ValueError("noise, blur and rotation must be non-negative")

    @property
    def footprint_height(self) -> float:
        return self.footprint_width * self.out_height / self.out_width

    @property
    def half_extent(self) -> tuple[float, float]:
        """Half-size of the region a rotated footprint can reach around its centre."""
        hw, hh = self.footprint_width / 2, self.footprint_height / 2
        if self.max_rotation == 0:
            return hw, hh
        a = min(self.max_rotation, np.pi / 2)
        c, s = np.cos(a), np.sin(a)
        return hw * c + hh * s, hw * s + hh * c

    def inner_bounds(self, bounds: ArenaBounds) -> ArenaBounds:
        """Camera centres whose footprint stays on the floor."""
        dx, dy = self.half_extent
        return bounds.shrink(dx, dy)


def _footprint_offsets(cam: CameraModel):
    scale = cam.footprint_width / cam.out_width
    ox = (np.arange(cam.out_width) + 0.5 - cam.out_width / 2) * scale
    oy = (np.arange(cam.out_height) + 0.5 - cam.out_height / 2) * scale
    return ox, oy


def _resample_matrix(coord: np.ndarray, size: int, blur_radius: int) -> tuple[np.ndarray, int]:
    """Rows map source pixels to output pixels: bilinear weights followed by a box blur.

    Source indices are clamped to the image edge, and the blur replicates
    edge outputs, matching ``mode="nearest"`` filtering.  Returns the matrix
    and the first source index it covers.
    """
    n = len(coord)
    i0 = np.floor(coord).astype(np.intp)
    frac = coord - i0
    lo = max(int(i0.min()), 0)
    hi = min(int(i0.max()) + 1, size - 1)
    mat = np.zeros((n, hi - lo + 1))
    rows = np.arange(n)
    np.add.at(mat, (rows, np.clip(i0, 0, size - 1) - lo), 1 - frac)
    np.add.at(mat, (rows, np.clip(i0 + 1, 0, size - 1) - lo), frac)
    if blur_radius > 0:
        taps = range(-blur_radius, blur_radius + 1)
        mat = sum(mat[np.clip(rows + d, 0, n - 1)] for d in taps) / len(taps)
    return mat, lo


def render_view(floor: FloorMap, cam: CameraModel, pos, rng: np.random.Generator | None = None) -> ImageYuv:
    """Image seen by ``cam`` centred over ``pos``.

    Crops the footprint, resamples it bilinearly, applies a random yaw of at
    most ``max_rotation``, a box blur and clamped Gaussian pixel noise.
    """
    x, y = float(pos[0]), float(pos[1])
    hx, hy = cam.half_extent
    b = floor.bounds
    eps = 1e-9
    if x - hx < b.x_min - eps or x + hx > b.x_max + eps or y - hy < b.y_min - eps or y + hy > b.y_max + eps:
        raise ValueError(f"camera footprint at ({x:.3f}, {y:.3f}) leaves the floor")
    if rng is None:
        rng = np.random.default_rng()

    src = floor.image.data
    mpp = floor.meters_per_pixel
    ox, oy = _footprint_offsets(cam)
    angle = rng.uniform(-cam.max_rotation, cam.max_rotation) if cam.max_rotation > 0 else 0.0

    if angle == 0.0:
        # separable: out = Mv @ crop @ Mu.T per channel, blur folded into Mv, Mu
        mu, c_lo = _resample_matrix((x + ox - b.x_min) / mpp - 0.5, src.shape[2], cam.blur_radius)
        mv, r_lo = _resample_matrix((y + oy - b.y_min) / mpp - 0.5, src.shape[1], cam.blur_radius)
        crop = src[:, r_lo : r_lo + mv.shape[1], c_lo : c_lo + mu.shape[1]].astype(np.float32)
        out = np.matmul(np.matmul(mv.astype(np.float32), crop), mu.T.astype(np.float32))
    else:
        c, s = np.cos(angle), np.sin(angle)
        gx, gy = np.meshgrid(ox, oy)
        wx = x + c * gx - s * gy
        wy = y + s * gx + c * gy
        coords = np.stack([(wy - b.y_min) / mpp - 0.5, (wx - b.x_min) / mpp - 0.5])
        out = np.stack([
            ndimage.map_coordinates(src[ch].astype(np.float64), coords, order=1, mode="nearest")
            for ch in range(3)
        ])
        if cam.blur_radius > 0:
            size = 2 * cam.blur_radius + 1
            out = ndimage.uniform_filter(out, size=(1, size, size), mode="nearest")

    if cam.pixel_noise_sigma > 0:
        out = out + cam.pixel_noise_sigma * rng.standard_normal(out.shape, dtype=np.float32)
    return ImageYuv(to_uint8(out))
