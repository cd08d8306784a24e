"""YUV image container and PPM/PGM file helpers.

Planes are stored stacked as a ``(3, height, width)`` array in Y, U, V order.
On disk the three planes travel in a binary PPM (P6) file, with Y, U and V
taking the places of R, G and B.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass(frozen=True, eq=False)
class ImageYuv:
    """A camera frame or floor map with full-resolution Y, U and V planes.

    Attributes:
        data: array of shape ``(3, height, width)``, intensities in [0, 255].
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or data.shape[0] != 3:
            raise ValueError(f"expected planes of shape (3, H, W), got {data.shape}")
        if data.shape[1] < 1 or data.shape[2] < 1:
            raise ValueError("image must have at least one pixel")
        if data.size and (data.min() < 0 or data.max() > 255):
            raise ValueError("intensities must lie in [0, 255]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_planes(cls, y_plane, u_plane, v_plane) -> "ImageYuv":
        planes = [np.asarray(p) for p in (y_plane, u_plane, v_plane)]
        if not planes[0].shape == planes[1].shape == planes[2].shape:
            raise ValueError("Y, U and V planes must share one shape")
        return cls(np.stack(planes))

    @classmethod
    def constant(cls, width: int, height: int, y=128, u=128, v=128) -> "ImageYuv":
        data = np.empty((3, height, width), dtype=np.uint8)
        data[0], data[1], data[2] = y, u, v
        return cls(data)

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def y_plane(self) -> np.ndarray:
        return self.data[0]

    @property
    def u_plane(self) -> np.ndarray:
        return self.data[1]

    @property
    def v_plane(self) -> np.ndarray:
        return self.data[2]

    def __eq__(self, other):
        if not isinstance(other, ImageYuv):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None


def to_uint8(data: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(data), 0, 255).astype(np.uint8)


def write_ppm(path, image: ImageYuv) -> None:
    """Write the Y/U/V planes as the R/G/B channels of a binary P6 file."""
    rgb = np.moveaxis(to_uint8(image.data), 0, -1)
    Image.fromarray(np.ascontiguousarray(rgb)).save(Path(path), format="PPM")


def read_ppm(path) -> ImageYuv:
    with Image.open(Path(path)) as im:
        if im.mode != "RGB":
            raise ValueError(f"{path}: expected a colour (P6) PPM, got mode {im.mode}")
        rgb = np.asarray(im, dtype=np.uint8)
    return ImageYuv(np.ascontiguousarray(np.moveaxis(rgb, -1, 0)))


def write_pgm(path, values: np.ndarray, lo: float | None = None, hi: float | None = None) -> None:
    """Write a real-valued 2D grid as an 8-bit P5 heatmap.

    Values are mapped linearly from ``[lo, hi]`` to ``[0, 255]``; NaN cells
    become 0.
    """
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    if lo is None:
        lo = float(values[finite].min()) if finite.any() else 0.0
    if hi is None:
        hi = float(values[finite].max()) if finite.any() else 1.0
    span = hi - lo if hi > lo else 1.0
    scaled = np.where(finite, (values - lo) / span * 255.0, 0.0)
    Image.fromarray(to_uint8(scaled)).save(Path(path), format="PPM")
