"""Run-time tunables with the reference flight-test defaults."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


class BinMismatchError(ValueError):
    """Histograms and dictionary disagree on the number of textons."""


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one localization run.

    ``n_samples=None`` selects full sampling for histogram extraction.
    ``drift`` controls the motion model's mean step: ``"on"`` keeps the
    estimated mean, ``"off"`` zeroes it and ``"auto"`` keeps it only when
    it stands out from the step noise.
    """

    n_samples: int | None = 400
    n_textons: int = 20
    n_particles: int = 50
    k: int = 5
    patch_size: int = 6
    training_frames: int = 800
    test_frames: int = 415
    seed: int = 0
    drift: str = "auto"

    def __post_init__(self):
        if self.n_samples is not None and self.n_samples < 1:
            raise ValueError("n_samples must be >= 1 (or None for full sampling)")
        for name in ("n_textons", "n_particles", "k", "patch_size", "training_frames", "test_frames"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.drift not in ("auto", "on", "off"):
            raise ValueError(f"drift must be 'auto', 'on' or 'off', got {self.drift!r}")
        if self.k > self.training_frames:
            raise ValueError(f"k={self.k} exceeds the training set size {self.training_frames}")

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]
