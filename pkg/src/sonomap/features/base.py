"""Windows over frame streams and the named feature vector type."""

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDataError, SchemaError


@dataclass(frozen=True)
class FeatureVector:
    names: tuple
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if len(self.names) != len(vals):
            raise SchemaError(
                f"{len(self.names)} names vs {len(vals)} values"
            )
        if len(set(self.names)) != len(self.names):
            raise SchemaError("feature names must be unique")
        if not np.all(np.isfinite(vals)):
            raise SchemaError("feature values must be finite")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


@dataclass(frozen=True)
class Window:
    """Contiguous slice of a FrameStream at a uniform rate."""

    kind: str
    rate: float
    frames: tuple

    def __post_init__(self):
        if len(self.frames) < 1:
            raise InsufficientDataError("window needs at least 1 frame")
        if self.rate <= 0:
            raise SchemaError("window rate must be > 0")

    def __len__(self):
        return len(self.frames)

    @property
    def dt(self):
        return 1.0 / self.rate

    @classmethod
    def from_stream(cls, stream, start=0, length=None):
        frames = stream.frames[start:None if length is None else start + length]
        return cls(stream.kind, stream.rate, tuple(frames))

    def positions(self):
        if self.kind != "marker":
            raise SchemaError(f"positions() needs a marker window, got {self.kind}")
        return np.array([f.positions() for f in self.frames], dtype=float)

    def masses(self):
        return np.array([m.mass for m in self.frames[0].markers], dtype=float)

    def channel_matrix(self):
        if self.kind != "emg":
            raise SchemaError(f"channel_matrix() needs an emg window, got {self.kind}")
        return np.array([f.channels for f in self.frames], dtype=float)


def sliding_windows(stream, length, hop):
    """Yield Windows of `length` frames every `hop` frames."""
    if length < 1 or hop < 1:
        raise SchemaError("window length and hop must be >= 1")
    for start in range(0, len(stream.frames) - length + 1, hop):
        yield Window.from_stream(stream, start, length)
