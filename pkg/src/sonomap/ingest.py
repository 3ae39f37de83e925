"""Sensor stream ingestion: optical markers, IMU, EMG, and audio.

Every downstream module consumes the uniform FrameStream produced here.
All operations are pure functions over immutable inputs.
"""

import io
import json
import math
import struct
import wave
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InsufficientDataError,
    ParameterError,
    ParseError,
    SchemaError,
    UnsupportedFormatError,
)

KINDS = ("marker", "imu", "emg")

QUAT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class Marker:
    label: str
    p: tuple  # (x, y, z) metres
    mass: float = 1.0

    def __post_init__(self):
        if len(self.p) != 3 or not all(math.isfinite(v) for v in self.p):
            raise SchemaError(f"marker {self.label!r} position must be a finite 3-vector")
        if not (math.isfinite(self.mass) and self.mass >= 0):
            raise SchemaError(f"marker {self.label!r} mass must be >= 0")


@dataclass(frozen=True)
class MarkerFrame:
    t: float
    markers: tuple

    def __post_init__(self):
        labels = [m.label for m in self.markers]
        if len(set(labels)) != len(labels):
            raise SchemaError(f"duplicate marker labels at t={self.t}")

    def positions(self):
        return np.array([m.p for m in self.markers], dtype=float)


@dataclass(frozen=True)
class ImuFrame:
    t: float
    accel: tuple
    gyro: tuple
    mag: tuple
    quat: tuple  # (w, x, y, z)

    def __post_init__(self):
        for name, vec, n in (("accel", self.accel, 3), ("gyro", self.gyro, 3),
                             ("mag", self.mag, 3), ("quat", self.quat, 4)):
            if len(vec) != n or not all(math.isfinite(v) for v in vec):
                raise SchemaError(f"imu frame {name} must be a finite {n}-vector")
        norm = math.sqrt(sum(v * v for v in self.quat))
        if abs(norm - 1.0) > QUAT_NORM_TOL:
            raise SchemaError(f"quaternion norm {norm:.8f} is not 1 at t={self.t}")


@dataclass(frozen=True)
class EmgFrame:
    t: float
    channels: tuple

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.channels):
            raise SchemaError(f"emg frame has non-finite channel at t={self.t}")


@dataclass(frozen=True)
class AudioBuffer:
    sample_rate: float
    samples: np.ndarray = field(repr=False)  # shape (channels, n), floats in [-1, 1]

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ParameterError("sample_rate must be > 0")
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        object.__setattr__(self, "samples", arr)

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def duration_s(self):
        return self.n_samples / self.sample_rate


@dataclass(frozen=True)
class FrameStream:
    kind: str
    rate: float
    frames: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown stream kind {self.kind!r}")
        ts = [f.t for f in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise SchemaError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.frames)

    def times(self):
        return np.array([f.t for f in self.frames], dtype=float)

    def positions(self):
        """(n_frames, n_markers, 3) position array; marker streams only."""
        if self.kind != "marker":
            raise SchemaError(f"positions() needs a marker stream, got {self.kind}")
        return np.array([f.positions() for f in self.frames], dtype=float)

    def masses(self):
        if self.kind != "marker":
            raise SchemaError(f"masses() needs a marker stream, got {self.kind}")
        return np.array([m.mass for m in self.frames[0].markers], dtype=float)

    def channel_matrix(self):
        """(n_frames, n_channels) EMG sample matrix."""
        if self.kind != "emg":
            raise SchemaError(f"channel_matrix() needs an emg stream, got {self.kind}")
        return np.array([f.channels for f in self.frames], dtype=float)


def _infer_rate(times):
    if len(times) < 2:
        return 0.0
    return 1.0 / float(np.median(np.diff(times)))


# ---------------------------------------------------------------------------
# MoCap CSV

def parse_mocap_csv(text, masses=None):
    """Parse `t,<label>_x,<label>_y,<label>_z,...` CSV into a marker stream.

    `masses` optionally maps label -> kg; unlisted markers default to 1.0.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty MoCap CSV")
    header = [c.strip() for c in lines[0].split(",")]
    if (len(header) - 1) % 3 != 0 or header[0] != "t" or len(header) < 4:
        raise SchemaError(
            "MoCap CSV header must be t,<label>_x,<label>_y,<label>_z,...; "
            f"got {len(header)} columns"
        )
    labels = []
    for i in range(1, len(header), 3):
        trip = header[i:i + 3]
        stems = {c.rsplit("_", 1)[0] for c in trip}
        suffixes = [c.rsplit("_", 1)[-1] for c in trip]
        if len(stems) != 1 or suffixes != ["x", "y", "z"]:
            raise SchemaError(f"columns {i + 1}..{i + 3} are not a _x,_y,_z triplet")
        labels.append(trip[0].rsplit("_", 1)[0])

    masses = masses or {}
    frames = []
    for row_no, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise SchemaError(f"row {row_no} has {len(cells)} cells, expected {len(header)}")
        values = []
        for col_no, cell in enumerate(cells, start=1):
            try:
                values.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"non-numeric cell at row {row_no}, column {col_no}: {cell.strip()!r}"
                ) from None
        markers = tuple(
            Marker(lab, tuple(values[1 + 3 * i:4 + 3 * i]), float(masses.get(lab, 1.0)))
            for i, lab in enumerate(labels)
        )
        frames.append(MarkerFrame(values[0], markers))
    times = np.array([f.t for f in frames])
    return FrameStream("marker", _infer_rate(times), tuple(frames))


def dump_mocap_csv(stream):
    """Serialize a marker stream back to the CSV layout parse_mocap_csv reads."""
    if stream.kind != "marker":
        raise SchemaError("dump_mocap_csv needs a marker stream")
    labels = [m.label for m in stream.frames[0].markers]
    header = "t," + ",".join(f"{lab}_{ax}" for lab in labels for ax in "xyz")
    rows = [header]
    for f in stream.frames:
        cells = [repr(float(f.t))]
        for m in f.markers:
            cells.extend(repr(float(v)) for v in m.p)
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# JSONL frames

def _frame_from_obj(obj):
    kind = obj["kind"]
    if kind == "imu":
        return ImuFrame(float(obj["t"]), tuple(obj["accel"]), tuple(obj["gyro"]),
                        tuple(obj["mag"]), tuple(obj["quat"]))
    if kind == "emg":
        return EmgFrame(float(obj["t"]), tuple(obj["channels"]))
    if kind == "marker":
        markers = tuple(
            Marker(m["label"], tuple(m["p"]), float(m.get("mass", 1.0)))
            for m in obj["markers"]
        )
        return MarkerFrame(float(obj["t"]), markers)
    raise SchemaError(f"unknown frame kind {kind!r}")


def _frame_to_obj(kind, frame):
    if kind == "imu":
        return {"t": frame.t, "kind": "imu", "accel": list(frame.accel),
                "gyro": list(frame.gyro), "mag": list(frame.mag),
                "quat": list(frame.quat)}
    if kind == "emg":
        return {"t": frame.t, "kind": "emg", "channels": list(frame.channels)}
    return {"t": frame.t, "kind": "marker",
            "markers": [{"label": m.label, "p": list(m.p), "mass": m.mass}
                        for m in frame.markers]}


def parse_frames_jsonl(text):
    """Parse one-JSON-object-per-line frame data; kind comes from line 1."""
    kind = None
    frames = []
    n_channels = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON at line {line_no}: {exc.msg}") from None
        this_kind = obj.get("kind")
        if this_kind not in KINDS:
            raise SchemaError(f"line {line_no}: unknown kind {this_kind!r}")
        if kind is None:
            kind = this_kind
        elif this_kind != kind:
            raise SchemaError(
                f"line {line_no}: mixed kinds ({this_kind!r} in a {kind!r} stream)"
            )
        try:
            frame = _frame_from_obj(obj)
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"line {line_no}: missing or bad field ({exc})") from None
        if kind == "emg":
            if n_channels is None:
                n_channels = len(frame.channels)
            elif len(frame.channels) != n_channels:
                raise SchemaError(
                    f"line {line_no}: channel count {len(frame.channels)} != {n_channels}"
                )
        frames.append(frame)
    if not frames:
        raise ParseError("empty JSONL stream")
    times = np.array([f.t for f in frames])
    return FrameStream(kind, _infer_rate(times), tuple(frames))


def dump_frames_jsonl(stream):
    return "\n".join(
        json.dumps(_frame_to_obj(stream.kind, f)) for f in stream.frames
    ) + "\n"


# ---------------------------------------------------------------------------
# WAV audio

def read_wav(data):
    """Decode 16- or 24-bit PCM RIFF audio into floats in [-1, 1]."""
    try:
        with wave.open(io.BytesIO(data)) as wf:
            n_channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise UnsupportedFormatError(f"not a readable PCM WAV: {exc}") from None
    if width == 2:
        flat = np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints -= (ints & 0x800000) << 1  # sign-extend 24-bit
        flat = ints.astype(float) / 8388608.0
    else:
        raise UnsupportedFormatError(f"unsupported sample width: {width * 8}-bit")
    samples = flat.reshape(-1, n_channels).T
    return AudioBuffer(float(rate), samples)


def write_wav(buffer, bit_depth=16):
    """Encode an AudioBuffer as PCM WAV bytes (16- or 24-bit)."""
    if bit_depth not in (16, 24):
        raise ParameterError(f"bit_depth must be 16 or 24, got {bit_depth}")
    x = np.clip(buffer.samples, -1.0, 1.0)
    interleaved = x.T.reshape(-1)
    out = io.BytesIO()
    with wave.open(out, "wb") as wf:
        wf.setnchannels(buffer.n_channels)
        wf.setframerate(int(round(buffer.sample_rate)))
        if bit_depth == 16:
            wf.setsampwidth(2)
            wf.writeframes((np.round(interleaved * 32767.0)).astype("<i2").tobytes())
        else:
            wf.setsampwidth(3)
            ints = np.round(interleaved * 8388607.0).astype(np.int32)
            raw = bytearray()
            for v in ints:
                raw += struct.pack("<i", int(v))[:3]
            wf.writeframes(bytes(raw))
    return out.getvalue()


# ---------------------------------------------------------------------------
# Synthetic gestures

def gen_synthetic_gesture(shape, rate_hz, duration_s, freq_hz=0.0, radius_m=1.0):
    """Deterministic single-marker trajectory for exercising motion features.

    circle: p(t) = r*(cos 2pi f t, sin 2pi f t, 0)
    sine:   p(t) = (r*sin 2pi f t, 0, 0)
    still:  p(t) = origin
    """
    if shape not in ("circle", "sine", "still"):
        raise ParameterError(f"unknown shape {shape!r}")
    if rate_hz <= 0 or duration_s <= 0:
        raise ParameterError("rate_hz and duration_s must be > 0")
    if shape != "still" and rate_hz <= 2.0 * freq_hz:
        raise ParameterError(
            f"rate_hz={rate_hz} must exceed 2*freq_hz={2.0 * freq_hz} (aliasing)"
        )
    n = int(round(rate_hz * duration_s))
    frames = []
    for k in range(n):
        t = k / rate_hz
        if shape == "circle":
            w = 2.0 * math.pi * freq_hz * t
            p = (radius_m * math.cos(w), radius_m * math.sin(w), 0.0)
        elif shape == "sine":
            p = (radius_m * math.sin(2.0 * math.pi * freq_hz * t), 0.0, 0.0)
        else:
            p = (0.0, 0.0, 0.0)
        frames.append(MarkerFrame(t, (Marker("m0", p),)))
    return FrameStream("marker", float(rate_hz), tuple(frames))


# ---------------------------------------------------------------------------
# Resampling

def _nlerp(q0, q1, w):
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if np.dot(q0, q1) < 0:
        q1 = -q1
    q = (1.0 - w) * q0 + w * q1
    norm = np.linalg.norm(q)
    if norm < 1e-8:
        q, norm = q0, 1.0
    return tuple(q / norm)


def resample_stream(stream, target_rate_hz):
    """Uniformly resample by per-channel linear interpolation.

    Output spans [t0, tN] inclusive; quaternions are renormalised after
    component-wise interpolation.
    """
    if target_rate_hz <= 0:
        raise ParameterError("target_rate_hz must be > 0")
    if len(stream) == 0:
        raise InsufficientDataError("cannot resample an empty stream")
    if len(stream) == 1:
        return FrameStream(stream.kind, float(target_rate_hz), stream.frames)

    old_t = stream.times()
    span = float(old_t[-1] - old_t[0])
    n = int(round(span * target_rate_hz)) + 1
    if n < 2:
        n = 2
    new_t = np.linspace(old_t[0], old_t[-1], n)
    achieved = (n - 1) / span

    def interp(column):
        return np.interp(new_t, old_t, column)

    frames = []
    if stream.kind == "emg":
        mat = stream.channel_matrix()
        cols = np.column_stack([interp(mat[:, c]) for c in range(mat.shape[1])])
        frames = [EmgFrame(float(t), tuple(row)) for t, row in zip(new_t, cols)]
    elif stream.kind == "marker":
        pos = stream.positions()  # (n, m, 3)
        ref = stream.frames[0].markers
        flat = pos.reshape(len(stream), -1)
        cols = np.column_stack([interp(flat[:, c]) for c in range(flat.shape[1])])
        for t, row in zip(new_t, cols):
            pts = row.reshape(-1, 3)
            markers = tuple(
                Marker(ref[i].label, tuple(pts[i]), ref[i].mass)
                for i in range(len(ref))
            )
            frames.append(MarkerFrame(float(t), markers))
    else:  # imu
        accel = np.array([f.accel for f in stream.frames])
        gyro = np.array([f.gyro for f in stream.frames])
        mag = np.array([f.mag for f in stream.frames])
        quat = np.array([f.quat for f in stream.frames])
        a = np.column_stack([interp(accel[:, c]) for c in range(3)])
        g = np.column_stack([interp(gyro[:, c]) for c in range(3)])
        m = np.column_stack([interp(mag[:, c]) for c in range(3)])
        for i, t in enumerate(new_t):
            j = int(np.searchsorted(old_t, t, side="right")) - 1
            j = min(max(j, 0), len(old_t) - 2)
            w = (t - old_t[j]) / (old_t[j + 1] - old_t[j])
            q = _nlerp(quat[j], quat[j + 1], float(w))
            frames.append(ImuFrame(float(t), tuple(a[i]), tuple(g[i]), tuple(m[i]), q))
    return FrameStream(stream.kind, float(achieved), tuple(frames))
