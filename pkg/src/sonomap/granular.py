"""Six-parameter granular/subtractive synthesis model and offline renderer.

The parameter model (playback start/duration/speed, pitch shift, filter
cutoff/resonance) feeds three consumers: anchor-point envelopes for sound
design, regression targets for mapping models, and the offline grain
renderer here. Pitch transposition and playback speed are decoupled by
resampling inside each grain.
"""

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ParameterError
from .ingest import AudioBuffer

PARAM_FIELDS = ("start_s", "duration_s", "speed", "pitch_shift", "cutoff_hz",
                "resonance_q")

# (lo, hi, lo_exclusive) per field; None = unbounded
RANGES = {
    "start_s": (0.0, None, False),
    "duration_s": (0.0, None, True),
    "speed": (0.0, None, True),
    "pitch_shift": (-24.0, 24.0, False),
    "cutoff_hz": (20.0, 20000.0, False),
    "resonance_q": (0.1, 20.0, False),
}

# clamping floors for the unbounded-but-positive fields
_CLAMP_MIN = {"duration_s": 0.01, "speed": 0.01}


@dataclass(frozen=True)
class SynthPreset:
    start_s: float = 0.0
    duration_s: float = 1.0
    speed: float = 1.0
    pitch_shift: float = 0.0
    cutoff_hz: float = 20000.0
    resonance_q: float = 0.707

    def to_vector(self):
        return np.array([getattr(self, f) for f in PARAM_FIELDS], dtype=float)

    @classmethod
    def from_vector(cls, vec, clamp=False):
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if len(vec) != len(PARAM_FIELDS):
            raise ParameterError(
                f"preset vector needs {len(PARAM_FIELDS)} values, got {len(vec)}"
            )
        fields = dict(zip(PARAM_FIELDS, (float(v) for v in vec)))
        if clamp:
            for name, value in fields.items():
                lo, hi, _ = RANGES[name]
                lo = _CLAMP_MIN.get(name, lo)
                value = max(value, lo)
                if hi is not None:
                    value = min(value, hi)
                fields[name] = value
        return validate_preset(cls(**fields))

    def to_json_dict(self):
        return asdict(self)


def validate_preset(candidate):
    """Return the preset if every field is in range; otherwise raise an
    error naming each violated field."""
    if isinstance(candidate, dict):
        unknown = set(candidate) - set(PARAM_FIELDS)
        if unknown:
            raise ParameterError(f"unknown preset fields: {sorted(unknown)}")
        candidate = SynthPreset(**candidate)
    violations = []
    for name in PARAM_FIELDS:
        value = getattr(candidate, name)
        lo, hi, lo_exclusive = RANGES[name]
        if not math.isfinite(value):
            violations.append(f"{name}={value!r} (not finite)")
            continue
        if lo_exclusive and value <= lo:
            violations.append(f"{name}={value:g} (must be > {lo:g})")
        elif not lo_exclusive and value < lo:
            violations.append(f"{name}={value:g} (must be >= {lo:g})")
        elif hi is not None and value > hi:
            violations.append(f"{name}={value:g} (must be <= {hi:g})")
    if violations:
        raise ParameterError("preset out of range: " + "; ".join(violations))
    return candidate


_LOG_FIELDS = {"cutoff_hz"}


@dataclass(frozen=True)
class AnchorEnvelope:
    """Four-anchor breakpoint envelope over normalised time [0, 1]."""

    anchors: tuple  # ((time_fraction, SynthPreset) x 4)

    def __post_init__(self):
        if len(self.anchors) != 4:
            raise ParameterError(f"exactly 4 anchors required, got {len(self.anchors)}")
        times = [t for t, _ in self.anchors]
        if times[0] != 0.0 or times[-1] != 1.0:
            raise ParameterError("anchor times must start at 0 and end at 1")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ParameterError("anchor times must be strictly increasing")
        for _, preset in self.anchors:
            validate_preset(preset)

    def eval(self, t_fraction):
        return envelope_eval(self, t_fraction)

    def to_json_dict(self):
        return {"anchors": [{"time_fraction": t, "preset": p.to_json_dict()}
                            for t, p in self.anchors]}

    @classmethod
    def from_json_dict(cls, doc):
        anchors = tuple(
            (float(a["time_fraction"]), SynthPreset(**a["preset"]))
            for a in doc["anchors"]
        )
        return cls(anchors)


def envelope_eval(env, t_fraction):
    """Piecewise-linear interpolation between bracketing anchors.

    Frequency-like fields (cutoff) interpolate in the log domain.
    """
    t = float(t_fraction)
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"t_fraction {t:g} outside [0, 1]")
    anchors = env.anchors
    for t0, p0 in anchors:
        if t == t0:
            return p0  # anchors reproduce exactly, no fp round-trip
    for (t0, p0), (t1, p1) in zip(anchors, anchors[1:]):
        if t0 <= t <= t1:
            w = (t - t0) / (t1 - t0)
            fields = {}
            for name in PARAM_FIELDS:
                a, b = getattr(p0, name), getattr(p1, name)
                if a == b:
                    fields[name] = a
                elif name in _LOG_FIELDS:
                    fields[name] = math.exp((1 - w) * math.log(a) + w * math.log(b))
                else:
                    fields[name] = (1 - w) * a + w * b
            return SynthPreset(**fields)
    raise ParameterError(f"t_fraction {t:g} not bracketed")  # pragma: no cover


@dataclass(frozen=True)
class ParamTimeline:
    rate: float
    presets: tuple

    def __post_init__(self):
        if self.rate <= 0:
            raise ParameterError("timeline rate must be > 0")
        if len(self.presets) < 1:
            raise ParameterError("timeline must hold at least one preset")

    def __len__(self):
        return len(self.presets)

    @property
    def duration_s(self):
        return len(self.presets) / self.rate

    def at_time(self, t_s):
        i = min(int(t_s * self.rate), len(self.presets) - 1)
        return self.presets[max(i, 0)]


def envelope_to_timeline(env, duration_s, rate):
    """Sample the envelope at uniform steps; length = ceil(duration*rate)."""
    if duration_s <= 0 or rate <= 0:
        raise ParameterError("duration_s and rate must be > 0")
    n = int(math.ceil(duration_s * rate))
    if n == 1:
        return ParamTimeline(float(rate), (envelope_eval(env, 0.0),))
    presets = tuple(envelope_eval(env, k / (n - 1)) for k in range(n))
    return ParamTimeline(float(rate), presets)


def _state_variable_lowpass(x, cutoffs, qs, sample_rate):
    """Trapezoidal state-variable low-pass, coefficients per sample block.

    `cutoffs`/`qs` give one value per control block; stable under fast
    modulation, which is the point of using this topology.
    """
    out = np.empty_like(x)
    s1 = 0.0
    s2 = 0.0
    n = len(x)
    n_blocks = len(cutoffs)
    block = int(math.ceil(n / n_blocks))
    for b in range(n_blocks):
        lo = b * block
        hi = min(lo + block, n)
        if lo >= hi:
            break
        fc = min(max(cutoffs[b], 1.0), 0.49 * sample_rate)
        g = math.tan(math.pi * fc / sample_rate)
        k = 1.0 / max(qs[b], 1e-3)
        a1 = 1.0 / (1.0 + g * (g + k))
        for i in range(lo, hi):
            v1 = a1 * (s1 + g * (x[i] - s2))
            v2 = s2 + g * v1
            s1 = 2.0 * v1 - s1
            s2 = 2.0 * v2 - s2
            out[i] = v2
    return out


def _gather(channel, idx, n_samples):
    i0 = np.floor(idx).astype(int)
    frac = idx - i0
    i0 = np.clip(i0, 0, n_samples - 1)
    i1 = np.clip(i0 + 1, 0, n_samples - 1)
    return channel[i0] * (1.0 - frac) + channel[i1] * frac


def render_offline(source, timeline, grain_size_ms=100.0, overlap=4):
    """Render a parameter timeline against a source buffer.

    Hann-windowed grains are scheduled at grain/overlap hops; the source
    read head advances by `speed`, wraps inside the [start, start+duration)
    selection, and each grain resamples by 2^(pitch_shift/12). When pitch
    and speed diverge, each grain's read position is fine-tuned by a short
    correlation search against the output written so far, which keeps
    periodic content phase-coherent across grain overlaps. The result runs
    through the resonant low-pass and is peak-normalised only when it
    clips.
    """
    if source.n_samples == 0:
        raise ParameterError("source buffer is empty")
    if not 10.0 <= grain_size_ms <= 500.0:
        raise ParameterError(f"grain_size_ms {grain_size_ms:g} outside [10, 500]")
    if not 1 <= overlap <= 8:
        raise ParameterError(f"overlap {overlap} outside [1, 8]")
    src_len_s = source.duration_s
    for p in timeline.presets:
        validate_preset(p)
        if p.start_s + p.duration_s > src_len_s + 1e-9:
            raise ParameterError(
                f"selection [{p.start_s:g}, {p.start_s + p.duration_s:g}) s "
                f"outside source of {src_len_s:g} s"
            )

    sr = source.sample_rate
    out_len = int(round(timeline.duration_s * sr))
    grain_len = max(int(round(grain_size_ms / 1000.0 * sr)), 2)
    hop = max(grain_len // overlap, 1)
    window = np.hanning(grain_len)
    max_shift = int(round(0.003 * sr))  # +-3 ms alignment search

    out = np.zeros((source.n_channels, out_len))
    wsum = np.zeros(out_len)
    src = source.samples
    mono = src.mean(axis=0)

    read_pos = timeline.presets[0].start_s * sr  # samples
    for grain_start in range(0, out_len, hop):
        preset = timeline.at_time(grain_start / sr)
        sel_start = preset.start_s * sr
        sel_len = max(preset.duration_s * sr, 1.0)
        ratio = 2.0 ** (preset.pitch_shift / 12.0)
        pos = sel_start + ((read_pos - sel_start) % sel_len)

        align = (abs(ratio - preset.speed) > 1e-9 and grain_start > 0
                 and max_shift > 1)
        shift = max_shift if align else 0
        offsets = np.arange(-shift, grain_len + shift, dtype=float)
        idx = sel_start + ((pos - sel_start + offsets * ratio) % sel_len)
        if align:
            ext = _gather(mono, idx, source.n_samples)
            n_corr = min(grain_len - hop, grain_start, grain_len,
                         out_len - grain_start)
            # raw WOLA accumulation so far over the overlap zone
            tail = out[:, grain_start:grain_start + n_corr].mean(axis=0)
            if n_corr > 0 and float(np.max(np.abs(tail))) > 1e-9:
                # pick the lag whose windowed continuation best matches
                # what previous grains already wrote in the overlap zone
                scores = np.correlate(ext[: n_corr + 2 * shift], tail, "valid")
                lag = int(np.argmax(scores))
            else:
                lag = shift
            idx = idx[lag:lag + grain_len]
        n_keep = min(grain_len, out_len - grain_start)
        for ch in range(source.n_channels):
            seg = _gather(src[ch], idx, source.n_samples)
            out[ch, grain_start:grain_start + n_keep] += (seg * window)[:n_keep]
        wsum[grain_start:grain_start + n_keep] += window[:n_keep]
        read_pos += hop * preset.speed

    np.divide(out, np.maximum(wsum, 1e-6), out=out)

    cutoffs = [p.cutoff_hz for p in timeline.presets]
    qs = [p.resonance_q for p in timeline.presets]
    for ch in range(source.n_channels):
        out[ch] = _state_variable_lowpass(out[ch], cutoffs, qs, sr)

    peak = float(np.max(np.abs(out))) if out.size else 0.0
    if peak > 1.0:
        out /= peak
    return AudioBuffer(sr, out)


# ---------------------------------------------------------------------------
# persistence

def preset_to_json(preset):
    return json.dumps(preset.to_json_dict(), sort_keys=True)


def preset_from_json(text):
    doc = json.loads(text)
    return validate_preset(doc if isinstance(doc, dict) else {})


def envelope_to_json(env):
    return json.dumps(env.to_json_dict(), sort_keys=True)


def envelope_from_json(text):
    return AnchorEnvelope.from_json_dict(json.loads(text))
