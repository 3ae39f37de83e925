import io
import wave

import numpy as np
import pytest

from sonomap.ingest import (
    AudioBuffer,
    FrameStream,
    Marker,
    MarkerFrame,
    gen_synthetic_gesture,
)


@pytest.fixture
def circle_stream():
    # unit circle at 1 Hz sampled 100 Hz for 2 s: speed = 2*pi everywhere
    return gen_synthetic_gesture("circle", 100.0, 2.0, freq_hz=1.0, radius_m=1.0)


@pytest.fixture
def cubic_stream():
    # p = (t^3, 0, 0) over t in [0, 1] inclusive at 100 Hz
    frames = tuple(
        MarkerFrame(k / 100.0, (Marker("m0", ((k / 100.0) ** 3, 0.0, 0.0)),))
        for k in range(101)
    )
    return FrameStream("marker", 100.0, frames)


def make_marker_stream(position_fn, rate=100.0, n=101, labels=("m0",), masses=None):
    """Stream from position_fn(t, label) -> (x, y, z)."""
    masses = masses or {}
    frames = []
    for k in range(n):
        t = k / rate
        markers = tuple(
            Marker(lab, tuple(position_fn(t, lab)), masses.get(lab, 1.0))
            for lab in labels
        )
        frames.append(MarkerFrame(t, markers))
    return FrameStream("marker", rate, tuple(frames))


def sine_buffer(freq_hz=440.0, duration_s=1.0, sr=44100, amp=0.8):
    t = np.arange(int(round(duration_s * sr))) / sr
    return AudioBuffer(sr, amp * np.sin(2 * np.pi * freq_hz * t))


def noise_buffer(duration_s=1.0, sr=44100, amp=0.5, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-amp, amp, int(round(duration_s * sr)))
    return AudioBuffer(sr, x)


def burst_buffer(burst_times, burst_dur=0.1, total_s=None, sr=44100, seed=1):
    """Noise bursts at given onset times over silence."""
    total_s = total_s or (max(burst_times) + burst_dur + 0.2)
    x = np.zeros(int(round(total_s * sr)))
    rng = np.random.default_rng(seed)
    for t0 in burst_times:
        a, b = int(t0 * sr), int((t0 + burst_dur) * sr)
        x[a:b] = rng.uniform(-0.7, 0.7, b - a)
    return AudioBuffer(sr, x)


def pcm16_wav_bytes(samples, sr=44100, channels=1):
    """Hand-rolled PCM16 WAV for parser tests."""
    arr = np.asarray(samples)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    out = io.BytesIO()
    with wave.open(out, "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(2)
        wf.setframerate(sr)
        wf.writeframes(arr.T.reshape(-1).astype("<i2").tobytes())
    return out.getvalue()
