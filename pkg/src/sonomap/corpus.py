"""Corpus-based concatenative synthesis: onset segmentation, per-unit
audio descriptors, nearest-unit retrieval, and unit-sequence rendering.

Each unit carries a 19-value descriptor: duration, then mean/std pairs of
frame-wise fundamental frequency, energy, periodicity, lag-1
autocorrelation, loudness, and the spectral centroid/spread/skewness/
kurtosis moments. Retrieval happens in the z-scored descriptor space.
"""

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InsufficientDataError, ParameterError, SchemaError
from .ingest import AudioBuffer, read_wav

DESCRIPTOR_NAMES = (
    "duration",
    "frequency_mu", "frequency_sigma",
    "energy_mu", "energy_sigma",
    "periodicity_mu", "periodicity_sigma",
    "ac1_mu", "ac1_sigma",
    "loudness_mu", "loudness_sigma",
    "centroid_mu", "centroid_sigma",
    "spread_mu", "spread_sigma",
    "skewness_mu", "skewness_sigma",
    "kurtosis_mu", "kurtosis_sigma",
)

N_DESCRIPTORS = len(DESCRIPTOR_NAMES)  # 19

PITCH_MIN_HZ = 50.0
PITCH_MAX_HZ = 2000.0
STD_FLOOR = 1e-9
ENERGY_FLOOR = 1e-12


@dataclass(frozen=True)
class AudioUnit:
    source_id: str
    start: int
    length: int
    descriptor: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.length <= 0:
            raise SchemaError("unit length must be > 0")
        vec = np.asarray(self.descriptor, dtype=float).reshape(-1)
        if len(vec) != N_DESCRIPTORS:
            raise SchemaError(
                f"descriptor has {len(vec)} values, expected {N_DESCRIPTORS}"
            )
        object.__setattr__(self, "descriptor", vec)

    @property
    def span(self):
        return (self.start, self.length)


@dataclass(frozen=True)
class Corpus:
    units: tuple
    norm_mean: np.ndarray
    norm_std: np.ndarray
    sources: dict
    skipped: int = 0

    def __post_init__(self):
        mat = (np.array([u.descriptor for u in self.units])
               if self.units else np.empty((0, N_DESCRIPTORS)))
        object.__setattr__(self, "_descriptor_matrix", mat)
        object.__setattr__(self, "_z_matrix",
                           (mat - self.norm_mean) / self.norm_std)

    def descriptor_matrix(self):
        """(n_units, 19) matrix, built once; the corpus is immutable."""
        return self._descriptor_matrix

    def z_matrix(self):
        """Descriptor matrix in z-score space, built once."""
        return self._z_matrix

    def __len__(self):
        return len(self.units)

    def stats(self):
        durations = [u.descriptor[0] for u in self.units]
        return {
            "unit_count": len(self.units),
            "mean_duration_s": float(np.mean(durations)) if durations else 0.0,
            "skipped": self.skipped,
        }


def _mono(buffer):
    return buffer.samples.mean(axis=0)


# ---------------------------------------------------------------------------
# segmentation

def segment_onsets(buffer, frame_ms=20.0, hop_ms=10.0, threshold_ratio=2.0,
                   min_unit_ms=50.0):
    """Energy-rise onset segmentation; spans run onset-to-next-onset.

    An onset fires where the short-time energy crosses above
    threshold_ratio x (trailing median of the envelope). Units shorter
    than min_unit_ms merge forward. Digital silence yields no units.
    """
    if frame_ms < hop_ms:
        raise ParameterError("frame_ms must be >= hop_ms")
    x = _mono(buffer)
    sr = buffer.sample_rate
    flen = max(int(round(frame_ms / 1000.0 * sr)), 1)
    hop = max(int(round(hop_ms / 1000.0 * sr)), 1)
    if len(x) < flen:
        return []
    starts = np.arange(0, len(x) - flen + 1, hop)
    envelope = np.array([float(np.mean(x[s:s + flen] ** 2)) for s in starts])

    median_len = max(int(round(1000.0 / hop_ms)), 5)  # ~1 s of history
    onsets = []
    prev_above = False
    for k, e in enumerate(envelope):
        history = envelope[max(0, k - median_len):k + 1]
        threshold = max(threshold_ratio * float(np.median(history)), ENERGY_FLOOR)
        above = e > threshold
        if above and not prev_above:
            onsets.append(int(starts[k]))
        prev_above = above
    if not onsets:
        return []

    spans = []
    for i, onset in enumerate(onsets):
        end = onsets[i + 1] if i + 1 < len(onsets) else len(x)
        spans.append((onset, end - onset))

    min_len = int(round(min_unit_ms / 1000.0 * sr))
    merged = []
    pending = None
    for start, length in spans:
        if pending is not None:
            length = start + length - pending
            start = pending
            pending = None
        if length < min_len:
            pending = start
        else:
            merged.append((start, length))
    if pending is not None:
        if merged:
            last_start, last_len = merged[-1]
            merged[-1] = (last_start, pending + (len(x) - pending) - last_start)
        else:
            merged.append((pending, len(x) - pending))
    return merged


# ---------------------------------------------------------------------------
# descriptor analysis

def _autocorr_features(frame, sr):
    """(pitch_hz, periodicity, ac1) from the unbiased autocorrelation."""
    n = len(frame)
    power = float(np.dot(frame, frame)) / n
    if power < ENERGY_FLOOR:
        return 0.0, 0.0, 0.0
    r = np.correlate(frame, frame, mode="full")[n - 1:]
    counts = n - np.arange(n)
    r_unbiased = r / counts
    r0 = r_unbiased[0]
    ac1 = float(r[1] / r[0]) if n > 1 else 0.0
    lag_min = max(int(math.ceil(sr / PITCH_MAX_HZ)), 2)
    lag_max = min(int(sr / PITCH_MIN_HZ), n - 2)
    if lag_max <= lag_min:
        return 0.0, 0.0, ac1
    seg = r_unbiased[lag_min:lag_max + 1]
    peak = int(np.argmax(seg)) + lag_min
    # prefer the first local peak comparable to the global one, otherwise a
    # pure tone locks onto a subharmonic lag (2x, 3x the period)
    ceiling = 0.85 * r_unbiased[peak]
    for lag in range(lag_min + 1, lag_max):
        if (r_unbiased[lag] >= ceiling
                and r_unbiased[lag] >= r_unbiased[lag - 1]
                and r_unbiased[lag] >= r_unbiased[lag + 1]):
            peak = lag
            break
    # parabolic refinement around the integer peak lag
    y0, y1, y2 = r_unbiased[peak - 1], r_unbiased[peak], r_unbiased[peak + 1]
    denom = y0 - 2.0 * y1 + y2
    delta = 0.5 * (y0 - y2) / denom if abs(denom) > 1e-18 else 0.0
    delta = float(np.clip(delta, -0.5, 0.5))
    pitch = sr / (peak + delta)
    periodicity = float(np.clip(r_unbiased[peak] / r0, 0.0, 1.0))
    return float(pitch), periodicity, ac1


def _spectral_moments(frame, sr, window):
    mag = np.abs(np.fft.rfft(frame * window))
    total = mag.sum()
    if total < 1e-12:
        return 0.0, 0.0, 0.0, 0.0
    freqs = np.fft.rfftfreq(len(frame), 1.0 / sr)
    w = mag / total
    centroid = float(np.sum(freqs * w))
    var = float(np.sum((freqs - centroid) ** 2 * w))
    spread = math.sqrt(max(var, 0.0))
    if spread < 1e-9:
        return centroid, spread, 0.0, 0.0
    skew = float(np.sum((freqs - centroid) ** 3 * w) / spread**3)
    kurt = float(np.sum((freqs - centroid) ** 4 * w) / spread**4)
    return centroid, spread, skew, kurt


def analyze_unit(buffer, span, frame_ms=46.0, hop_ms=23.0):
    """19-value descriptor for one unit span of a buffer."""
    start, length = span
    if start < 0 or start + length > buffer.n_samples:
        raise ParameterError(
            f"span {span} outside buffer of {buffer.n_samples} samples"
        )
    sr = buffer.sample_rate
    x = _mono(buffer)[start:start + length]
    flen = max(int(round(frame_ms / 1000.0 * sr)), 4)
    hop = max(int(round(hop_ms / 1000.0 * sr)), 1)
    if length < flen + hop:
        raise InsufficientDataError(
            f"span of {length} samples shorter than two analysis frames"
        )
    window = np.hanning(flen)
    rows = []
    for s in range(0, length - flen + 1, hop):
        frame = x[s:s + flen]
        energy = float(np.mean(frame**2))
        loudness = 10.0 * math.log10(energy + ENERGY_FLOOR)
        pitch, periodicity, ac1 = _autocorr_features(frame, sr)
        centroid, spread, skew, kurt = _spectral_moments(frame, sr, window)
        rows.append((pitch, energy, periodicity, ac1, loudness,
                     centroid, spread, skew, kurt))
    rows = np.array(rows)
    mu = rows.mean(axis=0)
    sigma = rows.std(axis=0)
    descriptor = np.empty(N_DESCRIPTORS)
    descriptor[0] = length / sr
    descriptor[1::2] = mu
    descriptor[2::2] = sigma
    return descriptor


# ---------------------------------------------------------------------------
# corpus construction and retrieval

def _normalization(units):
    if not units:
        return np.zeros(N_DESCRIPTORS), np.ones(N_DESCRIPTORS)
    mat = np.array([u.descriptor for u in units])
    return mat.mean(axis=0), np.maximum(mat.std(axis=0), STD_FLOOR)


def build_corpus(buffers, segmentation=None, analysis=None):
    """Segment and analyse every buffer into a retrievable corpus.

    `buffers` is a mapping source_id -> AudioBuffer or a plain sequence
    (ids become src0, src1, ...). Degenerate units (too short to analyse
    or with non-finite descriptors) are skipped and counted.
    """
    if isinstance(buffers, dict):
        sources = dict(buffers)
    else:
        sources = {f"src{i}": b for i, b in enumerate(buffers)}
    if not sources:
        raise InsufficientDataError("no source buffers given")
    segmentation = segmentation or {}
    analysis = analysis or {}
    units = []
    skipped = 0
    for source_id, buffer in sources.items():
        for span in segment_onsets(buffer, **segmentation):
            try:
                descriptor = analyze_unit(buffer, span, **analysis)
            except InsufficientDataError:
                skipped += 1
                continue
            if not np.all(np.isfinite(descriptor)):
                skipped += 1
                continue
            units.append(AudioUnit(source_id, span[0], span[1], descriptor))
    mean, std = _normalization(units)
    return Corpus(tuple(units), mean, std, sources, skipped)


def add_units(corpus, buffer, source_id, segmentation=None, analysis=None):
    """New corpus value with one more analysed source; stats recomputed."""
    if source_id in corpus.sources:
        raise ParameterError(f"source id {source_id!r} already registered")
    extra = build_corpus({source_id: buffer}, segmentation, analysis)
    units = corpus.units + extra.units
    mean, std = _normalization(units)
    sources = dict(corpus.sources)
    sources[source_id] = buffer
    return Corpus(tuple(units), mean, std, sources, corpus.skipped + extra.skipped)


def retrieve_knn(corpus, target, k=1, weights=None):
    """k nearest units to a target descriptor, z-scored Euclidean metric.

    Returns [(AudioUnit, distance)] ascending; ties break by unit index;
    k is clamped to the corpus size.
    """
    if len(corpus) == 0:
        raise InsufficientDataError("corpus is empty")
    if k < 1:
        raise ParameterError("k must be >= 1")
    target = np.asarray(target, dtype=float).reshape(-1)
    if len(target) != N_DESCRIPTORS:
        raise SchemaError(
            f"target has {len(target)} values, expected {N_DESCRIPTORS}"
        )
    if weights is None:
        w = np.ones(N_DESCRIPTORS)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(w) != N_DESCRIPTORS or np.any(w < 0):
            raise ParameterError("weights must be 19 non-negative values")
    z_units = corpus.z_matrix()
    z_target = (target - corpus.norm_mean) / corpus.norm_std
    dists = np.sqrt(np.sum(w * (z_units - z_target) ** 2, axis=1))
    n = len(corpus)
    k = min(k, n)
    if k < n:
        # exact top-k without a full sort: partition, then resolve ties at
        # the k-th distance by unit index
        kth_dist = np.partition(dists, k - 1)[k - 1]
        cand = np.flatnonzero(dists <= kth_dist)
        order = cand[np.lexsort((cand, dists[cand]))][:k]
    else:
        order = np.lexsort((np.arange(n), dists))
    return [(corpus.units[i], float(dists[i])) for i in order[:k]]


def render_unit_sequence(corpus, units, crossfade_ms=10.0):
    """Concatenate unit audio with equal-power crossfades."""
    if not units:
        raise InsufficientDataError("no units to render")
    segments = []
    rate = None
    channels = None
    for unit in units:
        if unit.source_id not in corpus.sources:
            raise DataError(f"unit references unregistered source {unit.source_id!r}")
        src = corpus.sources[unit.source_id]
        if rate is None:
            rate, channels = src.sample_rate, src.n_channels
        elif src.sample_rate != rate or src.n_channels != channels:
            raise DataError("unit sources disagree on rate or channel count")
        segments.append(src.samples[:, unit.start:unit.start + unit.length])

    n_x = int(round(crossfade_ms / 1000.0 * rate))
    out = segments[0].copy()
    for seg in segments[1:]:
        xf = min(n_x, out.shape[1], seg.shape[1])
        if xf == 0:
            out = np.concatenate([out, seg], axis=1)
            continue
        theta = np.linspace(0.0, np.pi / 2.0, xf)
        out[:, -xf:] = out[:, -xf:] * np.cos(theta) + seg[:, :xf] * np.sin(theta)
        out = np.concatenate([out, seg[:, xf:]], axis=1)
    peak = float(np.max(np.abs(out))) if out.size else 0.0
    if peak > 1.0:
        out = out / peak
    return AudioBuffer(rate, out)


# ---------------------------------------------------------------------------
# persistence

CORPUS_FORMAT = "sonomap-corpus"
CORPUS_VERSION = 1


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def save_corpus(corpus, path, source_paths):
    """Write the JSON index; audio stays in the referenced WAV files."""
    missing = set(corpus.sources) - set(source_paths)
    if missing:
        raise ParameterError(f"no file path for sources: {sorted(missing)}")
    base = os.path.dirname(os.path.abspath(path))
    doc = {
        "format": CORPUS_FORMAT,
        "version": CORPUS_VERSION,
        "descriptor_names": list(DESCRIPTOR_NAMES),
        "normalization": {
            "mean": corpus.norm_mean.tolist(),
            "std": corpus.norm_std.tolist(),
        },
        "skipped": corpus.skipped,
        "sources": {
            sid: {
                "path": os.path.relpath(os.path.abspath(source_paths[sid]), base),
                "sha256": _sha256(source_paths[sid]),
            }
            for sid in corpus.sources
        },
        "units": [
            {
                "source_id": u.source_id,
                "start": u.start,
                "length": u.length,
                "descriptor": u.descriptor.tolist(),
            }
            for u in corpus.units
        ],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True, indent=0)
        f.write("\n")


def load_corpus(path):
    """Load an index and its WAV sources, revalidating content hashes."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != CORPUS_FORMAT:
        raise SchemaError(f"not a {CORPUS_FORMAT} document")
    if doc.get("version") != CORPUS_VERSION:
        raise SchemaError(f"corpus version {doc.get('version')} unsupported")
    base = os.path.dirname(os.path.abspath(path))
    sources = {}
    for sid, meta in doc["sources"].items():
        wav_path = os.path.join(base, meta["path"])
        if not os.path.exists(wav_path):
            raise DataError(f"source file missing: {wav_path}")
        if _sha256(wav_path) != meta["sha256"]:
            raise DataError(f"source file changed since indexing: {wav_path}")
        with open(wav_path, "rb") as f:
            sources[sid] = read_wav(f.read())
    units = tuple(
        AudioUnit(u["source_id"], int(u["start"]), int(u["length"]),
                  np.array(u["descriptor"], dtype=float))
        for u in doc["units"]
    )
    return Corpus(
        units,
        np.array(doc["normalization"]["mean"], dtype=float),
        np.array(doc["normalization"]["std"], dtype=float),
        sources,
        int(doc.get("skipped", 0)),
    )
