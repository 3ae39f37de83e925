"""Motion descriptors over marker and IMU data.

Marker-based descriptors take a Window (or a single MarkerFrame where the
measure is per-posture); the IMU contraction estimate takes simultaneous
frames from several devices.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfilt
from scipy.spatial import ConvexHull, QhullError

from ..errors import InsufficientDataError, ParameterError
from .base import FeatureVector


def derivative(window, order=1, marker_index=0):
    """Per-sample time derivatives of one marker's position, shape (n, 3).

    Central differences at interior samples, second-order one-sided at the
    edges, applied recursively for higher orders. Needs order + 2 samples.
    """
    if order not in (1, 2, 3):
        raise ParameterError(f"derivative order must be 1, 2, or 3, got {order}")
    if len(window) < order + 2:
        raise InsufficientDataError(
            f"derivative of order {order} needs {order + 2}+ samples, got {len(window)}"
        )
    out = window.positions()[:, marker_index, :]
    for _ in range(order):
        out = np.gradient(out, window.dt, axis=0, edge_order=2)
    return out


def fluidity_index(window, marker_index=0, epsilon=1e-6):
    """Inverse of the integrated jerk magnitude over the window."""
    if len(window) < 5:
        raise InsufficientDataError(f"fluidity needs 5+ samples, got {len(window)}")
    jerk = derivative(window, order=3, marker_index=marker_index)
    mag = np.linalg.norm(jerk, axis=1)
    integral = float(np.trapezoid(mag, dx=window.dt))
    return 1.0 / (epsilon + integral)


def quantity_of_motion(window):
    """Mass-weighted sum of the mean marker speeds over the window."""
    if len(window) < 2:
        raise InsufficientDataError("quantity of motion needs 2+ frames")
    pos = window.positions()  # (n, m, 3)
    masses = window.masses()
    vel = np.gradient(pos, window.dt, axis=0)
    speeds = np.linalg.norm(vel, axis=2)  # (n, m)
    return float(np.sum(masses * speeds.mean(axis=0)))


def contraction_index(frame):
    """Sum of marker distances from the unweighted centroid."""
    pos = frame.positions()
    if len(pos) < 2:
        raise InsufficientDataError("contraction index needs 2+ markers")
    centroid = pos.mean(axis=0)
    return float(np.sum(np.linalg.norm(pos - centroid, axis=1)))


def bounding_box(frame):
    """Axis-aligned (width, height, depth) extents of the marker set."""
    pos = frame.positions()
    if len(pos) < 1:
        raise InsufficientDataError("bounding box needs 1+ markers")
    ext = pos.max(axis=0) - pos.min(axis=0)
    return (float(ext[0]), float(ext[1]), float(ext[2]))


def convex_hull_volume(frame):
    """Volume of the 3-D convex hull; 0 for coplanar/collinear sets."""
    pos = frame.positions()
    if len(pos) < 4:
        raise InsufficientDataError("hull volume needs 4+ markers")
    try:
        return float(ConvexHull(pos).volume)
    except QhullError:
        return 0.0


def _quat_rotate(q, v):
    w = q[0]
    u = np.asarray(q[1:], dtype=float)
    v = np.asarray(v, dtype=float)
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def imu_contraction_estimate(frames, reference=(1.0, 0.0, 0.0)):
    """Posture spread from several IMUs worn on different limbs.

    Each orientation rotates `reference`; the rotated vectors are projected
    onto the horizontal plane and the pairwise Euclidean distances of the
    projections are summed. Small values = limbs aligned, large = apart.
    """
    if len(frames) < 2:
        raise InsufficientDataError("imu contraction needs 2+ devices")
    ref = np.asarray(reference, dtype=float)
    norm = np.linalg.norm(ref)
    if norm == 0:
        raise ParameterError("reference vector must be nonzero")
    ref = ref / norm
    projected = [_quat_rotate(f.quat, ref)[:2] for f in frames]
    total = 0.0
    for i in range(len(projected)):
        for j in range(i + 1, len(projected)):
            total += float(np.linalg.norm(projected[i] - projected[j]))
    return total


@dataclass(frozen=True)
class BandSpec:
    """Rhythmic subdivision bands: ratio 1 = quarter note, 1/2 = eighth..."""

    tempo_bpm: float
    subdivisions: tuple = (2.0, 1.0, 0.5, 0.25)
    bandwidth_hz: float = 0.5

    def __post_init__(self):
        if self.tempo_bpm <= 0:
            raise ParameterError("tempo_bpm must be > 0")
        if self.bandwidth_hz <= 0:
            raise ParameterError("bandwidth_hz must be > 0")
        object.__setattr__(self, "subdivisions", tuple(float(s) for s in self.subdivisions))

    def center_frequencies(self):
        beat_hz = self.tempo_bpm / 60.0
        return tuple(beat_hz / ratio for ratio in self.subdivisions)

    def band_label(self, ratio):
        return f"pqom_{ratio:g}"


def pqom(window, band_spec, marker_index=0):
    """Band energies of one marker's velocity at rhythmic-subdivision rates.

    Each band is a second-order band-pass centred on the subdivision
    frequency; band energy is the mean square of the filtered velocity,
    summed over the three axes.
    """
    centers = band_spec.center_frequencies()
    nyquist = window.rate / 2.0
    for f in centers:
        if f + band_spec.bandwidth_hz / 2.0 >= nyquist:
            raise ParameterError(
                f"band at {f:g} Hz (bw {band_spec.bandwidth_hz:g}) exceeds "
                f"Nyquist {nyquist:g} Hz"
            )
    lowest = min(centers)
    if len(window) / window.rate < 2.0 / lowest:
        raise InsufficientDataError(
            f"window of {len(window) / window.rate:g}s is shorter than two "
            f"periods of the lowest band ({lowest:g} Hz)"
        )
    vel = derivative(window, order=1, marker_index=marker_index)
    names, energies = [], []
    for ratio, f in zip(band_spec.subdivisions, centers):
        half = band_spec.bandwidth_hz / 2.0
        lo = max(f - half, 1e-3)
        sos = butter(2, [lo, f + half], btype="bandpass", fs=window.rate, output="sos")
        filtered = sosfilt(sos, vel, axis=0)
        names.append(band_spec.band_label(ratio))
        energies.append(float(np.mean(np.sum(filtered**2, axis=1))))
    return FeatureVector(tuple(names), np.array(energies))
