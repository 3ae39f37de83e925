"""Configurable descriptor extraction and the combined gesture vector."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..errors import ConfigError, SchemaError
from .base import FeatureVector, Window, sliding_windows
from . import emg as emg_ops
from . import motion


def assemble_gesture_vector(imu, emg_amplitudes, electrode_angles,
                            prev_quat=None, rate=0.0):
    """19-dim forearm gesture vector from one IMU plus 8 EMG amplitudes.

    Layout: quaternion (4), discrete quaternion derivative (4), the 8
    per-channel amplitudes, their sum, and the horizontal/vertical tension
    components from the electrode positions around the forearm.
    """
    amps = np.asarray(emg_amplitudes, dtype=float).reshape(-1)
    angles = np.asarray(electrode_angles, dtype=float).reshape(-1)
    if len(amps) != 8 or len(angles) != 8:
        raise SchemaError(
            f"expected 8 EMG amplitudes with 8 angles, got {len(amps)}/{len(angles)}"
        )
    quat = np.asarray(imu.quat, dtype=float)
    if prev_quat is None or rate <= 0:
        dquat = np.zeros(4)
    else:
        dquat = (quat - np.asarray(prev_quat, dtype=float)) * rate
    horiz = float(np.sum(amps * np.cos(angles)))
    vert = float(np.sum(amps * np.sin(angles)))
    names = (
        "quat_w", "quat_x", "quat_y", "quat_z",
        "dquat_w", "dquat_x", "dquat_y", "dquat_z",
        *(f"emg_{i}" for i in range(8)),
        "emg_sum", "emg_horiz", "emg_vert",
    )
    values = np.concatenate([quat, dquat, amps, [amps.sum(), horiz, vert]])
    return FeatureVector(names, values)


def _mean_over_frames(window, fn, names):
    vals = np.array([fn(f) for f in window.frames], dtype=float)
    if vals.ndim == 1:
        vals = vals.reshape(-1, 1)
    return list(zip(names, vals.mean(axis=0).tolist()))


def _feat_qom(window, ctx):
    return [("qom", motion.quantity_of_motion(window))]


def _feat_ci(window, ctx):
    return _mean_over_frames(window, motion.contraction_index, ["ci"])


def _feat_bbox(window, ctx):
    return _mean_over_frames(window, motion.bounding_box,
                             ["bbox_w", "bbox_h", "bbox_d"])


def _feat_hull(window, ctx):
    return _mean_over_frames(window, motion.convex_hull_volume, ["hull_volume"])


def _feat_fluidity(window, ctx):
    n_markers = len(window.frames[0].markers)
    fi = [motion.fluidity_index(window, marker_index=i) for i in range(n_markers)]
    return [("fluidity", float(np.mean(fi)))]


def _feat_pos(window, ctx):
    last = window.frames[-1]
    out = []
    for m in last.markers:
        for ax, v in zip("xyz", m.p):
            out.append((f"pos_{m.label}_{ax}", float(v)))
    return out


def _feat_pos_xy(window, ctx):
    p = window.frames[-1].markers[0].p
    return [("pos_x", float(p[0])), ("pos_y", float(p[1]))]


def _feat_pqom(window, ctx):
    spec = ctx.get("band_spec") or motion.BandSpec(ctx.get("tempo_bpm", 120.0))
    fv = motion.pqom(window, spec)
    return list(zip(fv.names, fv.values.tolist()))


def _per_channel(window, fn, prefix):
    mat = window.channel_matrix()
    return [(f"{prefix}_{c}", float(fn(mat[:, c]))) for c in range(mat.shape[1])]


def _feat_mav(window, ctx):
    return _per_channel(window, emg_ops.mav, "mav")


def _feat_rms(window, ctx):
    return _per_channel(window, emg_ops.rms, "rms")


def _feat_zcr(window, ctx):
    return _per_channel(window, emg_ops.zcr, "zcr")


def _feat_tkeo(window, ctx):
    return _per_channel(window, lambda s: float(np.mean(emg_ops.tkeo(s))), "tkeo")


def _feat_quat(window, ctx):
    q = window.frames[-1].quat
    return list(zip(("quat_w", "quat_x", "quat_y", "quat_z"), map(float, q)))


def _feat_accel(window, ctx):
    vals = np.array([f.accel for f in window.frames]).mean(axis=0)
    return list(zip(("accel_x", "accel_y", "accel_z"), vals.tolist()))


def _feat_gyro(window, ctx):
    vals = np.array([f.gyro for f in window.frames]).mean(axis=0)
    return list(zip(("gyro_x", "gyro_y", "gyro_z"), vals.tolist()))


REGISTRY = {
    "qom": ("marker", _feat_qom),
    "ci": ("marker", _feat_ci),
    "bbox": ("marker", _feat_bbox),
    "hull": ("marker", _feat_hull),
    "fluidity": ("marker", _feat_fluidity),
    "pos": ("marker", _feat_pos),
    "pos_xy": ("marker", _feat_pos_xy),
    "pqom": ("marker", _feat_pqom),
    "mav": ("emg", _feat_mav),
    "rms": ("emg", _feat_rms),
    "zcr": ("emg", _feat_zcr),
    "tkeo": ("emg", _feat_tkeo),
    "quat": ("imu", _feat_quat),
    "accel": ("imu", _feat_accel),
    "gyro": ("imu", _feat_gyro),
}


def available_features(kind=None):
    if kind is None:
        return sorted(REGISTRY)
    return sorted(name for name, (k, _) in REGISTRY.items() if k == kind)


class FeatureExtractor(BaseEstimator, TransformerMixin):
    """Turns stream windows into named feature rows.

    Stateless transformer: fit() only validates the feature names so the
    extractor slots into sklearn pipelines.
    """

    def __init__(self, features=("qom", "ci"), window=32, hop=16, tempo_bpm=120.0):
        self.features = tuple(features)
        self.window = window
        self.hop = hop
        self.tempo_bpm = tempo_bpm

    def _check_features(self):
        for name in self.features:
            if name not in REGISTRY:
                raise ConfigError(
                    f"unknown feature {name!r}; valid: {', '.join(available_features())}"
                )

    def fit(self, X=None, y=None):
        self._check_features()
        return self

    def extract(self, window):
        """One FeatureVector from one Window."""
        self._check_features()
        ctx = {"tempo_bpm": self.tempo_bpm}
        pairs = []
        for name in self.features:
            kind, fn = REGISTRY[name]
            if kind != window.kind:
                raise ConfigError(
                    f"feature {name!r} needs a {kind} window, got {window.kind}"
                )
            pairs.extend(fn(window, ctx))
        names, values = zip(*pairs)
        return FeatureVector(names, np.array(values))

    def transform(self, stream):
        """Feature matrix over sliding windows, shape (n_windows, n_features)."""
        rows = [self.extract(w) for w in sliding_windows(stream, self.window, self.hop)]
        if not rows:
            return np.empty((0, 0))
        self.feature_names_ = rows[0].names
        return np.array([r.values for r in rows])

    def get_feature_names_out(self, input_features=None):
        probe = getattr(self, "feature_names_", None)
        if probe is None:
            raise ConfigError("transform() has not produced any rows yet")
        return np.asarray(probe, dtype=object)


__all__ = [
    "FeatureExtractor",
    "FeatureVector",
    "Window",
    "assemble_gesture_vector",
    "available_features",
    "sliding_windows",
]
