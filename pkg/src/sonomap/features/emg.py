"""EMG window statistics and recursive Bayesian amplitude estimation.

All ops accept either an emg Window/stream-like object (anything with a
channel_matrix()) or a plain 1-D sample array.
"""

import numpy as np

from ..errors import DataError, InsufficientDataError, ParameterError


def _samples(x, channel):
    if hasattr(x, "channel_matrix"):
        return x.channel_matrix()[:, channel]
    return np.asarray(x, dtype=float).reshape(-1)


def mav(x, channel=0):
    """Mean absolute value of the window."""
    s = _samples(x, channel)
    if len(s) < 1:
        raise InsufficientDataError("mav needs 1+ samples")
    return float(np.mean(np.abs(s)))


def rms(x, channel=0):
    """Root mean square (normalised by window length)."""
    s = _samples(x, channel)
    if len(s) < 1:
        raise InsufficientDataError("rms needs 1+ samples")
    return float(np.sqrt(np.mean(s**2)))


def tkeo(x, channel=0):
    """Teager-Kaiser energy: psi[n] = x[n]^2 - x[n-1]*x[n+1].

    Defined on interior samples; edge values replicate their neighbours so
    the output has the input's length.
    """
    s = _samples(x, channel)
    if len(s) < 3:
        raise InsufficientDataError("tkeo needs 3+ samples")
    psi = np.empty_like(s)
    psi[1:-1] = s[1:-1] ** 2 - s[:-2] * s[2:]
    psi[0] = psi[1]
    psi[-1] = psi[-2]
    return psi


def zcr(x, channel=0):
    """Count of strict sign changes; exact zeros count as positive."""
    s = _samples(x, channel)
    if len(s) < 2:
        raise InsufficientDataError("zcr needs 2+ samples")
    signs = np.where(s >= 0, 1, -1)
    return int(np.sum(signs[:-1] != signs[1:]))


class BayesAmplitudeFilter:
    """Grid-posterior estimator of latent EMG amplitude in (0, 1].

    Per sample: the posterior diffuses (discrete Laplacian, rate
    `diffusion`), receives a uniform jump mass `jump_prob`, is reweighted
    by the likelihood of the rectified sample under a zero-mean Gaussian
    whose sigma is the candidate amplitude, and is renormalised. The
    estimate is the MAP amplitude. The filter is a value type: callers own
    the state, one instance per channel.
    """

    def __init__(self, grid_size=100, diffusion=0.05, jump_prob=1e-3):
        if grid_size < 16:
            raise ParameterError(f"grid_size must be >= 16, got {grid_size}")
        if not 0.0 <= jump_prob < 1.0:
            raise ParameterError(f"jump_prob must be in [0, 1), got {jump_prob}")
        if not 0.0 <= diffusion <= 0.5:
            raise ParameterError(f"diffusion must be in [0, 0.5], got {diffusion}")
        self.grid_size = grid_size
        self.diffusion = diffusion
        self.jump_prob = jump_prob
        self.amplitudes = np.arange(1, grid_size + 1, dtype=float) / grid_size
        self.posterior = np.full(grid_size, 1.0 / grid_size)

    def step(self, x):
        if not np.isfinite(x):
            raise DataError(f"non-finite EMG sample: {x!r}")
        p = self.posterior
        if self.diffusion > 0:
            lap = np.empty_like(p)
            lap[1:-1] = p[2:] - 2.0 * p[1:-1] + p[:-2]
            lap[0] = p[1] - p[0]
            lap[-1] = p[-2] - p[-1]
            p = p + self.diffusion * lap
        if self.jump_prob > 0:
            p = (1.0 - self.jump_prob) * p + self.jump_prob / self.grid_size
        a = self.amplitudes
        p = p * np.exp(-(x * x) / (2.0 * a * a)) / a
        total = p.sum()
        if total <= 0 or not np.isfinite(total):
            p = np.full(self.grid_size, 1.0 / self.grid_size)
        else:
            p = p / total
        self.posterior = p
        return float(a[int(np.argmax(p))])


def bayes_amplitude(x, channel=0, grid_size=100, diffusion=0.05, jump_prob=1e-3):
    """Run the Bayesian filter over a stream; per-sample MAP amplitudes."""
    s = _samples(x, channel)
    filt = BayesAmplitudeFilter(grid_size, diffusion, jump_prob)
    return np.array([filt.step(v) for v in s])
