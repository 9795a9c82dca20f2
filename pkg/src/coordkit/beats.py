"""Empirical mode decomposition, beat onsets per scale, and the
Gaussian-weighted multiscale beat-consistency score.

EMD splits a signal into intrinsic mode functions from fast to slow by
iterative sifting (cubic-spline envelopes through the extrema, subtract the
envelope mean, Cauchy-type stop). Beats are prominent IMF maxima;
consistency of two onset trains is the mean Gaussian proximity of each
onset in the first train to its nearest onset in the second (1 = perfect
synchrony, normalized by the first train's beat count).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import find_peaks

from .series import ChannelSeries


class InsufficientBeatsError(ValueError):
    """Too few onsets (or IMFs) to score a slice; flag and exclude it."""


@dataclass(frozen=True)
class ImfSet:
    """Ordered intrinsic mode functions (fast to slow) plus the residual."""

    imfs: tuple[np.ndarray, ...]
    residual: np.ndarray
    rate: float

    def __post_init__(self):
        imfs = tuple(np.asarray(m, dtype=np.float64) for m in self.imfs)
        for m in imfs:
            m.setflags(write=False)
        residual = np.asarray(self.residual, dtype=np.float64)
        residual.setflags(write=False)
        object.__setattr__(self, "imfs", imfs)
        object.__setattr__(self, "residual", residual)

    @property
    def n_imfs(self) -> int:
        return len(self.imfs)

    def reconstruct(self) -> np.ndarray:
        out = self.residual.copy()
        for m in self.imfs:
            out += m
        return out


@dataclass(frozen=True)
class OnsetTrain:
    """Sorted event times in seconds from one signal at one EMD scale."""

    times: np.ndarray
    source: str = "gesture"
    scale: int = 0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1:
            raise ValueError("times must be 1-D")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return self.times.size

    def shifted(self, offset: float) -> "OnsetTrain":
        return OnsetTrain(self.times + offset, self.source, self.scale)


@dataclass(frozen=True)
class BeatConsistencyParams:
    """Gaussian width of the proximity score and the minimum beat count."""

    sigma_bc: float = 0.1
    min_beats: int = 1

    def __post_init__(self):
        if not self.sigma_bc > 0:
            raise ValueError("sigma_bc must be positive")
        if self.min_beats < 0:
            raise ValueError("min_beats must be >= 0")


@dataclass(frozen=True)
class BeatsConfig:
    """Settings for the multiscale gesture/speech consistency metric."""

    sigma_bc: float = 0.1
    prominence: float = 1.0
    min_beats: int = 1
    max_imfs: int = 8
    sd_thresh: float = 0.2
    max_sift: int = 50
    boundary: str = "mirror"

    @property
    def bc_params(self) -> BeatConsistencyParams:
        return BeatConsistencyParams(self.sigma_bc, self.min_beats)


def _local_extrema(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of interior maxima and minima; plateaus count once (midpoint)."""
    dx = np.diff(x)
    nz = np.flatnonzero(dx != 0)
    if nz.size < 2:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    slope = np.sign(dx[nz])
    change = np.flatnonzero(slope[:-1] != slope[1:])
    starts = nz[change] + 1
    ends = nz[change + 1]
    idx = (starts + ends) // 2
    return idx[slope[change] > 0], idx[slope[change] < 0]


def _zero_crossings(x: np.ndarray) -> int:
    s = np.sign(x)
    s = s[s != 0]
    if s.size < 2:
        return 0
    return int(np.sum(s[:-1] != s[1:]))


def _envelope(pos: np.ndarray, val: np.ndarray, n: int, mirror: bool) -> np.ndarray:
    """Spline through extrema, extended past the ends by mirrored extrema."""
    if mirror:
        k = min(2, pos.size)
        lp, lv = -pos[:k][::-1], val[:k][::-1]
        keep = lp < 0
        rp = 2 * (n - 1) - pos[-k:][::-1]
        rv = val[-k:][::-1]
        keep_r = rp > n - 1
        pos = np.concatenate([lp[keep], pos, rp[keep_r]])
        val = np.concatenate([lv[keep], val, rv[keep_r]])
    t = np.arange(n)
    if pos.size < 4:
        return np.interp(t, pos, val)
    return CubicSpline(pos, val)(t)


def _sift(signal: np.ndarray, cfg: BeatsConfig) -> np.ndarray | None:
    """Extract one IMF, or None when the signal has too few extrema."""
    h = signal
    mirror = cfg.boundary == "mirror"
    for _ in range(cfg.max_sift):
        maxima, minima = _local_extrema(h)
        if maxima.size < 2 or minima.size < 2:
            return None if h is signal else h
        upper = _envelope(maxima, h[maxima], h.size, mirror)
        lower = _envelope(minima, h[minima], h.size, mirror)
        mean_env = 0.5 * (upper + lower)
        h_new = h - mean_env
        denom = float(np.sum(h * h))
        sd = float(np.sum(mean_env * mean_env)) / denom if denom > 0 else 0.0
        h = h_new
        if sd < cfg.sd_thresh:
            mx, mn = _local_extrema(h)
            if abs((mx.size + mn.size) - _zero_crossings(h)) <= 1:
                break
    return h


def emd_decompose(
    series, rate: float | None = None, max_imfs: int = 8, cfg: BeatsConfig | None = None
) -> ImfSet:
    """Decompose a signal into IMFs plus a monotone (or flat) residual.

    Accepts a ``ChannelSeries`` or a raw 1-D array with ``rate``. The sum
    of the IMFs and the residual reproduces the input to float precision.
    """
    if isinstance(series, ChannelSeries):
        x = series.data
        rate = series.rate
    else:
        x = np.asarray(series, dtype=np.float64)
        if rate is None:
            raise ValueError("rate required for raw-array input")
    if x.ndim != 1 or x.size < 8:
        raise ValueError("signal must be 1-D with at least 8 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal must be finite")
    if cfg is None:
        cfg = BeatsConfig(max_imfs=max_imfs)

    residual = x.copy()
    imfs: list[np.ndarray] = []
    while len(imfs) < cfg.max_imfs:
        imf = _sift(residual, cfg)
        if imf is None:
            break
        imfs.append(imf)
        residual = residual - imf
    return ImfSet(tuple(imfs), residual, rate)


def detect_beats(
    imf,
    rate: float | None = None,
    prominence: float = 1.0,
    start_time: float = 0.0,
    source: str = "gesture",
    scale: int = 0,
) -> OnsetTrain:
    """Onsets = local maxima of an IMF with prominence >= prominence * std."""
    if isinstance(imf, ChannelSeries):
        x, rate, start_time = imf.data, imf.rate, imf.start_time
    else:
        x = np.asarray(imf, dtype=np.float64)
        if rate is None:
            raise ValueError("rate required for raw-array input")
    if not prominence > 0:
        raise ValueError("prominence must be positive")
    std = x.std()
    if std == 0:
        return OnsetTrain(np.empty(0), source, scale)
    peaks, _ = find_peaks(x, prominence=prominence * std)
    return OnsetTrain(start_time + peaks / rate, source, scale)


def beat_consistency(
    g: OnsetTrain, s: OnsetTrain, params: BeatConsistencyParams = BeatConsistencyParams()
) -> float:
    """Mean Gaussian proximity of each onset in ``g`` to its nearest in ``s``.

    Normalized over ``g`` (not symmetric). 1.0 means every onset has an
    exact partner; an empty ``s`` scores 0. Raises when ``g`` has fewer
    than ``min_beats`` onsets so callers can flag the slice.
    """
    if len(g) < max(params.min_beats, 1):
        raise InsufficientBeatsError(
            f"onset train has {len(g)} beats, need {max(params.min_beats, 1)}"
        )
    if len(s) == 0:
        return 0.0
    idx = np.searchsorted(s.times, g.times)
    left = s.times[np.clip(idx - 1, 0, len(s) - 1)]
    right = s.times[np.clip(idx, 0, len(s) - 1)]
    nearest = np.minimum(np.abs(g.times - left), np.abs(g.times - right))
    return float(np.mean(np.exp(-(nearest**2) / (2.0 * params.sigma_bc**2))))


def _mean_frequency(imf: np.ndarray, rate: float) -> float:
    return _zero_crossings(imf) * rate / (2.0 * imf.size)


def multiscale_beat_consistency(
    a: ChannelSeries, b: ChannelSeries, cfg: BeatsConfig = BeatsConfig()
) -> float:
    """Mean beat consistency across EMD scales of two signals.

    Both signals are decomposed; IMFs are paired by rank of mean
    instantaneous frequency (zero-crossing proxy) over the min of the two
    IMF counts; scores are normalized over the first signal's onsets.
    """
    if abs(a.duration - b.duration) > 0.5 / min(a.rate, b.rate):
        raise ValueError("series must cover equal slice spans")
    set_a = emd_decompose(a, cfg=cfg)
    set_b = emd_decompose(b, cfg=cfg)
    n_scales = min(set_a.n_imfs, set_b.n_imfs)
    if n_scales < 1:
        raise InsufficientBeatsError("fewer than one IMF pair")

    def ranked(imf_set: ImfSet) -> list[np.ndarray]:
        freqs = [_mean_frequency(m, imf_set.rate) for m in imf_set.imfs]
        order = np.argsort(freqs, kind="stable")[::-1]
        return [imf_set.imfs[i] for i in order]

    imfs_a, imfs_b = ranked(set_a), ranked(set_b)
    scores = []
    for k in range(n_scales):
        g = detect_beats(
            imfs_a[k], a.rate, cfg.prominence, a.start_time, source=a.label or "a", scale=k
        )
        s = detect_beats(
            imfs_b[k], b.rate, cfg.prominence, b.start_time, source=b.label or "b", scale=k
        )
        try:
            scores.append(beat_consistency(g, s, cfg.bc_params))
        except InsufficientBeatsError:
            continue  # a scale without beats carries no timing evidence
    if not scores:
        raise InsufficientBeatsError("no scale produced a scoreable onset pair")
    return float(np.mean(scores))
