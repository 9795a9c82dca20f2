"""Mono audio I/O, amplitude envelope, and F0 contour extraction.

The envelope follows full-wave rectification + zero-phase low-pass +
decimation to the motion frame rate, so speech and gesture signals share a
time base. The pitch tracker is a difference-function (autocorrelation
family) estimator with parabolic lag interpolation and a normalized-peak
voicing decision; unvoiced frames are marked NaN, never zero-filled.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.signal import butter, filtfilt

from .series import ChannelSeries


class UnsupportedWavError(ValueError):
    """WAV payload is not PCM-16 or float-32."""


@dataclass(frozen=True)
class AudioTrack:
    """Mono audio samples in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("samples must be 1-D (mono)")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if not (np.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValueError("sample_rate must be positive")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def __eq__(self, other) -> bool:
        if not isinstance(other, AudioTrack):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )


@dataclass(frozen=True)
class F0Contour:
    """Per-frame fundamental frequency in Hz; unvoiced frames are NaN."""

    values: np.ndarray
    hop: float
    voicing_threshold: float = 0.3
    f0_min: float = 65.0
    f0_max: float = 400.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("values must be 1-D")
        if not self.hop > 0:
            raise ValueError("hop must be positive")
        voiced = values[~np.isnan(values)]
        if voiced.size and (
            np.any(voiced < self.f0_min - 1e-9) or np.any(voiced > self.f0_max + 1e-9)
        ):
            raise ValueError("voiced values must lie within [f0_min, f0_max]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def voiced_mask(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def voiced_values(self) -> np.ndarray:
        return self.values[self.voiced_mask]

    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.hop

    def with_values(self, values: np.ndarray) -> "F0Contour":
        return F0Contour(
            values, self.hop, self.voicing_threshold, self.f0_min, self.f0_max
        )


def read_wav(data: bytes) -> AudioTrack:
    """Decode PCM-16 or float-32 WAV bytes; stereo is downmixed by averaging."""
    try:
        rate, raw = wavfile.read(io.BytesIO(data))
    except Exception as exc:
        raise UnsupportedWavError(f"malformed or unsupported WAV: {exc}") from exc
    if raw.dtype == np.int16:
        samples = raw.astype(np.float64) / 32768.0
    elif raw.dtype in (np.float32, np.float64):
        samples = raw.astype(np.float64)
    else:
        raise UnsupportedWavError(f"unsupported sample format {raw.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioTrack(samples, float(rate))


def write_wav(track: AudioTrack, bit_depth: int = 16) -> bytes:
    """Encode a track as WAV bytes (PCM-16 or float-32)."""
    buf = io.BytesIO()
    if bit_depth == 16:
        scaled = np.clip(np.round(track.samples * 32768.0), -32768, 32767)
        wavfile.write(buf, int(track.sample_rate), scaled.astype(np.int16))
    elif bit_depth == 32:
        wavfile.write(buf, int(track.sample_rate), track.samples.astype(np.float32))
    else:
        raise ValueError("bit_depth must be 16 or 32")
    return buf.getvalue()


def load_wav(path) -> AudioTrack:
    with open(path, "rb") as fh:
        return read_wav(fh.read())


def save_wav(track: AudioTrack, path, bit_depth: int = 16) -> None:
    with open(path, "wb") as fh:
        fh.write(write_wav(track, bit_depth))


def amplitude_envelope(
    track: AudioTrack, target_rate: float, cutoff_hz: float = 5.0
) -> ChannelSeries:
    """Smoothed amplitude envelope, decimated to ``target_rate``.

    Full-wave rectification, 4th-order Butterworth low-pass applied
    forward-backward (zero phase, so beat timing is not lagged), then
    linear-interpolation decimation. Output is non-negative.
    """
    if track.n_samples == 0:
        raise ValueError("cannot compute envelope of an empty track")
    if target_rate > track.sample_rate:
        raise ValueError("target_rate must not exceed the sample rate")
    rectified = np.abs(track.samples)
    nyquist = track.sample_rate / 2.0
    b, a = butter(4, min(cutoff_hz / nyquist, 0.99), btype="low")
    if rectified.size > 3 * max(len(a), len(b)):
        smooth = filtfilt(b, a, rectified)
    else:
        smooth = rectified
    smooth = np.maximum(smooth, 0.0)
    n_out = int(np.ceil(track.duration * target_rate))
    t_out = np.arange(n_out) / target_rate
    t_in = np.arange(track.n_samples) / track.sample_rate
    env = np.interp(t_out, t_in, smooth)
    return ChannelSeries(env, rate=target_rate, label="envelope")


def _frame_difference_functions(
    frames: np.ndarray, window: int, tau_max: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Difference function, cross term, and lagged energies per frame.

    ``frames`` is (n_frames, window + tau_max). Returns (diff, corr, energy)
    each of shape (n_frames, tau_max + 1) where
    diff[t] = sum_j (x[j] - x[j+t])^2 over j < window.
    """
    n_fft = 1
    while n_fft < frames.shape[1] + window:
        n_fft *= 2
    head = frames[:, :window]
    spec_full = np.fft.rfft(frames, n_fft)
    spec_head = np.fft.rfft(head[:, ::-1], n_fft)
    # corr[t] = sum_j head[j] * frames[j + t]
    corr = np.fft.irfft(spec_full * spec_head, n_fft)[:, window - 1 : window + tau_max]
    sq = np.concatenate(
        [np.zeros((frames.shape[0], 1)), np.cumsum(frames**2, axis=1)], axis=1
    )
    taus = np.arange(tau_max + 1)
    energy = sq[:, taus + window] - sq[:, taus]  # sum_{j<window} x[j+t]^2
    diff = energy[:, [0]] + energy - 2.0 * corr
    return np.maximum(diff, 0.0), corr, energy


def extract_f0(
    track: AudioTrack,
    hop: float = 0.01,
    f0_min: float = 65.0,
    f0_max: float = 400.0,
    voicing_threshold: float = 0.3,
    dip_threshold: float = 0.1,
) -> F0Contour:
    """Frame-wise F0 estimate with voicing decision.

    Per frame: cumulative-mean-normalized difference function over the lag
    search range, first dip below ``dip_threshold`` (falling back to the
    global minimum), parabolic interpolation of the lag, and a voiced
    decision from the normalized correlation peak at the chosen lag.
    """
    if not f0_min < f0_max:
        raise ValueError("f0_min must be below f0_max")
    sr = track.sample_rate
    tau_min = max(2, int(np.floor(sr / f0_max)))
    tau_max = int(np.ceil(sr / f0_min))
    window = 2 * tau_max
    frame_len = window + tau_max
    hop_samples = max(1, int(round(hop * sr)))
    n_frames = (track.n_samples - frame_len) // hop_samples + 1
    if n_frames < 2:
        raise ValueError("track too short for the requested hop")

    stride = track.samples.strides[0]
    frames = np.lib.stride_tricks.as_strided(
        track.samples,
        shape=(n_frames, frame_len),
        strides=(hop_samples * stride, stride),
    )
    diff, corr, energy = _frame_difference_functions(frames, window, tau_max)

    taus = np.arange(1, tau_max + 1)
    running = np.cumsum(diff[:, 1:], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cmndf = np.where(running > 0, diff[:, 1:] * taus / running, 1.0)
    cmndf = np.concatenate([np.ones((n_frames, 1)), cmndf], axis=1)

    values = np.full(n_frames, np.nan)
    search = cmndf[:, tau_min : tau_max + 1]
    below = search < dip_threshold
    first_dip = np.argmax(below, axis=1)
    has_dip = below[np.arange(n_frames), first_dip]
    best = np.where(has_dip, first_dip, np.argmin(search, axis=1)) + tau_min

    for t in range(n_frames):
        tau = int(best[t])
        if has_dip[t]:
            # descend to the local minimum of the dip
            while tau + 1 <= tau_max and cmndf[t, tau + 1] < cmndf[t, tau]:
                tau += 1
        e0, et = energy[t, 0], energy[t, tau]
        if e0 <= 1e-12 or et <= 1e-12:
            continue
        peak = corr[t, tau] / np.sqrt(e0 * et)
        if peak < voicing_threshold:
            continue
        if 1 <= tau < tau_max:
            d0, d1, d2 = diff[t, tau - 1], diff[t, tau], diff[t, tau + 1]
            denom = d0 - 2.0 * d1 + d2
            shift = 0.5 * (d0 - d2) / denom if abs(denom) > 1e-12 else 0.0
            tau_frac = tau + np.clip(shift, -0.5, 0.5)
        else:
            tau_frac = float(tau)
        f0 = sr / tau_frac
        if f0_min <= f0 <= f0_max:
            values[t] = f0

    return F0Contour(values, hop_samples / sr, voicing_threshold, f0_min, f0_max)
