"""Controlled perturbations: kinematic dampening, audio delay, pitch flattening.

Dampening low-passes the rotation channels of each target joint's parent
(one level up the kinematic chain) and, by default, the joint's own
channels. The audio delay shifts a whole track by prepending silence. Pitch
flattening constrains voiced F0 values to a band around the speaker mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .audio_io import AudioTrack, F0Contour
from .motion_io import ROTATION_CHANNELS, SkeletonClip


@dataclass(frozen=True)
class InterventionParams:
    """Exactly one perturbation per run: sigma in frames, delay in seconds,
    or pitch limit in Hz."""

    dampen_sigma: Optional[float] = None
    delay: Optional[float] = None
    pitch_limit: Optional[float] = None

    def __post_init__(self):
        active = [v for v in (self.dampen_sigma, self.delay, self.pitch_limit) if v is not None]
        if len(active) != 1:
            raise ValueError("exactly one intervention must be active per run")
        if self.dampen_sigma is not None and not self.dampen_sigma > 0:
            raise ValueError("dampen_sigma must be positive")
        if self.delay is not None and self.delay < 0:
            raise ValueError("delay must be non-negative")
        if self.pitch_limit is not None and not self.pitch_limit > 0:
            raise ValueError("pitch_limit must be positive")

    @property
    def kind(self) -> str:
        if self.dampen_sigma is not None:
            return "dampen"
        if self.delay is not None:
            return "delay"
        return "pitch"

    @property
    def strength(self) -> float:
        if self.dampen_sigma is not None:
            return self.dampen_sigma
        if self.delay is not None:
            return self.delay
        return self.pitch_limit


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized Gaussian kernel with std ``sigma`` frames, truncated at 4 sigma."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    radius = int(4.0 * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def _smooth_columns(data: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    radius = (kernel.size - 1) // 2
    out = np.empty_like(data)
    for col in range(data.shape[1]):
        padded = np.pad(data[:, col], radius, mode="symmetric")
        out[:, col] = np.convolve(padded, kernel, mode="valid")
    return out


def dampen_motion(
    clip: SkeletonClip,
    sigma: float,
    target_joints: Sequence[str],
    include_self: bool = True,
) -> SkeletonClip:
    """Gaussian-smooth the rotation channels feeding the target joints.

    Smoothing hits each target's parent joint (dampening is applied one
    level up the chain so it lands on the targets themselves) plus the
    target when ``include_self``. Every other channel is carried over
    bit-exact.
    """
    kernel = gaussian_kernel(sigma)
    to_smooth: list[int] = []
    for name in target_joints:
        idx = clip.joint_index(name)
        parent = clip.joints[idx].parent
        if parent is None or not clip.joints[parent].rotation_channels:
            raise ValueError(
                f"target joint {name!r} needs a parent with rotation channels"
            )
        if parent not in to_smooth:
            to_smooth.append(parent)
        if include_self and clip.joints[idx].rotation_channels and idx not in to_smooth:
            to_smooth.append(idx)

    frames = clip.frames.copy()
    for idx in to_smooth:
        sl = clip.channel_slice(idx)
        cols = [
            sl.start + k
            for k, ch in enumerate(clip.joints[idx].channels)
            if ch in ROTATION_CHANNELS
        ]
        frames[:, cols] = _smooth_columns(frames[:, cols], kernel)
    return clip.with_frames(frames)


def delay_audio(track: AudioTrack, delay: float) -> AudioTrack:
    """Shift a track later in time by prepending silence.

    The shift is exactly round(delay * sample_rate) samples, so derived
    onset times move by the same amount.
    """
    if delay < 0:
        raise ValueError("delay must be non-negative")
    pad = int(round(delay * track.sample_rate))
    if pad == 0:
        return track
    return AudioTrack(np.concatenate([np.zeros(pad), track.samples]), track.sample_rate)


def flatten_pitch(contour: F0Contour, limit: float, mode: str = "clamp") -> F0Contour:
    """Constrain voiced F0 values to +-limit around the voiced mean.

    ``mode='clamp'`` hard-clips; ``mode='scale'`` rescales deviations so the
    largest one lands on the limit. Unvoiced markers stay in place.
    """
    if not limit > 0:
        raise ValueError("limit must be positive")
    if mode not in ("clamp", "scale"):
        raise ValueError(f"unknown pitch flattening mode {mode!r}")
    voiced = contour.voiced_mask
    if not voiced.any():
        raise ValueError("contour has no voiced frames")
    values = contour.values.copy()
    mean = values[voiced].mean()
    if mode == "clamp":
        values[voiced] = np.clip(values[voiced], mean - limit, mean + limit)
    else:
        spread = np.max(np.abs(values[voiced] - mean))
        if spread > limit:
            values[voiced] = mean + (values[voiced] - mean) * (limit / spread)
    return contour.with_values(values)
