"""Gesture signals derived from skeleton clips.

Angular speed is measured on local (joint-frame) rotations via the
quaternion geodesic, so smoothing a parent joint never double-counts in a
child's signal. Slicing cuts series into fixed-length thin slices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .motion_io import SkeletonClip, local_rotation_quaternions
from .series import ChannelSeries

__all__ = [
    "ChannelSeries",
    "SliceSpec",
    "joint_angular_speed",
    "gesture_speed",
    "slice_series",
]

# hand-gesture joints the analyses default to
DEFAULT_GESTURE_JOINTS = ("LeftArm", "LeftHand", "RightArm", "RightHand")


@dataclass(frozen=True)
class SliceSpec:
    """Thin-slice segmentation: fixed window length, final partial dropped."""

    length: float = 30.0
    policy: str = "drop-final-partial"

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("slice length must be positive")
        if self.policy != "drop-final-partial":
            raise ValueError(f"unknown slice policy {self.policy!r}")


def joint_angular_speed(clip: SkeletonClip, joint: str) -> ChannelSeries:
    """Per-frame angular speed of one joint's local rotation, rad/s.

    Geodesic angle 2*acos(|<q_t, q_t+1>|) between consecutive frames,
    divided by the frame time; the first value is duplicated so the series
    length matches the clip.
    """
    node = clip.joint(joint)
    if not node.rotation_channels:
        raise ValueError(f"joint {joint!r} has no rotation channels")
    quat = local_rotation_quaternions(clip, joint)
    if clip.n_frames == 1:
        speed = np.zeros(1)
    else:
        dot = np.abs(np.sum(quat[:-1] * quat[1:], axis=1))
        angles = 2.0 * np.arccos(np.clip(dot, -1.0, 1.0))
        speed = np.concatenate([[angles[0]], angles]) / clip.frame_time
    return ChannelSeries(speed, rate=clip.rate, label=f"{joint}.angular_speed")


def gesture_speed(
    clip: SkeletonClip,
    joints: tuple[str, ...] = DEFAULT_GESTURE_JOINTS,
    aggregate: str = "sum",
) -> ChannelSeries:
    """Total angular speed over gesture-relevant joints (element-wise sum).

    ``aggregate='mean'`` divides by the number of joints instead.
    """
    if not joints:
        raise ValueError("at least one joint required")
    if aggregate not in ("sum", "mean"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    total = np.zeros(clip.n_frames)
    for joint in joints:
        total += joint_angular_speed(clip, joint).data
    if aggregate == "mean":
        total /= len(joints)
    return ChannelSeries(total, rate=clip.rate, label="gesture_speed")


def slice_series(series: ChannelSeries, spec: SliceSpec = SliceSpec()) -> list[ChannelSeries]:
    """Cut a series into consecutive non-overlapping windows of spec.length.

    Sample values are carried over bit-exact; a final partial window is
    dropped. Returns an empty list when the series is shorter than one
    window.
    """
    exact = spec.length * series.rate
    n_win = int(round(exact))
    if n_win < 1 or abs(exact - n_win) > 1e-6:
        raise ValueError(
            f"slice length {spec.length}s is not an integer number of samples "
            f"at {series.rate} Hz"
        )
    out = []
    for i in range(series.n_samples // n_win):
        chunk = series.data[i * n_win : (i + 1) * n_win]
        out.append(
            ChannelSeries(
                chunk,
                rate=series.rate,
                label=series.label,
                start_time=series.start_time + i * spec.length,
            )
        )
    return out
