import numpy as np
import pytest

from coordkit.kinematics import (
    ChannelSeries,
    SliceSpec,
    gesture_speed,
    joint_angular_speed,
    slice_series,
)
from coordkit.motion_io import JointNode, SkeletonClip

RAD_PER_DEG = np.pi / 180.0


def single_joint_clip(angles_deg, channels=("Zrotation",), frame_time=0.01, name="j"):
    angles = np.atleast_2d(np.asarray(angles_deg, dtype=float).T).T
    joints = (JointNode(name, None, np.zeros(3), channels),)
    return SkeletonClip(joints, frame_time, angles)


def test_constant_rotation_zero_speed():
    clip = single_joint_clip(np.full(10, 33.0))
    assert np.array_equal(joint_angular_speed(clip, "j").data, np.zeros(10))


def test_uniform_one_degree_per_frame():
    clip = single_joint_clip(np.arange(50, dtype=float))
    speed = joint_angular_speed(clip, "j").data
    assert np.max(np.abs(speed - 100.0 * RAD_PER_DEG)) < 1e-9
    assert speed.shape == (50,)


def test_first_frame_duplicated():
    clip = single_joint_clip([0.0, 2.0, 2.0])
    speed = joint_angular_speed(clip, "j").data
    assert speed[0] == speed[1]
    assert speed[2] == 0.0


def test_angular_speed_matches_quaternion_log_oracle():
    from scipy.spatial.transform import Rotation

    rng = np.random.default_rng(17)
    angles = rng.uniform(-90, 90, size=(40, 3))
    clip = single_joint_clip(angles, channels=("Zrotation", "Xrotation", "Yrotation"))
    speed = joint_angular_speed(clip, "j").data

    rots = Rotation.from_euler("ZXY", angles, degrees=True)
    deltas = rots[:-1].inv() * rots[1:]
    oracle = deltas.magnitude() / clip.frame_time
    assert np.max(np.abs(speed[1:] - oracle)) < 1e-9


def test_angular_speed_invariant_to_constant_offset():
    rng = np.random.default_rng(23)
    angles = rng.uniform(-60, 60, size=(30, 3))
    clip = single_joint_clip(angles, channels=("Zrotation", "Xrotation", "Yrotation"))
    shifted = angles.copy()
    shifted[:, 0] += 77.0  # constant pre-rotation about the first channel axis
    clip2 = single_joint_clip(shifted, channels=("Zrotation", "Xrotation", "Yrotation"))
    a = joint_angular_speed(clip, "j").data
    b = joint_angular_speed(clip2, "j").data
    assert np.max(np.abs(a - b)) < 1e-9


def test_angular_speed_requires_rotation_channels():
    joints = (JointNode("j", None, np.zeros(3), ("Xposition",)),)
    clip = SkeletonClip(joints, 0.01, np.zeros((3, 1)))
    with pytest.raises(ValueError, match="rotation"):
        joint_angular_speed(clip, "j")
    with pytest.raises(KeyError):
        joint_angular_speed(clip, "nope")


def three_joint_clip(move_b=True):
    joints = (
        JointNode("a", None, np.zeros(3), ("Zrotation",)),
        JointNode("b", 0, np.zeros(3), ("Zrotation",)),
        JointNode("c", 1, np.zeros(3), ("Zrotation",)),
    )
    frames = np.zeros((20, 3))
    if move_b:
        frames[:, 1] = np.cumsum(np.linspace(0.5, 2.0, 20))
    return SkeletonClip(joints, 0.01, frames)


def test_gesture_speed_additive_identity():
    clip = three_joint_clip()
    total = gesture_speed(clip, ("a", "b", "c")).data
    only_b = joint_angular_speed(clip, "b").data
    assert np.array_equal(total, only_b)


def test_gesture_speed_linearity():
    clip = three_joint_clip()
    doubled = gesture_speed(clip, ("b", "b")).data
    assert np.allclose(doubled, 2 * joint_angular_speed(clip, "b").data)


def test_gesture_speed_sum_oracle():
    rng = np.random.default_rng(31)
    joints = tuple(
        JointNode(f"j{i}", None if i == 0 else 0, np.zeros(3), ("Zrotation", "Xrotation", "Yrotation"))
        for i in range(4)
    )
    clip = SkeletonClip(joints, 0.01, rng.uniform(-45, 45, size=(25, 12)))
    names = tuple(f"j{i}" for i in range(4))
    total = gesture_speed(clip, names).data
    oracle = sum(joint_angular_speed(clip, n).data for n in names)
    assert np.allclose(total, oracle, atol=1e-12)
    mean = gesture_speed(clip, names, aggregate="mean").data
    assert np.allclose(mean, oracle / 4)


def test_gesture_speed_non_negative():
    rng = np.random.default_rng(37)
    clip = single_joint_clip(rng.normal(scale=50, size=(100, 3)),
                             channels=("Zrotation", "Xrotation", "Yrotation"))
    assert np.all(gesture_speed(clip, ("j",)).data >= 0)


def test_slice_95s_gives_three():
    series = ChannelSeries(np.arange(950.0), rate=10.0)
    slices = slice_series(series, SliceSpec(30.0))
    assert len(slices) == 3
    assert [s.start_time for s in slices] == [0.0, 30.0, 60.0]
    assert all(s.n_samples == 300 for s in slices)


def test_slice_too_short_empty():
    series = ChannelSeries(np.arange(290.0), rate=10.0)
    assert slice_series(series, SliceSpec(30.0)) == []


def test_slice_concatenation_oracle():
    rng = np.random.default_rng(41)
    series = ChannelSeries(rng.normal(size=950), rate=10.0)
    slices = slice_series(series, SliceSpec(30.0))
    rebuilt = np.concatenate([s.data for s in slices])
    assert np.array_equal(rebuilt, series.data[:900])


def test_slice_multidim_and_start_time():
    series = ChannelSeries(np.arange(200.0).reshape(100, 2), rate=10.0, start_time=5.0)
    slices = slice_series(series, SliceSpec(5.0))
    assert len(slices) == 2
    assert slices[1].start_time == 10.0
    assert slices[1].data.shape == (50, 2)


def test_slice_spec_validation():
    with pytest.raises(ValueError):
        SliceSpec(0.0)
    with pytest.raises(ValueError):
        SliceSpec(30.0, policy="pad")
