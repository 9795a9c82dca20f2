import numpy as np
import pytest

from coordkit.audio_io import AudioTrack, F0Contour, amplitude_envelope
from coordkit.interventions import (
    InterventionParams,
    dampen_motion,
    delay_audio,
    flatten_pitch,
    gaussian_kernel,
)
from coordkit.motion_io import JointNode, SkeletonClip


def arm_clip(hand_angles, arm_angles=None, n_frames=None):
    """root -> arm -> hand chain, 3 rotation channels on arm and hand."""
    if n_frames is None:
        n_frames = np.asarray(hand_angles).shape[0]
    if arm_angles is None:
        arm_angles = np.zeros((n_frames, 3))
    joints = (
        JointNode("root", None, np.zeros(3), ("Xposition", "Yposition", "Zposition")),
        JointNode("Arm", 0, np.array([0.0, 1.0, 0.0]), ("Zrotation", "Xrotation", "Yrotation")),
        JointNode("Hand", 1, np.array([1.0, 0.0, 0.0]), ("Zrotation", "Xrotation", "Yrotation")),
    )
    frames = np.hstack([np.zeros((n_frames, 3)), arm_angles, hand_angles])
    return SkeletonClip(joints, 0.01, frames)


def test_params_exactly_one_active():
    InterventionParams(dampen_sigma=10.0)
    InterventionParams(delay=0.25)
    InterventionParams(pitch_limit=40.0)
    with pytest.raises(ValueError):
        InterventionParams()
    with pytest.raises(ValueError):
        InterventionParams(dampen_sigma=10.0, delay=0.5)
    with pytest.raises(ValueError):
        InterventionParams(dampen_sigma=-1.0)
    assert InterventionParams(delay=0.25).kind == "delay"
    assert InterventionParams(pitch_limit=40.0).strength == 40.0


def test_dampen_constant_channels_unchanged():
    clip = arm_clip(np.full((200, 3), 12.5), np.full((200, 3), -3.0))
    out = dampen_motion(clip, 10.0, ["Hand"])
    assert np.allclose(out.frames, clip.frames, atol=1e-12)


def test_dampen_linear_ramp_interior_unchanged():
    ramp = np.linspace(0, 50, 400)[:, None] * np.array([1.0, 0.5, -0.25])
    clip = arm_clip(ramp)
    out = dampen_motion(clip, 10.0, ["Hand"])
    radius = (gaussian_kernel(10.0).size - 1) // 2
    interior = slice(radius, 400 - radius)
    assert np.allclose(out.frames[interior], clip.frames[interior], atol=1e-9)


def test_dampen_impulse_is_normalized_kernel():
    n = 401
    hand = np.zeros((n, 3))
    hand[200, 0] = 1.0
    clip = arm_clip(hand)
    out = dampen_motion(clip, 10.0, ["Hand"])
    kernel = gaussian_kernel(10.0)
    radius = (kernel.size - 1) // 2
    got = out.channel_data("Hand")[:, 0]
    assert got.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(got[200 - radius : 200 + radius + 1], kernel, atol=1e-12)


def test_dampen_matches_scipy_oracle():
    from scipy.ndimage import gaussian_filter1d

    rng = np.random.default_rng(11)
    hand = rng.normal(scale=20, size=(300, 3))
    arm = rng.normal(scale=10, size=(300, 3))
    clip = arm_clip(hand, arm)
    for sigma in (2.0, 10.0, 25.5):
        out = dampen_motion(clip, sigma, ["Hand"])
        expected = gaussian_filter1d(hand, sigma, axis=0, mode="reflect", truncate=4.0)
        assert np.allclose(out.channel_data("Hand"), expected, atol=1e-10)
        expected_arm = gaussian_filter1d(arm, sigma, axis=0, mode="reflect", truncate=4.0)
        assert np.allclose(out.channel_data("Arm"), expected_arm, atol=1e-10)


def test_dampen_untouched_channels_bit_exact():
    rng = np.random.default_rng(13)
    hand = rng.normal(size=(100, 3))
    clip = arm_clip(hand)
    frames = clip.frames.copy()
    frames[:, 0] = rng.normal(size=100)  # root translation
    clip = clip.with_frames(frames)
    out = dampen_motion(clip, 5.0, ["Hand"])
    assert np.array_equal(out.frames[:, 0:3], clip.frames[:, 0:3])


def test_dampen_include_self_flag():
    rng = np.random.default_rng(17)
    hand = rng.normal(scale=30, size=(200, 3))
    arm = rng.normal(scale=30, size=(200, 3))
    clip = arm_clip(hand, arm)
    out = dampen_motion(clip, 8.0, ["Hand"], include_self=False)
    assert np.array_equal(out.channel_data("Hand"), hand)
    assert not np.array_equal(out.channel_data("Arm"), arm)


def test_dampen_requires_rotating_parent():
    clip = arm_clip(np.zeros((10, 3)))
    with pytest.raises(ValueError, match="parent"):
        dampen_motion(clip, 5.0, ["Arm"])  # parent is the translation-only root
    with pytest.raises(KeyError):
        dampen_motion(clip, 5.0, ["Nope"])


def test_dampen_variance_contraction():
    rng = np.random.default_rng(19)
    hand = rng.normal(scale=15, size=(1000, 3)) + np.sin(
        2 * np.pi * 2.0 * np.arange(1000)[:, None] / 100.0
    )
    clip = arm_clip(hand)
    out10 = dampen_motion(clip, 10.0, ["Hand"])
    assert np.var(out10.channel_data("Hand")) < np.var(hand)

    out5_then_10 = dampen_motion(dampen_motion(clip, 5.0, ["Hand"]), 10.0, ["Hand"])
    assert np.var(out5_then_10.channel_data("Hand")) <= np.var(
        out10.channel_data("Hand")
    ) + 1e-12


def test_delay_prepends_zeros():
    track = AudioTrack(np.ones(16000), 16000.0)
    out = delay_audio(track, 0.5)
    assert out.n_samples == 16000 + 8000
    assert np.array_equal(out.samples[:8000], np.zeros(8000))
    assert np.array_equal(out.samples[8000:], track.samples)


def test_delay_zero_identity():
    track = AudioTrack(np.linspace(-1, 1, 100), 8000.0)
    assert delay_audio(track, 0.0) == track
    with pytest.raises(ValueError):
        delay_audio(track, -0.1)


def test_delay_additivity():
    rng = np.random.default_rng(23)
    track = AudioTrack(rng.uniform(-1, 1, 8000), 16000.0)
    a = delay_audio(delay_audio(track, 0.25), 0.5)
    b = delay_audio(track, 0.75)
    assert a == b


def test_delay_shifts_envelope_onsets():
    from scipy.signal import find_peaks

    sr = 16000.0
    rng = np.random.default_rng(29)
    t = np.arange(int(10 * sr)) / sr
    pulse_times = np.arange(0.5, 9.0, 1.0)
    x = np.zeros(t.size)
    for pt in pulse_times:
        x += np.exp(-0.5 * ((t - pt) / 0.02) ** 2)
    track = AudioTrack(np.clip(x * np.sin(2 * np.pi * 150 * t), -1, 1), sr)

    def onsets(trk):
        env = amplitude_envelope(trk, 100.0)
        peaks, _ = find_peaks(env.data, prominence=np.std(env.data))
        return peaks / 100.0

    base = onsets(track)
    delayed = onsets(delay_audio(track, 0.5))
    assert len(base) == len(pulse_times)
    assert len(delayed) == len(base)
    assert np.max(np.abs(delayed - (base + 0.5))) <= 0.01 + 1e-9


def test_flatten_clamp_arithmetic():
    contour = F0Contour(np.array([100.0, 200.0, 300.0]), hop=0.01)
    out = flatten_pitch(contour, 40.0)
    assert np.allclose(out.values, [160.0, 200.0, 240.0])


def test_flatten_identity_within_band():
    contour = F0Contour(np.array([190.0, 200.0, 210.0]), hop=0.01)
    out = flatten_pitch(contour, 40.0)
    assert np.array_equal(out.values, contour.values)


def test_flatten_kept_unvoiced_and_mean_over_voiced():
    values = np.array([100.0, np.nan, 200.0, np.nan, 300.0, np.nan])
    contour = F0Contour(values, hop=0.01)
    out = flatten_pitch(contour, 40.0)
    # mean over voiced frames only: (100+200+300)/3 = 200
    assert np.isnan(out.values[[1, 3, 5]]).all()
    assert np.allclose(out.values[[0, 2, 4]], [160.0, 200.0, 240.0])


def test_flatten_variance_and_range():
    rng = np.random.default_rng(31)
    values = np.clip(rng.normal(200, 60, size=100), 80, 390)
    contour = F0Contour(values, hop=0.01)
    out = flatten_pitch(contour, 30.0)
    assert np.var(out.voiced_values()) <= np.var(contour.voiced_values())
    assert np.ptp(out.voiced_values()) <= 2 * 30.0 + 1e-9


def test_flatten_scale_mode():
    contour = F0Contour(np.array([100.0, 200.0, 300.0]), hop=0.01)
    out = flatten_pitch(contour, 50.0, mode="scale")
    assert np.allclose(out.values, [150.0, 200.0, 250.0])


def test_flatten_all_unvoiced_error():
    contour = F0Contour(np.array([np.nan, np.nan]), hop=0.01)
    with pytest.raises(ValueError, match="voiced"):
        flatten_pitch(contour, 40.0)
