"""Deterministic synthetic multiparty scenes: skeleton clips plus audio
tracks with coupled gesture/speech event structure.

Each person gets a six-joint upper-body chain whose hand and arm rotations
mix smoothed-step gesture strokes at irregular event times with three
incommensurate oscillators: a scene-shared slow sway, a mid-rate
oscillation, and a fast person-specific texture that detunes away from the
group as coupling drops (this is the content a frame-scale Gaussian
dampener strips). A scene-wide salient-event source is blended into every
person's stroke train by ``coupling`` (1.0 = identical trains). Speech is
an amplitude-modulated tone: pulses phase-locked to the person's own
strokes with configurable jitter, and a slowly swept F0 so pitch
interventions have range to act on. Everything derives from one seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioTrack
from .motion_io import JointNode, SkeletonClip


@dataclass(frozen=True)
class SceneSpec:
    """Knobs of the generator; persons share a common phase source mixed by
    ``coupling``; ``beat_rate`` sets the mean gesture-stroke rate."""

    n_persons: int = 5
    duration: float = 600.0
    mocap_rate: float = 100.0
    audio_rate: float = 16000.0
    coupling: float = 0.7
    beat_rate: float = 1.5
    seed: int = 0
    jitter: float = 0.03
    noise: float = 1.0

    def __post_init__(self):
        if self.n_persons < 1:
            raise ValueError("need at least one person")
        if self.duration < 60.0:
            raise ValueError("scene duration must be at least 60 s")
        if not 0.0 <= self.coupling <= 1.0:
            raise ValueError("coupling must lie in [0, 1]")
        if self.beat_rate <= 0 or self.mocap_rate <= 0 or self.audio_rate <= 0:
            raise ValueError("rates must be positive")
        if self.jitter < 0 or self.noise < 0:
            raise ValueError("jitter and noise must be non-negative")


@dataclass(frozen=True)
class Scene:
    """Generated clips and tracks plus the ground-truth stroke times."""

    clips: tuple[SkeletonClip, ...]
    tracks: tuple[AudioTrack, ...]
    events: tuple[np.ndarray, ...]
    spec: SceneSpec

    def __iter__(self):
        yield list(self.clips)
        yield list(self.tracks)


def _renewal_times(rng: np.random.Generator, rate: float, duration: float) -> np.ndarray:
    """Irregular event times at mean rate ``rate`` within [1, duration-1]."""
    if rate <= 0:
        return np.empty(0)
    n_est = int(duration * rate * 1.6) + 8
    gaps = rng.uniform(0.4, 1.6, size=n_est) / rate
    times = 1.0 + np.cumsum(gaps)
    return times[times < duration - 1.0]


def _min_separation_mask(times: np.ndarray, min_gap: float) -> np.ndarray:
    keep = np.ones(times.size, dtype=bool)
    last = -np.inf
    for i, t in enumerate(times):
        if t - last >= min_gap:
            last = t
        else:
            keep[i] = False
    return keep


def _gauss_smooth(x: np.ndarray, sigma_frames: float) -> np.ndarray:
    radius = int(4 * sigma_frames + 0.5)
    grid = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (grid / sigma_frames) ** 2)
    kernel /= kernel.sum()
    padded = np.pad(x, radius, mode="symmetric")
    return np.convolve(padded, kernel, mode="valid")


def _strokes(
    t: np.ndarray, times: np.ndarray, signs: np.ndarray, width: float, rate: float
) -> np.ndarray:
    """Sum of smoothed angle steps; the angular-speed trace then carries one
    Gaussian bump per event, centred on it."""
    from scipy.special import erf

    n = t.size
    out = np.zeros(n)
    tail = np.zeros(n + 1)
    half = int(6 * width * rate)
    root2 = width * np.sqrt(2.0)
    for tk, sk in zip(times, signs):
        center = int(round(tk * rate))
        lo, hi = max(0, center - half), min(n, center + half + 1)
        out[lo:hi] += sk * 0.5 * (1.0 + erf((t[lo:hi] - tk) / root2))
        tail[hi] += sk  # past the window the step has fully happened
    return out + np.cumsum(tail[:-1])


ROT3 = ("Zrotation", "Xrotation", "Yrotation")

_SKELETON = (
    # depth-first: name, parent index, offset, channels, end site
    ("Hips", None, (0.0, 0.9, 0.0),
     ("Xposition", "Yposition", "Zposition") + ROT3, False),
    ("Spine", 0, (0.0, 0.45, 0.0), ROT3, False),
    ("LeftArm", 1, (-0.2, 0.15, 0.0), ROT3, False),
    ("LeftHand", 2, (-0.45, 0.0, 0.0), ROT3, False),
    ("LeftHand_end", 3, (-0.15, 0.0, 0.0), (), True),
    ("RightArm", 1, (0.2, 0.15, 0.0), ROT3, False),
    ("RightHand", 5, (0.45, 0.0, 0.0), ROT3, False),
    ("RightHand_end", 6, (0.15, 0.0, 0.0), (), True),
)


def _build_joints() -> tuple[JointNode, ...]:
    return tuple(
        JointNode(name, parent, np.array(offset), channels, is_end_site=end)
        for name, parent, offset, channels, end in _SKELETON
    )


_JOINT_ORDER = ("Hips", "Spine", "LeftArm", "LeftHand", "LeftHand_end", "RightArm", "RightHand", "RightHand_end")


def generate_scene(spec: SceneSpec) -> Scene:
    """Generate one scene; bit-identical for identical specs."""
    rng = np.random.default_rng(spec.seed)
    n_frames = int(round(spec.duration * spec.mocap_rate))
    t = np.arange(n_frames) / spec.mocap_rate

    # scene-wide sources; salience decides which common events each person
    # responds to, so pairwise overlap scales linearly with coupling
    common_events = _renewal_times(rng, spec.beat_rate, spec.duration)
    common_signs = rng.choice([-1.0, 1.0], size=common_events.size)
    common_salience = rng.random(common_events.size)
    f_fast, f_texture, f_slow = 1.1, 2.5, 0.37
    common_phase = rng.uniform(0, 2 * np.pi, size=2)

    joints = _build_joints()
    stroke_width = 0.1
    clips: list[SkeletonClip] = []
    tracks: list[AudioTrack] = []
    events_out: list[np.ndarray] = []

    for p in range(spec.n_persons):
        # --- gesture events: shared subset + independent remainder
        keep = common_salience < spec.coupling
        shared = common_events[keep]
        shared = shared + (1.0 - spec.coupling) * 0.05 * rng.standard_normal(shared.size)
        shared_signs = common_signs[keep]
        own = _renewal_times(rng, (1.0 - spec.coupling) * spec.beat_rate, spec.duration)
        own_signs = rng.choice([-1.0, 1.0], size=own.size)
        merged = np.concatenate([shared, own])
        merged_signs = np.concatenate([shared_signs, own_signs])
        order = np.argsort(merged, kind="stable")
        sep = _min_separation_mask(merged[order], 0.15)
        events = merged[order][sep]
        signs = merged_signs[order][sep]
        events_out.append(events)

        # --- oscillator mix for this person: the slow sway is scene-wide,
        # the faster components detune and dephase with (1 - coupling), so
        # a low-pass dampener strips exactly the person-specific texture
        detune = 1.0 + (1.0 - spec.coupling) * np.array([0.04, 0.06]) * rng.standard_normal(2)
        own_phase = rng.uniform(0, 2 * np.pi, size=2)
        ph = spec.coupling * common_phase + (1.0 - spec.coupling) * own_phase
        osc_fast = np.sin(2 * np.pi * f_fast * detune[0] * t + ph[0])
        osc_tex = np.sin(2 * np.pi * f_texture * detune[1] * t + ph[1])
        osc_slow = np.sin(2 * np.pi * f_slow * t + common_phase[1])

        stroke = _strokes(t, events, signs, stroke_width, spec.mocap_rate)

        def limb_channels(side_sign: float, gains) -> np.ndarray:
            cols = []
            for a_fast, a_slow, a_stroke, a_tex in gains:
                cols.append(
                    side_sign * (a_fast * osc_fast + a_slow * osc_slow)
                    + a_stroke * stroke
                    + a_tex * spec.noise * osc_tex
                )
            return np.column_stack(cols)

        hand_gains = ((1.5, 4.0, 10.0, 2.0), (1.0, 3.0, 7.0, 1.4), (0.5, 2.0, 4.0, 0.8))
        arm_gains = ((0.8, 2.0, 4.0, 1.2), (0.6, 1.5, 3.0, 0.9), (0.3, 1.0, 1.5, 0.5))

        spine = np.column_stack(
            [
                1.5 * np.sin(2 * np.pi * 0.11 * t + ph[1]),
                1.0 * np.sin(2 * np.pi * 0.07 * t + ph[0]),
                np.zeros(n_frames),
            ]
        )
        root = np.column_stack(
            [
                np.full(n_frames, 1.5 * p),
                np.zeros(n_frames),
                np.zeros(n_frames),
                np.zeros(n_frames),
                np.zeros(n_frames),
                np.zeros(n_frames),
            ]
        )
        blocks = {
            "Hips": root,
            "Spine": spine,
            "LeftArm": limb_channels(-1.0, arm_gains),
            "LeftHand": limb_channels(-1.0, hand_gains),
            "LeftHand_end": np.zeros((n_frames, 0)),
            "RightArm": limb_channels(1.0, arm_gains),
            "RightHand": limb_channels(1.0, hand_gains),
            "RightHand_end": np.zeros((n_frames, 0)),
        }
        frames = np.hstack([blocks[name] for name in _JOINT_ORDER])
        clips.append(SkeletonClip(joints, 1.0 / spec.mocap_rate, frames))

        # --- audio: pulses at stroke times + slowly swept tone
        n_samples = int(round(spec.duration * spec.audio_rate))
        ta = np.arange(n_samples) / spec.audio_rate
        speech = events + spec.jitter * rng.standard_normal(events.size)
        speech = np.sort(speech[(speech > 0.2) & (speech < spec.duration - 0.2)])

        pulse_env = np.zeros(n_samples)
        for tk in speech:
            lo = max(0, int((tk - 0.3) * spec.audio_rate))
            hi = min(n_samples, int((tk + 0.3) * spec.audio_rate))
            seg = ta[lo:hi]
            pulse_env[lo:hi] += np.exp(-0.5 * ((seg - tk) / 0.06) ** 2)

        f0_base = rng.uniform(140.0, 190.0)
        f0_rate = rng.uniform(0.06, 0.12)
        f0_phase = rng.uniform(0, 2 * np.pi)
        f0 = f0_base + 50.0 * np.sin(2 * np.pi * f0_rate * ta + f0_phase)
        carrier_phase = 2 * np.pi * np.cumsum(f0) / spec.audio_rate
        carrier = np.sin(carrier_phase) + 0.25 * np.sin(2 * carrier_phase)

        amp_wander = 0.025 * (1.0 + np.sin(2 * np.pi * 0.09 * ta + ph[0]))
        amplitude = 0.04 + amp_wander + 0.6 * pulse_env
        tracks.append(
            AudioTrack(np.clip(amplitude * carrier, -1.0, 1.0), spec.audio_rate)
        )

    return Scene(tuple(clips), tuple(tracks), tuple(events_out), spec)
