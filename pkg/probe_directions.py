"""Scratch probe: do the intervention directions come out right on a small scene?"""
import numpy as np

from coordkit.audio_io import amplitude_envelope
from coordkit.beats import BeatsConfig, multiscale_beat_consistency
from coordkit.elastic import SdtwParams, trajectory_distance
from coordkit.interventions import dampen_motion, delay_audio
from coordkit.kinematics import (
    DEFAULT_GESTURE_JOINTS,
    SliceSpec,
    gesture_speed,
    joint_angular_speed,
    slice_series,
)
from coordkit.motion_io import forward_kinematics
from coordkit.rqa import RadiusCalibrationError, RqaConfig, crqa_pipeline
from coordkit.synth import SceneSpec, generate_scene

SPEC = SceneSpec(n_persons=3, duration=240.0, mocap_rate=100.0, audio_rate=16000.0,
                 coupling=0.7, seed=42)
HANDS = ("LeftHand", "RightHand")
SLICES = SliceSpec(30.0)


def sliced_joint_speeds(clip, rate):
    out = {}
    for j in DEFAULT_GESTURE_JOINTS:
        s = joint_angular_speed(clip, j).resample(rate)
        out[j] = slice_series(s, SLICES)
    return out


def sliced_trajectories(clip, rate):
    out = {}
    for j in DEFAULT_GESTURE_JOINTS:
        out[j] = slice_series(forward_kinematics(clip, j).resample(rate), SLICES)
    return out


def crqa_stats(clips, rate=20.0):
    speeds = [sliced_joint_speeds(c, rate) for c in clips]
    det, mlr = [], []
    for a in range(len(clips)):
        for b in range(a + 1, len(clips)):
            for j in HANDS:
                for sa, sb in zip(speeds[a][j], speeds[b][j]):
                    try:
                        r = crqa_pipeline(sa, sb, RqaConfig())
                    except RadiusCalibrationError:
                        continue
                    det.append(r.det)
                    mlr.append(r.mean_lr)
    return np.mean(det), np.mean(mlr)


def sdtw_stats(clips, rate=10.0):
    trajs = [sliced_trajectories(c, rate) for c in clips]
    costs = []
    for a in range(len(clips)):
        for b in range(a + 1, len(clips)):
            for j in DEFAULT_GESTURE_JOINTS:
                for sa, sb in zip(trajs[a][j], trajs[b][j]):
                    costs.append(trajectory_distance(sa, sb, SdtwParams(gamma=0.1)))
    return np.mean(costs)


def bc_cross(clips, tracks, cfg):
    speeds = [slice_series(gesture_speed(c), SLICES) for c in clips]
    envs = []
    for t in tracks:
        env = amplitude_envelope(t, SPEC.mocap_rate)
        n = min(env.n_samples, clips[0].n_frames)
        envs.append(slice_series(env.with_data(env.data[:n]), SLICES))
    scores = []
    for a in range(len(clips)):
        for b in range(len(clips)):
            if a == b:
                continue
            for sa, sb in zip(speeds[a], envs[b]):
                scores.append(multiscale_beat_consistency(sa, sb, cfg))
    return np.mean(scores)


def main():
    scene = generate_scene(SPEC)
    clips, tracks = list(scene.clips), list(scene.tracks)

    base_det, base_mlr = crqa_stats(clips)
    damp10 = [dampen_motion(c, 10.0, HANDS) for c in clips]
    d_det, d_mlr = crqa_stats(damp10)
    print(f"CRQA det: base {base_det:.3f} damp10 {d_det:.3f}  (need +)")
    print(f"CRQA meanLR: base {base_mlr:.2f} damp10 {d_mlr:.2f}  (need +)")

    base_sdtw = sdtw_stats(clips)
    d_sdtw = sdtw_stats(damp10)
    print(f"SDTW inter: base {base_sdtw:.2f} damp10 {d_sdtw:.2f}  (need -)")

    for sigma_bc in (0.1,):
        cfg = BeatsConfig(sigma_bc=sigma_bc)
        base_bc = bc_cross(clips, tracks, cfg)
        for s in (10.0, 20.0, 50.0):
            damp = [dampen_motion(c, s, HANDS) for c in clips]
            print(f"BC cross (sbc={sigma_bc}) damp{s:.0f}: base {base_bc:.3f} -> "
                  f"{bc_cross(damp, tracks, cfg):.3f}  (need - for 20/50)")

    for sigma_bc in (0.1, 0.3):
        cfg = BeatsConfig(sigma_bc=sigma_bc)
        base_bc = bc_cross(clips, tracks, cfg)
        out = [f"BC cross delay (sbc={sigma_bc}): base {base_bc:.3f}"]
        for d in (0.25, 1.40):
            delayed = [delay_audio(t, d) for t in tracks]
            out.append(f"d{d}: {bc_cross(clips, delayed, cfg):.3f}")
        print("  ".join(out) + "  (need monotone down)")


if __name__ == "__main__":
    main()
