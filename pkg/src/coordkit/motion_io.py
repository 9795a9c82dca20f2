"""BVH motion-capture I/O and forward kinematics.

Parses the HIERARCHY/MOTION grammar into an immutable ``SkeletonClip``,
writes clips back out (round-trip safe), and evaluates world-space joint
trajectories. Rotation channels are kept in degrees exactly as parsed;
angles are converted to radians only inside computations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .series import ChannelSeries

CHANNEL_NAMES = (
    "Xposition",
    "Yposition",
    "Zposition",
    "Xrotation",
    "Yrotation",
    "Zrotation",
)

ROTATION_CHANNELS = frozenset(("Xrotation", "Yrotation", "Zrotation"))
POSITION_CHANNELS = frozenset(("Xposition", "Yposition", "Zposition"))


class BvhSyntaxError(ValueError):
    """Malformed BVH text; carries the 1-based line/column of the offence."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class JointNode:
    """One node of the skeleton tree.

    ``channels`` preserves the file's declaration order; Euler composition
    depends on it. End sites carry no channels and a synthesized name.
    """

    name: str
    parent: Optional[int]
    offset: np.ndarray
    channels: tuple[str, ...] = ()
    is_end_site: bool = False

    def __post_init__(self):
        offset = np.asarray(self.offset, dtype=np.float64)
        if offset.shape != (3,):
            raise ValueError(f"joint {self.name!r}: offset must be a 3-vector")
        if not np.all(np.isfinite(offset)):
            raise ValueError(f"joint {self.name!r}: offset must be finite")
        offset.setflags(write=False)
        object.__setattr__(self, "offset", offset)
        for ch in self.channels:
            if ch not in CHANNEL_NAMES:
                raise ValueError(f"joint {self.name!r}: unknown channel {ch!r}")

    @property
    def rotation_channels(self) -> tuple[str, ...]:
        return tuple(c for c in self.channels if c in ROTATION_CHANNELS)

    def __eq__(self, other) -> bool:
        if not isinstance(other, JointNode):
            return NotImplemented
        return (
            self.name == other.name
            and self.parent == other.parent
            and np.array_equal(self.offset, other.offset)
            and self.channels == other.channels
            and self.is_end_site == other.is_end_site
        )


@dataclass(frozen=True)
class SkeletonClip:
    """Parsed skeleton hierarchy plus per-frame channel data.

    ``frames`` is (n_frames, n_channels) with rotations in degrees and
    translations in the file's length units, bit-exact as parsed.
    """

    joints: tuple[JointNode, ...]
    frame_time: float
    frames: np.ndarray
    _channel_starts: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        joints = tuple(self.joints)
        object.__setattr__(self, "joints", joints)
        if not joints:
            raise ValueError("clip must contain at least one joint")
        names = [j.name for j in joints]
        if len(set(names)) != len(names):
            raise ValueError("joint names must be unique")
        if joints[0].parent is not None:
            raise ValueError("first joint must be the root (no parent)")
        for i, j in enumerate(joints[1:], start=1):
            if j.parent is None or not 0 <= j.parent < i:
                raise ValueError(
                    f"joint {j.name!r}: parent must appear earlier in the list"
                )
        starts = []
        total = 0
        for j in joints:
            starts.append(total)
            total += len(j.channels)
        object.__setattr__(self, "_channel_starts", tuple(starts))

        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValueError("frames must be a (n_frames, n_channels) matrix")
        if frames.shape[1] != total:
            raise ValueError(
                f"frames have {frames.shape[1]} channels, hierarchy declares {total}"
            )
        if not np.all(np.isfinite(frames)):
            raise ValueError("frame data must be finite")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

        if not (np.isfinite(self.frame_time) and self.frame_time > 0):
            raise ValueError("frame_time must be positive")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_channels(self) -> int:
        return self.frames.shape[1]

    @property
    def rate(self) -> float:
        return 1.0 / self.frame_time

    @property
    def duration(self) -> float:
        return self.n_frames * self.frame_time

    def joint_index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(f"unknown joint {name!r}")

    def joint(self, name: str) -> JointNode:
        return self.joints[self.joint_index(name)]

    def channel_slice(self, joint_index: int) -> slice:
        start = self._channel_starts[joint_index]
        return slice(start, start + len(self.joints[joint_index].channels))

    def channel_data(self, joint: str) -> np.ndarray:
        """Per-frame channel values of one joint, (n_frames, n_joint_channels)."""
        return self.frames[:, self.channel_slice(self.joint_index(joint))]

    def children(self, joint_index: int) -> list[int]:
        return [i for i, j in enumerate(self.joints) if j.parent == joint_index]

    def with_frames(self, frames: np.ndarray) -> "SkeletonClip":
        """Copy of this clip with replaced channel data (same hierarchy)."""
        return SkeletonClip(self.joints, self.frame_time, frames)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SkeletonClip):
            return NotImplemented
        return (
            self.joints == other.joints
            and self.frame_time == other.frame_time
            and np.array_equal(self.frames, other.frames)
        )


class _Tokens:
    """Whitespace tokenizer that remembers line/column for error reports."""

    def __init__(self, text: str):
        self._items: list[tuple[str, int, int]] = []
        for ln, line in enumerate(text.splitlines(), start=1):
            col = 0
            for tok in line.split():
                col = line.index(tok, col)
                self._items.append((tok, ln, col + 1))
                col += len(tok)
        self._pos = 0

    def peek(self) -> Optional[tuple[str, int, int]]:
        if self._pos < len(self._items):
            return self._items[self._pos]
        return None

    def next(self, expect: Optional[str] = None) -> tuple[str, int, int]:
        item = self.peek()
        if item is None:
            last = self._items[-1] if self._items else ("", 1, 1)
            raise BvhSyntaxError("unexpected end of file", last[1], last[2])
        self._pos += 1
        tok, ln, col = item
        if expect is not None and tok != expect:
            raise BvhSyntaxError(f"expected {expect!r}, found {tok!r}", ln, col)
        return item

    def next_float(self, what: str) -> float:
        tok, ln, col = self.next()
        try:
            return float(tok)
        except ValueError:
            raise BvhSyntaxError(f"expected {what}, found {tok!r}", ln, col) from None

    def next_int(self, what: str) -> int:
        tok, ln, col = self.next()
        try:
            return int(tok)
        except ValueError:
            raise BvhSyntaxError(f"expected {what}, found {tok!r}", ln, col) from None

    def __iter__(self) -> Iterator[tuple[str, int, int]]:
        while (item := self.peek()) is not None:
            self._pos += 1
            yield item


def _unique_end_site_name(parent_name: str, taken: set[str]) -> str:
    base = f"{parent_name}_end"
    name = base
    k = 2
    while name in taken:
        name = f"{base}{k}"
        k += 1
    return name


def parse_bvh(text: str) -> SkeletonClip:
    """Parse a complete BVH document (HIERARCHY + MOTION).

    Channel values are preserved exactly as decimal-parsed floats. End
    sites are retained as channel-less joints so the clip writes back out
    byte-compatibly.
    """
    toks = _Tokens(text)
    toks.next("HIERARCHY")

    joints: list[JointNode] = []
    names: set[str] = set()

    def parse_offset() -> np.ndarray:
        toks.next("OFFSET")
        return np.array([toks.next_float("offset value") for _ in range(3)])

    def parse_joint(parent: Optional[int]) -> None:
        keyword, ln, col = toks.next()
        if parent is None and keyword != "ROOT":
            raise BvhSyntaxError(f"expected 'ROOT', found {keyword!r}", ln, col)

        if keyword == "End":
            toks.next("Site")
            toks.next("{")
            offset = parse_offset()
            name = _unique_end_site_name(joints[parent].name, names)
            names.add(name)
            joints.append(JointNode(name, parent, offset, (), is_end_site=True))
            toks.next("}")
            return

        if keyword not in ("ROOT", "JOINT"):
            raise BvhSyntaxError(f"expected 'JOINT' or 'End', found {keyword!r}", ln, col)
        name, ln, col = toks.next()
        if name in names:
            raise BvhSyntaxError(f"duplicate joint name {name!r}", ln, col)
        names.add(name)
        toks.next("{")
        offset = parse_offset()
        toks.next("CHANNELS")
        n = toks.next_int("channel count")
        channels = []
        for _ in range(n):
            ch, ln, col = toks.next()
            if ch not in CHANNEL_NAMES:
                raise BvhSyntaxError(f"unknown channel name {ch!r}", ln, col)
            channels.append(ch)
        index = len(joints)
        joints.append(JointNode(name, parent, offset, tuple(channels)))

        while True:
            tok, ln, col = toks.next()
            if tok == "}":
                return
            if tok in ("JOINT", "End"):
                # push back and recurse
                toks._pos -= 1
                parse_joint(index)
            else:
                raise BvhSyntaxError(
                    f"expected 'JOINT', 'End' or '}}', found {tok!r}", ln, col
                )

    parse_joint(None)

    toks.next("MOTION")
    tok, ln, col = toks.next()
    if tok != "Frames:":
        raise BvhSyntaxError(f"expected 'Frames:', found {tok!r}", ln, col)
    n_frames = toks.next_int("frame count")
    tok, ln, col = toks.next()
    if tok != "Frame":
        raise BvhSyntaxError(f"expected 'Frame Time:', found {tok!r}", ln, col)
    toks.next("Time:")
    frame_time = toks.next_float("frame time")

    n_channels = sum(len(j.channels) for j in joints)
    values = []
    for tok, ln, col in toks:
        try:
            values.append(float(tok))
        except ValueError:
            raise BvhSyntaxError(f"expected a number, found {tok!r}", ln, col) from None
    if len(values) != n_frames * n_channels:
        raise ValueError(
            f"frame count mismatch: header declares {n_frames} frames "
            f"x {n_channels} channels = {n_frames * n_channels} values, "
            f"data supplies {len(values)}"
        )
    frames = np.array(values, dtype=np.float64).reshape(n_frames, n_channels)
    return SkeletonClip(tuple(joints), frame_time, frames)


def _format_value(v: float) -> str:
    # shortest representation that parses back to the same double, padded
    # to at least 6 significant digits
    return np.format_float_positional(
        np.float64(v), unique=True, min_digits=6, trim="k"
    )


def write_bvh(clip: SkeletonClip) -> str:
    """Serialize a clip to BVH text.

    Numbers carry >= 6 significant digits; channel values use a shortest
    round-trip encoding so ``parse_bvh(write_bvh(c)) == c``. The frame time
    is written at 6 decimal places (all real mocap rates survive this).
    Joints are emitted depth-first; any parsed clip is already in that
    order.
    """
    lines = ["HIERARCHY"]

    def emit(joint_index: int, depth: int) -> None:
        j = clip.joints[joint_index]
        pad = "\t" * depth
        if j.is_end_site:
            lines.append(f"{pad}End Site")
        else:
            keyword = "ROOT" if j.parent is None else "JOINT"
            lines.append(f"{pad}{keyword} {j.name}")
        lines.append(f"{pad}{{")
        offset = " ".join(_format_value(v) for v in j.offset)
        lines.append(f"{pad}\tOFFSET {offset}")
        if not j.is_end_site:
            lines.append(f"{pad}\tCHANNELS {len(j.channels)} {' '.join(j.channels)}")
        for child in clip.children(joint_index):
            emit(child, depth + 1)
        lines.append(f"{pad}}}")

    emit(0, 0)
    lines.append("MOTION")
    lines.append(f"Frames: {clip.n_frames}")
    lines.append(f"Frame Time: {clip.frame_time:.6f}")
    for row in clip.frames:
        lines.append(" ".join(_format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def load_bvh(path) -> SkeletonClip:
    with open(path, "r") as fh:
        return parse_bvh(fh.read())


def save_bvh(clip: SkeletonClip, path) -> None:
    with open(path, "w") as fh:
        fh.write(write_bvh(clip))


_AXIS_INDEX = {"X": 0, "Y": 1, "Z": 2}


def _axis_rotation_matrices(axis: str, radians: np.ndarray) -> np.ndarray:
    """Stack of right-handed rotation matrices about a principal axis."""
    c, s = np.cos(radians), np.sin(radians)
    n = radians.shape[0]
    m = np.zeros((n, 3, 3))
    if axis == "X":
        m[:, 0, 0] = 1
        m[:, 1, 1], m[:, 1, 2] = c, -s
        m[:, 2, 1], m[:, 2, 2] = s, c
    elif axis == "Y":
        m[:, 1, 1] = 1
        m[:, 0, 0], m[:, 0, 2] = c, s
        m[:, 2, 0], m[:, 2, 2] = -s, c
    elif axis == "Z":
        m[:, 2, 2] = 1
        m[:, 0, 0], m[:, 0, 1] = c, -s
        m[:, 1, 0], m[:, 1, 1] = s, c
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return m


def _axis_quaternions(axis: str, radians: np.ndarray) -> np.ndarray:
    """(n, 4) unit quaternions (w, x, y, z) about a principal axis."""
    half = 0.5 * radians
    q = np.zeros((radians.shape[0], 4))
    q[:, 0] = np.cos(half)
    q[:, 1 + _AXIS_INDEX[axis]] = np.sin(half)
    return q


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of (n, 4) quaternion stacks in (w, x, y, z) order."""
    w1, x1, y1, z1 = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    w2, x2, y2, z2 = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=1,
    )


def local_rotation_matrices(clip: SkeletonClip, joint: str) -> np.ndarray:
    """Per-frame local rotation (n, 3, 3), composing the declared channel order."""
    j = clip.joint(joint)
    data = clip.channel_data(joint)
    rot = np.broadcast_to(np.eye(3), (clip.n_frames, 3, 3)).copy()
    for k, ch in enumerate(j.channels):
        if ch in ROTATION_CHANNELS:
            rot = rot @ _axis_rotation_matrices(ch[0], np.radians(data[:, k]))
    return rot


def local_rotation_quaternions(clip: SkeletonClip, joint: str) -> np.ndarray:
    """Per-frame local rotation quaternions (n, 4), channel-order composition."""
    j = clip.joint(joint)
    data = clip.channel_data(joint)
    quat = np.zeros((clip.n_frames, 4))
    quat[:, 0] = 1.0
    for k, ch in enumerate(j.channels):
        if ch in ROTATION_CHANNELS:
            quat = quat_multiply(quat, _axis_quaternions(ch[0], np.radians(data[:, k])))
    return quat


def _local_translation(clip: SkeletonClip, joint_index: int) -> np.ndarray:
    """Offset plus any translation channels, (n, 3)."""
    j = clip.joints[joint_index]
    trans = np.broadcast_to(j.offset, (clip.n_frames, 3)).copy()
    data = clip.frames[:, clip.channel_slice(joint_index)]
    for k, ch in enumerate(j.channels):
        if ch in POSITION_CHANNELS:
            trans[:, _AXIS_INDEX[ch[0]]] += data[:, k]
    return trans


def forward_kinematics(clip: SkeletonClip, joint: str) -> ChannelSeries:
    """World-space trajectory of one joint, (n_frames, 3).

    Composes parent transforms root-to-leaf; each joint's Euler angles are
    applied intrinsically in the file-declared channel order.
    """
    target = clip.joint_index(joint)
    chain = [target]
    while clip.joints[chain[0]].parent is not None:
        chain.insert(0, clip.joints[chain[0]].parent)

    pos = np.zeros((clip.n_frames, 3))
    rot = np.broadcast_to(np.eye(3), (clip.n_frames, 3, 3)).copy()
    for idx in chain:
        local_t = _local_translation(clip, idx)
        pos = pos + np.einsum("nij,nj->ni", rot, local_t)
        node = clip.joints[idx]
        if not node.is_end_site and node.rotation_channels:
            rot = rot @ local_rotation_matrices(clip, node.name)
    return ChannelSeries(pos, rate=clip.rate, label=joint)
