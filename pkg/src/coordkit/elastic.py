"""Elastic sequence distances: exact DTW, soft-DTW, and the slice-level
trajectory distance used for gesture paths and F0 contours.

Soft-DTW replaces the hard path minimum with a log-sum-exp soft-min at
temperature gamma; it converges to exact DTW as gamma -> 0 and can go
negative for gamma > 0.  Reported metrics therefore use the divergence
form sdtw(x,y) - (sdtw(x,x) + sdtw(y,y))/2, which is exactly zero for
identical inputs and positive for genuinely different ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .audio_io import F0Contour
from .series import ChannelSeries


@dataclass(frozen=True)
class SdtwParams:
    """Soft-min temperature; gamma = 0 dispatches to exact DTW."""

    gamma: float = 0.1
    cost: str = "squared-euclidean"

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.cost != "squared-euclidean":
            raise ValueError(f"unsupported cost {self.cost!r}")


def _as_points(x) -> np.ndarray:
    pts = np.asarray(x, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("sequence must be a non-empty (n,) or (n, k) array")
    return pts


def _cost_matrix(x, y) -> np.ndarray:
    xp, yp = _as_points(x), _as_points(y)
    if xp.shape[1] != yp.shape[1]:
        raise ValueError("sequences must share dimensionality")
    return cdist(xp, yp, "sqeuclidean")


def exact_dtw(x, y) -> float:
    """Minimum summed squared-euclidean cost over monotone alignment paths."""
    cost = _cost_matrix(x, y)
    n, m = cost.shape
    table = np.full((n + 1, m + 1), np.inf)
    table[0, 0] = 0.0
    for k in range(2, n + m + 1):
        i = np.arange(max(1, k - m), min(n, k - 1) + 1)
        j = k - i
        best = np.minimum(
            np.minimum(table[i - 1, j], table[i, j - 1]), table[i - 1, j - 1]
        )
        table[i, j] = cost[i - 1, j - 1] + best
    return float(table[n, m])


def _softmin3(a: np.ndarray, b: np.ndarray, c: np.ndarray, gamma: float) -> np.ndarray:
    low = np.minimum(np.minimum(a, b), c)
    finite = np.isfinite(low)
    safe = np.where(finite, low, 0.0)
    with np.errstate(over="ignore"):
        z = (
            np.exp(-(a - safe) / gamma)
            + np.exp(-(b - safe) / gamma)
            + np.exp(-(c - safe) / gamma)
        )
    return np.where(finite, safe - gamma * np.log(z), np.inf)


def soft_dtw(x, y, params: SdtwParams = SdtwParams()) -> float:
    """Soft-DTW cost: log-sum-exp aggregation over all monotone paths.

    May be negative for gamma > 0 (many near-optimal paths); equals exact
    DTW at gamma = 0.
    """
    if params.gamma == 0.0:
        return exact_dtw(x, y)
    gamma = params.gamma
    cost = _cost_matrix(x, y)
    n, m = cost.shape
    table = np.full((n + 1, m + 1), np.inf)
    table[0, 0] = 0.0
    for k in range(2, n + m + 1):
        i = np.arange(max(1, k - m), min(n, k - 1) + 1)
        j = k - i
        table[i, j] = cost[i - 1, j - 1] + _softmin3(
            table[i - 1, j], table[i, j - 1], table[i - 1, j - 1], gamma
        )
    return float(table[n, m])


def sdtw_divergence(x, y, params: SdtwParams = SdtwParams()) -> float:
    """Debiased soft-DTW: zero for identical inputs at any gamma."""
    if params.gamma == 0.0:
        return exact_dtw(x, y)
    return soft_dtw(x, y, params) - 0.5 * (
        soft_dtw(x, x, params) + soft_dtw(y, y, params)
    )


def _znorm_columns(pts: np.ndarray) -> np.ndarray:
    centered = pts - pts.mean(axis=0, keepdims=True)
    std = pts.std(axis=0, keepdims=True)
    return np.where(std > 0, centered / np.where(std > 0, std, 1.0), centered)


def _f0_segments(contour: F0Contour, max_gap: float) -> list[np.ndarray]:
    """Index runs to compare: short unvoiced gaps bridged, long gaps split."""
    voiced = contour.voiced_mask
    if not voiced.any():
        raise ValueError("contour has no voiced frames")
    max_gap_frames = int(round(max_gap / contour.hop))
    idx = np.flatnonzero(voiced)
    segments = [[idx[0]]]
    for prev, cur in zip(idx[:-1], idx[1:]):
        gap = cur - prev - 1
        if gap <= max_gap_frames:
            segments[-1].extend(range(prev + 1, cur + 1))
        else:
            segments.append([cur])
    return [np.array(s) for s in segments]


def _interpolated_values(contour: F0Contour) -> np.ndarray:
    values = contour.values.copy()
    voiced = contour.voiced_mask
    idx = np.flatnonzero(voiced)
    values[~voiced] = np.interp(np.flatnonzero(~voiced), idx, values[idx])
    return values


def trajectory_distance(
    a,
    b,
    params: SdtwParams = SdtwParams(),
    mode: str = "divergence",
    max_gap: float = 0.25,
    normalize_by_length: bool = False,
) -> float:
    """Slice-level elastic distance between two trajectories or F0 contours.

    Each input is z-normalized per dimension before alignment. F0 contours
    must share hop and voicing pattern; unvoiced gaps up to ``max_gap``
    seconds are bridged by linear interpolation, longer gaps split the
    comparison into segments whose costs are summed.
    """
    if mode not in ("divergence", "raw"):
        raise ValueError(f"unknown mode {mode!r}")
    dist = sdtw_divergence if mode == "divergence" else soft_dtw

    if isinstance(a, F0Contour) or isinstance(b, F0Contour):
        if not (isinstance(a, F0Contour) and isinstance(b, F0Contour)):
            raise ValueError("cannot mix an F0 contour with a plain trajectory")
        if a.hop != b.hop or a.n_frames != b.n_frames:
            raise ValueError("contours must share hop and length")
        if not np.array_equal(a.voiced_mask, b.voiced_mask):
            raise ValueError("contours must share the voicing pattern")
        segments = _f0_segments(a, max_gap)
        xa = _znorm_columns(_interpolated_values(a)[:, None])
        xb = _znorm_columns(_interpolated_values(b)[:, None])
        total = sum(float(dist(xa[seg], xb[seg], params)) for seg in segments)
        n = m = sum(seg.size for seg in segments)
    else:
        xa = _znorm_columns(_as_points(a.data if isinstance(a, ChannelSeries) else a))
        xb = _znorm_columns(_as_points(b.data if isinstance(b, ChannelSeries) else b))
        total = float(dist(xa, xb, params))
        n, m = xa.shape[0], xb.shape[0]
    if normalize_by_length:
        total /= n + m
    return total
