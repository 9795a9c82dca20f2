"""Recurrence quantification: time-delay embedding, auto/cross recurrence,
radius calibration to a target recurrence rate, and diagonal-line measures
(RR, %DET, MeanLR).

The recurrence radius is not a free parameter here: it is bisected until
the recurrence rate hits the configured target, so RR is comparable across
slices and conditions. Auto-recurrence excludes the line of identity from
both the calibration and the measures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .series import ChannelSeries


class RadiusCalibrationError(ValueError):
    """Target recurrence rate unreachable (degenerate distance spectrum)."""


@dataclass(frozen=True)
class EmbeddingParams:
    """Time-delay embedding: dimension, lag in samples, distance norm."""

    dim: int = 3
    delay: int = 10
    norm: str = "euclidean"

    def __post_init__(self):
        if self.dim < 1 or self.delay < 1:
            raise ValueError("embedding dim and delay must be >= 1")
        if self.norm != "euclidean":
            raise ValueError(f"unsupported norm {self.norm!r}")


@dataclass(frozen=True)
class RecurrenceResult:
    """Diagonal-line statistics at the radius that produced the matrix."""

    rr: float
    det: float
    mean_lr: float
    radius: float
    l_min: int = 2

    def __post_init__(self):
        if not 0.0 <= self.rr <= 1.0 or not 0.0 <= self.det <= 1.0:
            raise ValueError("rr and det must lie in [0, 1]")


@dataclass(frozen=True)
class RqaConfig:
    """Settings for the slice-level recurrence pipeline."""

    embedding: EmbeddingParams = field(default_factory=EmbeddingParams)
    target_rr: float = 0.02
    tol: float = 0.002
    l_min: int = 2
    exclude_loi_auto: bool = True  # drop the line of identity when x == y


def embed(series, params: EmbeddingParams) -> np.ndarray:
    """Delay-embed a 1-D series into an (N', dim) point cloud.

    Row i is (x_i, x_{i+delay}, ..., x_{i+(dim-1)*delay}).
    """
    x = series.data if isinstance(series, ChannelSeries) else np.asarray(series, float)
    if x.ndim != 1:
        raise ValueError("embedding expects a 1-D series")
    n_out = x.shape[0] - (params.dim - 1) * params.delay
    if n_out < 2:
        raise ValueError(
            f"series of length {x.shape[0]} too short for dim={params.dim}, "
            f"delay={params.delay}"
        )
    cols = [x[k * params.delay : k * params.delay + n_out] for k in range(params.dim)]
    return np.column_stack(cols)


def cross_recurrence_matrix(a: np.ndarray, b: np.ndarray, radius: float) -> np.ndarray:
    """Binary matrix M[i, j] = 1 iff ||a_i - b_j||_2 <= radius."""
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    if a.shape[1] != b.shape[1]:
        raise ValueError("point clouds must share the embedding dimension")
    return cdist(a, b) <= radius


def _loi_mask(shape: tuple[int, int]) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    n = min(shape)
    mask[np.arange(n), np.arange(n)] = True
    return mask


def _calibrate(distances: np.ndarray, target_rr: float, tol: float) -> float:
    """Bisect the radius over [0, max distance] until RR hits the target.

    Stops when |RR - target| <= tol, otherwise narrows down to the discrete
    RR step bracketing the target and returns the side with RR >= target.
    """
    if distances.size == 0:
        raise RadiusCalibrationError("no distances to calibrate on")
    if not 0.0 < target_rr <= 1.0:
        raise ValueError("target_rr must lie in (0, 1]")
    sorted_d = np.sort(distances, kind="stable")
    total = sorted_d.size
    hi = float(sorted_d[-1])
    if target_rr >= 1.0:
        return hi

    def rr_at(eps: float) -> float:
        return np.searchsorted(sorted_d, eps, side="right") / total

    if rr_at(0.0) > target_rr + tol:
        raise RadiusCalibrationError(
            f"recurrence rate at zero radius is {rr_at(0.0):.4f}, "
            f"already above target {target_rr}"
        )
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rr = rr_at(mid)
        if abs(rr - target_rr) <= tol:
            return mid
        if rr < target_rr:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return hi


def calibrate_radius(
    a: np.ndarray,
    b: np.ndarray,
    target_rr: float = 0.02,
    tol: float = 0.002,
    exclude_loi: bool = False,
) -> float:
    """Radius whose recurrence rate matches ``target_rr`` within ``tol``."""
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    if a.shape[1] != b.shape[1]:
        raise ValueError("point clouds must share the embedding dimension")
    d = cdist(a, b)
    if exclude_loi:
        d = d[~_loi_mask(d.shape)]
    return _calibrate(d.ravel(), target_rr, tol)


def _diagonal_line_lengths(matrix: np.ndarray) -> np.ndarray:
    """Lengths of every maximal diagonal run of 1s, over all diagonals."""
    rows, cols = matrix.shape
    width = min(rows, cols)
    sheared = np.zeros((rows + cols - 1, width + 1), dtype=bool)
    for k in range(-(rows - 1), cols):
        diag = np.diagonal(matrix, k)
        sheared[k + rows - 1, : diag.size] = diag
    flat = np.concatenate([[False], sheared.ravel(), [False]]).view(np.int8)
    edges = np.diff(flat)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return ends - starts


def rqa_measures(
    matrix: np.ndarray,
    l_min: int = 2,
    exclude_loi: bool = False,
    radius: float = float("nan"),
) -> RecurrenceResult:
    """RR, %DET and MeanLR of a binary recurrence matrix.

    %DET is the fraction of recurrence points lying on diagonal runs of
    length >= l_min; MeanLR the mean length of those runs (0 when none
    exist). With ``exclude_loi`` the main diagonal is removed from the
    counts entirely (auto-recurrence convention).
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("matrix must be 2-D and non-empty")
    m = m.astype(bool)
    if l_min < 1:
        raise ValueError("l_min must be >= 1")
    denom = m.size
    if exclude_loi:
        m = m & ~_loi_mask(m.shape)
        denom = m.size - min(m.shape)
    points = int(m.sum())
    rr = points / denom if denom else 0.0
    lengths = _diagonal_line_lengths(m)
    qualifying = lengths[lengths >= l_min]
    det = float(qualifying.sum() / points) if points else 0.0
    mean_lr = float(qualifying.mean()) if qualifying.size else 0.0
    return RecurrenceResult(rr=rr, det=det, mean_lr=mean_lr, radius=radius, l_min=l_min)


def _zscore(x: np.ndarray) -> np.ndarray:
    std = x.std()
    centered = x - x.mean()
    return centered / std if std > 0 else centered


def crqa_pipeline(
    x: ChannelSeries, y: ChannelSeries, cfg: RqaConfig = RqaConfig()
) -> RecurrenceResult:
    """Z-score, embed, calibrate the radius, and measure recurrence.

    Passing the same series (or equal data) for ``x`` and ``y`` runs
    auto-recurrence; the line of identity is then excluded per config.
    Raises ``RadiusCalibrationError`` when the slice cannot reach the
    target recurrence rate (callers flag and exclude such slices).
    """
    if x.rate != y.rate:
        raise ValueError("series must share a sample rate")
    if x.n_samples != y.n_samples:
        raise ValueError("series must have equal slice lengths")
    a = embed(_zscore(x.data), cfg.embedding)
    auto = x is y or np.array_equal(x.data, y.data)
    b = a if auto else embed(_zscore(y.data), cfg.embedding)
    exclude = auto and cfg.exclude_loi_auto

    distances = cdist(a, b)
    flat = distances[~_loi_mask(distances.shape)] if exclude else distances.ravel()
    radius = _calibrate(flat, cfg.target_rr, cfg.tol)
    return rqa_measures(
        distances <= radius, l_min=cfg.l_min, exclude_loi=exclude, radius=radius
    )
