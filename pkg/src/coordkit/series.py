"""Uniformly sampled time series container shared across the toolkit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelSeries:
    """A uniformly sampled 1-D or k-D signal.

    ``data`` is (n,) or (n, k); ``rate`` in Hz; ``start_time`` anchors the
    first sample on the recording's clock (seconds).
    """

    data: np.ndarray
    rate: float
    label: str = ""
    start_time: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim not in (1, 2) or data.shape[0] < 1:
            raise ValueError("data must be a non-empty 1-D or 2-D array")
        if not np.all(np.isfinite(data)):
            raise ValueError("series values must be finite")
        if not (np.isfinite(self.rate) and self.rate > 0):
            raise ValueError("rate must be positive")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_dims(self) -> int:
        return 1 if self.data.ndim == 1 else self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.rate

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.n_samples) / self.rate

    def with_data(self, data: np.ndarray, label: str | None = None) -> "ChannelSeries":
        return ChannelSeries(
            data,
            rate=self.rate,
            label=self.label if label is None else label,
            start_time=self.start_time,
        )

    def resample(self, rate: float) -> "ChannelSeries":
        """Linear-interpolation resample onto a uniform grid at ``rate``."""
        if rate == self.rate:
            return self
        n_out = max(1, int(np.ceil(self.duration * rate)))
        t_out = np.arange(n_out) / rate
        t_in = np.arange(self.n_samples) / self.rate
        if self.data.ndim == 1:
            data = np.interp(t_out, t_in, self.data)
        else:
            data = np.column_stack(
                [np.interp(t_out, t_in, self.data[:, k]) for k in range(self.n_dims)]
            )
        return ChannelSeries(data, rate=rate, label=self.label, start_time=self.start_time)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChannelSeries):
            return NotImplemented
        return (
            np.array_equal(self.data, other.data)
            and self.rate == other.rate
            and self.label == other.label
            and self.start_time == other.start_time
        )
