"""Shared spectrogram container and window segmentation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

__all__ = ["Spectrogram", "segment"]


@dataclass
class Spectrogram:
    """Time-frequency power estimate with per-cell confidence bands.

    power, ci_lo, ci_hi are (N, J); times are window start times in
    seconds; freqs_hz is the analysis grid in Hz.
    """

    method: str
    power: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    times: np.ndarray
    freqs_hz: np.ndarray
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.power.shape == self.ci_lo.shape == self.ci_hi.shape):
            raise ValueError("power and CI arrays must share a shape")
        tol = 1e-9 * (1.0 + np.abs(self.power))
        if np.any(self.power < 0):
            raise ValueError("power must be nonnegative")
        if np.any(self.ci_lo > self.power + tol) or np.any(self.ci_hi < self.power - tol):
            raise ValueError("confidence bands must bracket the estimate")

    @property
    def shape(self):
        return self.power.shape


def segment(data: np.ndarray, W: int) -> np.ndarray:
    """Split a 1-D record into N = floor(T/W) non-overlapping windows.

    A trailing remainder shorter than W is dropped with a warning.
    """
    data = np.asarray(data)
    T = data.shape[0]
    if T < W:
        raise ValueError(f"record length {T} shorter than window {W}")
    N = T // W
    rem = T - N * W
    if rem:
        warnings.warn(f"dropping {rem} trailing samples (< one window)")
    return data[: N * W].reshape(N, W)
