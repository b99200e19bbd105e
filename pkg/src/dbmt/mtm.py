"""Sliding-window multitaper spectrogram with chi-square confidence bands."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .special import chi2_quantile
from .spectrogram import Spectrogram
from .tapers import FrequencyGrid, compute_dpss, eigen_coefficients, max_taper_count

__all__ = ["MtConfig", "mt_spectrogram", "chi2_quantile"]


@dataclass
class MtConfig:
    W: int
    B: float
    K: int
    J: int
    overlap: float = 0.5
    ci_level: float = 0.95
    demean: bool = False

    def __post_init__(self):
        if not (0.0 <= self.overlap < 1.0):
            raise ValueError("overlap must lie in [0, 1)")
        if self.K > max_taper_count(self.W, self.B):
            raise ValueError(
                f"K={self.K} exceeds admissible {max_taper_count(self.W, self.B)}"
            )
        if not (0.0 < self.ci_level < 1.0):
            raise ValueError("ci_level must lie in (0, 1)")

    @property
    def hop(self) -> int:
        return max(1, int(round(self.W * (1.0 - self.overlap))))


def mt_spectrogram(data: np.ndarray, cfg: MtConfig,
                   sample_rate: float = 1.0) -> Spectrogram:
    """Average tapered periodograms per window; chi-square(2K) bands.

    Window start times step by the hop; the band at level 1-a is
    [2K S / q(1-a/2), 2K S / q(a/2)] with q the chi-square(2K) quantile.
    """
    data = np.asarray(data, dtype=float)
    T = data.shape[0]
    if T < cfg.W:
        raise ValueError(f"record length {T} shorter than window {cfg.W}")
    taps = compute_dpss(cfg.W, cfg.B, cfg.K)
    grid = FrequencyGrid(J=cfg.J, sample_rate=sample_rate)
    starts = np.arange(0, T - cfg.W + 1, cfg.hop)
    N = starts.shape[0]
    S = np.empty((N, cfg.J))
    for i, s0 in enumerate(starts):
        w = data[s0 : s0 + cfg.W]
        if cfg.demean:
            w = w - w.mean()
        S[i] = np.mean(np.abs(eigen_coefficients(taps, w, grid)) ** 2, axis=0)
    a = 1.0 - cfg.ci_level
    dof = 2 * cfg.K
    q_hi = chi2_quantile(1.0 - a / 2.0, dof)
    q_lo = chi2_quantile(a / 2.0, dof)
    ci_lo = dof * S / q_hi
    ci_hi = dof * S / q_lo
    times = starts / sample_rate
    return Spectrogram(
        method="MT", power=S, ci_lo=ci_lo, ci_hi=ci_hi,
        times=times.astype(float), freqs_hz=grid.freqs_hz,
        meta={
            "ci_method": f"chi-square({dof})",
            "ci_level": cfg.ci_level,
            "overlap": cfg.overlap,
            "hop": cfg.hop,
            "align": "window start; centers at times + W/(2 fs)",
        },
    )
