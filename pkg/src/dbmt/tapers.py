"""Slepian (discrete prolate spheroidal) tapers and eigen-coefficients.

Tapers are computed from the symmetric tridiagonal Slepian matrix, which is
numerically stable for long windows; the concentration eigenvalues are then
recovered as Rayleigh quotients of the dense band-concentration operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "TaperSet",
    "FrequencyGrid",
    "compute_dpss",
    "eigen_coefficients",
    "concentration_matrix",
    "max_taper_count",
]


def max_taper_count(W: int, B: float) -> int:
    """Largest admissible number of tapers, floor(2WB) - 1."""
    return int(math.floor(2.0 * W * B)) - 1


@dataclass(frozen=True)
class TaperSet:
    """Orthonormal dpss tapers for window length W and half-bandwidth B.

    u has shape (K, W) with unit-norm rows; lam holds the in-band energy
    concentration of each taper, strictly decreasing and in (0, 1).
    """

    W: int
    B: float
    K: int
    u: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        if self.u.shape != (self.K, self.W):
            raise ValueError("taper array shape mismatch")
        if self.lam.shape != (self.K,):
            raise ValueError("eigenvalue array shape mismatch")


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of J frequencies f_j = (j-1)/J cycles/sample."""

    J: int
    sample_rate: float = 1.0

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("J must be >= 1")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def freqs(self) -> np.ndarray:
        """Grid in cycles/sample."""
        return np.arange(self.J) / self.J

    @property
    def freqs_hz(self) -> np.ndarray:
        return self.freqs * self.sample_rate


def concentration_matrix(W: int, B: float) -> np.ndarray:
    """Dense band-concentration operator A_lm = sin(2 pi B (l-m)) / (pi (l-m)).

    Eigenvectors are the dpss tapers and eigenvalues their concentrations;
    used here to recover concentration values and as an independent oracle.
    """
    idx = np.arange(W)
    d = idx[:, None] - idx[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        A = np.sin(2.0 * np.pi * B * d) / (np.pi * d)
    A[np.diag_indices(W)] = 2.0 * B
    return A


def _fix_polarity(u: np.ndarray) -> np.ndarray:
    """Sign convention: positive sample sum, or positive first moment for
    antisymmetric tapers (whose sample sum vanishes)."""
    out = u.copy()
    W = u.shape[1]
    l = np.arange(W)
    for k in range(u.shape[0]):
        s = out[k].sum()
        if abs(s) < 1e-8:
            s = (l * out[k]).sum()
        if s < 0:
            out[k] = -out[k]
    return out


def compute_dpss(W: int, B: float, K: int) -> TaperSet:
    """First K dpss tapers for window length W, half-bandwidth B.

    K must respect the admissibility rule K <= floor(2WB) - 1 so that all
    returned tapers are well concentrated.
    """
    if W < 2:
        raise ValueError("W must be >= 2")
    if not (0.0 < B < 0.5):
        raise ValueError("half-bandwidth B must lie in (0, 1/2)")
    kmax = max_taper_count(W, B)
    if not (1 <= K <= kmax):
        raise ValueError(
            f"K={K} violates admissibility: need 1 <= K <= floor(2WB)-1 = {kmax}"
        )

    l = np.arange(W)
    diag = ((W - 1 - 2.0 * l) / 2.0) ** 2 * np.cos(2.0 * np.pi * B)
    off = l[1:] * (W - l[1:]) / 2.0
    # top K eigenvectors of the tridiagonal Slepian matrix
    _, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(W - K, W - 1))
    u = vecs[:, ::-1].T  # row k = kth taper, descending concentration
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    u = _fix_polarity(u)

    # tridiagonal eigenvalues are not concentration ratios; recover them by
    # applying the band-concentration operator (Rayleigh quotient)
    A = concentration_matrix(W, B)
    lam = np.einsum("kw,kw->k", u, u @ A)

    if not np.all(np.diff(lam) < 0):
        raise RuntimeError("concentration eigenvalues not strictly decreasing")
    if not np.all((lam > 0) & (lam < 1)):
        raise RuntimeError("concentration eigenvalues outside (0, 1)")
    return TaperSet(W=W, B=B, K=K, u=u, lam=lam)


def eigen_coefficients(
    taps: TaperSet, window: np.ndarray, grid: FrequencyGrid
) -> np.ndarray:
    """Tapered Fourier coefficients on the grid.

    Entry (k, j) is sum_l exp(-i 2 pi f_j l) u_l^(k) y_l, i.e. the DFT of the
    taper-k windowed data evaluated at f_j = (j-1)/J.
    """
    window = np.asarray(window)
    if window.shape != (taps.W,):
        raise ValueError(f"window length {window.shape} != W={taps.W}")
    tapered = taps.u * window[None, :]
    J = grid.J
    if J >= taps.W:
        return np.fft.fft(tapered, n=J, axis=1)
    # J < W: exp(-i 2 pi l j / J) is J-periodic in l, so fold mod J
    pad = (-taps.W) % J
    if pad:
        tapered = np.pad(tapered, ((0, 0), (0, pad)))
    folded = tapered.reshape(taps.K, -1, J).sum(axis=1)
    return np.fft.fft(folded, axis=1)
