"""Synthetic data: the amplitude-modulated AR band plus frequency-stepped
ARMA process with a ground-truth time-varying spectrum, and direct
simulators for the state-space models used in consistency tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal

from .lgss import StateSpaceModel, observation_matrix

__all__ = [
    "SyntheticSpec",
    "GroundTruth",
    "LogModel",
    "gen_synthetic",
    "gen_statespace_data",
    "ar_arma_simulate",
]


@dataclass
class SyntheticSpec:
    sample_rate: float = 50.0
    duration: float = 600.0
    f0: float = 0.02
    ar_center_hz: float = 11.0
    ar_radius: float = 0.98
    fm_start_hz: float = 5.0
    fm_step_hz: float = 0.48
    step_period_s: float = 600.0 / 23.0
    arma_radius: float = 0.98
    snr_db: float = 30.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.step_period_s <= 0:
            raise ValueError("step period must be positive")
        n_steps = max(1, int(np.ceil(self.duration / self.step_period_s)))
        fmax = max(
            self.ar_center_hz,
            self.fm_start_hz + self.fm_step_hz * (n_steps - 1),
        )
        if self.sample_rate <= 2.0 * fmax:
            raise ValueError(
                f"sample rate {self.sample_rate} violates Nyquist for "
                f"content up to {fmax} Hz"
            )


@dataclass
class GroundTruth:
    """Per-window theoretical PSD of the noiseless signal on the grid."""

    psd: np.ndarray        # (N, J)
    freqs_hz: np.ndarray   # (J,)
    times: np.ndarray      # (N,) window start times, s
    noise_var: float       # additive white noise variance of the record
    meta: dict = field(default_factory=dict)


def _pole_pair_poly(f_hz: float, radius: float, fs: float) -> np.ndarray:
    w = 2.0 * np.pi * f_hz / fs
    return np.array([1.0, -2.0 * radius * np.cos(w), radius * radius])


def _ar6_coeffs(f_hz: float, radius: float, fs: float) -> np.ndarray:
    p = _pole_pair_poly(f_hz, radius, fs)
    return np.polymul(np.polymul(p, p), p)


# two double zeros at DC and Nyquist: suppresses out-of-band leakage of the
# stepped resonance (the exact zero layout is a free design choice)
_ARMA_B = np.polymul(np.array([1.0, -1.0]), np.array([1.0, -1.0]))
_ARMA_B = np.polymul(_ARMA_B, np.polymul(np.array([1.0, 1.0]), np.array([1.0, 1.0])))


def ar_arma_simulate(segments: Sequence[Tuple[int, np.ndarray, np.ndarray]],
                     T: int, seed=None, excitation: Optional[np.ndarray] = None,
                     warmup: int = 0) -> np.ndarray:
    """Recursive filtering of white noise with coefficients switched at
    segment boundaries.

    segments: iterable of (length, b, a) with sum of lengths >= T.
    With warmup = 0 the direct-form state carries across switches (output
    continuity). With warmup > 0 each segment instead starts from its own
    stationary state: the filter is warmed up on that many discarded extra
    excitation samples, so every window's variance matches the active
    segment's spectrum. Near a sharp resonance the carried state otherwise
    excites long transients that inflate segment power. An explicit
    excitation must then have length T + warmup * len(segments).
    """
    n_seg = len(segments)
    need = T + warmup * n_seg
    if excitation is None:
        rng = np.random.default_rng(seed)
        excitation = rng.standard_normal(need)
    else:
        excitation = np.asarray(excitation, dtype=float)
        if excitation.shape[0] < need:
            raise ValueError(
                f"excitation needs {need} samples, got {excitation.shape[0]}"
            )
    order = max(max(len(a), len(b)) for _, b, a in segments) - 1
    zi = np.zeros(order)
    out = np.empty(T)
    pos = 0
    used = 0
    for length, b, a in segments:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.any(np.abs(np.roots(a)) >= 1.0):
            raise ValueError("unstable pole configuration")
        take = min(length, T - pos)
        if take <= 0:
            break
        bp = np.pad(b, (0, order + 1 - len(b)))
        ap = np.pad(a, (0, order + 1 - len(a)))
        if warmup:
            _, zi = signal.lfilter(
                bp, ap, excitation[used : used + warmup], zi=np.zeros(order)
            )
            used += warmup
        out[pos : pos + take], zi = signal.lfilter(
            bp, ap, excitation[used : used + take], zi=zi
        )
        pos += take
        used += take
    if pos < T:
        raise ValueError("segment schedule shorter than the record")
    return out


def _fm_segments(spec: SyntheticSpec, T: int):
    fs = spec.sample_rate
    step_len = int(round(spec.step_period_s * fs))
    segs = []
    f = spec.fm_start_hz
    pos = 0
    while pos < T:
        a = _ar6_coeffs(f, spec.arma_radius, fs)
        segs.append((min(step_len, T - pos), _ARMA_B.copy(), a))
        pos += step_len
        f += spec.fm_step_hz
    return segs


def _psd(b: np.ndarray, a: np.ndarray, freqs: np.ndarray, fs: float) -> np.ndarray:
    """Two-sided power spectrum |b/a|^2 at the given frequencies (Hz),
    normalized per unit cycle so that mean over a full grid = variance."""
    w = 2.0 * np.pi * freqs / fs
    z = np.exp(-1j * w)
    num = np.polyval(b[::-1], z)
    den = np.polyval(a[::-1], z)
    return np.abs(num / den) ** 2


def _psd_binavg(b, a, freqs, fs, bin_width, oversample: int = 32):
    """PSD averaged over each grid bin so that the grid mean matches the
    full integral even for sharply peaked responses."""
    offs = (np.arange(oversample) + 0.5) / oversample - 0.5
    out = np.zeros_like(freqs, dtype=float)
    for o in offs:
        out += _psd(b, a, freqs + o * bin_width, fs)
    return out / oversample


def gen_synthetic(spec: SyntheticSpec, window_sec: float = 6.0,
                  grid_size: Optional[int] = None):
    """Simulate the two-component process and its ground-truth spectrogram.

    Returns (t, y, GroundTruth). The record is
    y = y1 * cos(2 pi f0 t) + y2 + sigma v with sigma set from snr_db
    against the noiseless power. Ground truth per window: the AR band
    shifted to +/- f0, scaled by the window-averaged squared modulation,
    plus the active stepped-resonance PSD (sample-count weighted when a
    window straddles a coefficient switch).
    """
    fs = spec.sample_rate
    T = int(round(spec.duration * fs))
    t = np.arange(T) / fs
    rng = np.random.default_rng(spec.rng_seed)

    warm = 2000  # stationary start; triple-pole transients span ~500 samples
    a1 = _ar6_coeffs(spec.ar_center_hz, spec.ar_radius, fs)
    y1 = ar_arma_simulate([(T, np.array([1.0]), a1)], T,
                          excitation=rng.standard_normal(T + warm),
                          warmup=warm)
    segs = _fm_segments(spec, T)
    y2 = ar_arma_simulate(segs, T,
                          excitation=rng.standard_normal(T + warm * len(segs)),
                          warmup=warm)
    mod = np.cos(2.0 * np.pi * spec.f0 * t)
    clean = y1 * mod + y2
    if np.isinf(spec.snr_db):
        sigma2 = 0.0
        y = clean
    else:
        sigma2 = float(np.mean(clean**2) / 10.0 ** (spec.snr_db / 10.0))
        y = clean + np.sqrt(sigma2) * rng.standard_normal(T)

    W = int(round(window_sec * fs))
    J = W if grid_size is None else grid_size
    N = T // W
    freqs = np.arange(J) / J * fs

    # stationary variances from a fine grid (mean of the two-sided PSD)
    fine = np.arange(8192) / 8192 * fs
    var1 = float(np.mean(_psd(np.array([1.0]), a1, fine, fs)))

    bw = fs / J
    S1_lo = _psd_binavg(np.array([1.0]), a1, freqs - spec.f0, fs, bw)
    S1_hi = _psd_binavg(np.array([1.0]), a1, freqs + spec.f0, fs, bw)
    seg_psd = [
        _psd_binavg(b, a, freqs, fs, bw) for _, b, a in segs
    ]
    seg_edges = np.cumsum([0] + [length for length, _, _ in segs])

    psd = np.empty((N, J))
    for n in range(N):
        lo, hi = n * W, (n + 1) * W
        c_n = float(np.mean(mod[lo:hi] ** 2))
        row = 0.5 * c_n * (S1_lo + S1_hi)
        # sample-count weights of the stepped segments inside this window
        for i in range(len(segs)):
            ov = max(0, min(hi, seg_edges[i + 1]) - max(lo, seg_edges[i]))
            if ov:
                row = row + (ov / W) * seg_psd[i]
        psd[n] = row
    gt = GroundTruth(
        psd=psd, freqs_hz=freqs, times=np.arange(N) * W / fs,
        noise_var=sigma2,
        meta={
            "ar_variance": var1,
            "spec": spec,
            "window_sec": window_sec,
        },
    )
    return t, y, gt


@dataclass
class LogModel:
    """Log-spectrum AR(1) with log-chi-square(2 nu) observation noise."""

    theta: float
    r: np.ndarray
    nu: float
    J: int

    def __post_init__(self):
        self.r = np.broadcast_to(np.asarray(self.r, dtype=float), (self.J,)).copy()


def gen_statespace_data(model, N: int, seed=None, x0=None):
    """Exact simulation of the generative model.

    Linear model: returns (obs (N, W) complex, states (N, J) complex).
    Log model: returns (psi (N, J), states (N, J)).
    """
    rng = np.random.default_rng(seed)
    if isinstance(model, LogModel):
        J = model.J
        s = np.zeros(J) if x0 is None else np.asarray(x0, dtype=float).copy()
        states = np.empty((N, J))
        for n in range(N):
            s = model.theta * s + np.sqrt(model.r) * rng.standard_normal(J)
            states[n] = s
        psi = states + np.log(rng.chisquare(2.0 * model.nu, size=(N, J)))
        return psi, states
    if not isinstance(model, StateSpaceModel):
        raise TypeError("expected StateSpaceModel or LogModel")
    J, W = model.J, model.W
    F = observation_matrix(W, J)
    x = np.zeros(J, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex).copy()
    states = np.empty((N, J), dtype=complex)
    obs = np.empty((N, W), dtype=complex)
    hq = np.sqrt(model.q / 2.0)
    hs = np.sqrt(model.sigma2 / 2.0)
    for n in range(N):
        x = model.alpha * x + hq * (
            rng.standard_normal(J) + 1j * rng.standard_normal(J)
        )
        states[n] = x
        obs[n] = F @ x + hs * (
            rng.standard_normal(W) + 1j * rng.standard_normal(W)
        )
    return obs, states
