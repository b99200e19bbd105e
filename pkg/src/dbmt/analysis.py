"""Steady-state theory: equivalent filter banks, the kappa/mu weighting
functions with their closed-form bounds, the flat-spectrum Riccati solution,
and the bias/variance bound evaluations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .lgss import StateSpaceModel, steady_state
from .tapers import TaperSet

__all__ = [
    "TheoryCurves",
    "equivalent_filters",
    "kappa_mu",
    "kappa_mu_brute",
    "kappa_bounds",
    "flat_spectrum_gamma",
    "alpha_for_unit_kappa",
    "theorem_bounds",
    "theory_curves",
]


def flat_spectrum_gamma(alpha: float, q_over_sigma2: float, W: int):
    """Closed-form steady state for a flat state-noise spectrum.

    Returns (zeta/sigma2, gamma, eta) for the scalar per-bin Riccati
    recursion z <- alpha^2 / (1/z + W) + q with z = zeta/sigma2:
    the predicted variance, the smoother decay rate, and the steady gain
    eta = z / (1 + W z). gamma is 0 (flagged degenerate) when alpha = 0.
    """
    if not (0.0 <= alpha < 1.0):
        raise ValueError("alpha must lie in [0, 1)")
    if q_over_sigma2 <= 0:
        raise ValueError("q/sigma2 must be positive")
    if W < 1:
        raise ValueError("W must be >= 1")
    qt = float(q_over_sigma2)
    b = 1.0 - alpha * alpha - W * qt
    z = (-b + np.sqrt(b * b + 4.0 * W * qt)) / (2.0 * W)
    eta = z / (1.0 + W * z)
    # gamma = (1 - qt/z)/alpha algebraically; this form avoids the
    # catastrophic cancellation of z - qt at small alpha
    gamma = alpha / (1.0 + W * z)
    return float(z), float(gamma), float(eta)


def kappa_mu(gamma: float, alpha: float, n: int, N: int) -> Tuple[float, float]:
    """Signal and noise weights at window n (1-based) of an N-window record.

    kappa = p^2 sum_{s,s'} g^{|s-n|+|s'-n|} a^{|s-s'|} and
    mu    = p^2 sum_s g^{2|s-n|}, with prefactor p = 1 - gamma/alpha.
    The double sum is folded into an O(N) recurrence.
    """
    p2 = _prefactor_sq(gamma, alpha)
    s = np.arange(1, N + 1)
    a = gamma ** np.abs(s - n)
    mu = p2 * float(np.sum(a * a))
    # u_s = sum_{s'<=s} alpha^(s-s') a_{s'}; double sum = sum a_s (2 u_s - a_s)
    u = np.empty(N)
    acc = 0.0
    for i in range(N):
        acc = alpha * acc + a[i]
        u[i] = acc
    kappa = p2 * float(np.sum(a * (2.0 * u - a)))
    return kappa, mu


def kappa_mu_brute(gamma: float, alpha: float, n: int, N: int):
    """O(N^2) double sum; reference implementation."""
    p2 = _prefactor_sq(gamma, alpha)
    s = np.arange(1, N + 1)
    a = gamma ** np.abs(s - n)
    A = alpha ** np.abs(s[:, None] - s[None, :])
    kappa = p2 * float(a @ A @ a)
    mu = p2 * float(np.sum(a * a))
    return kappa, mu


def _prefactor_sq(gamma: float, alpha: float) -> float:
    if alpha > 0:
        return (1.0 - gamma / alpha) ** 2
    if gamma == 0.0:
        return 1.0
    raise ValueError("gamma must be 0 when alpha is 0")


def kappa_bounds(gamma: float, alpha: float, n: int, N: int):
    """Closed-form bracket for kappa at window n: center +/- slack with

    center = p^2 [ (1 + a g - 2 (a g)^N) / (1 - a g) * T0 + g / (1-g)^2 ]
    slack  = p^2 g / (1-g)^2
    T0     = (1 + g^2 - g^(2n) - g^(2(N-n+1))) / (1 - g^2).
    """
    if not (0.0 < gamma < 1.0 and 0.0 < alpha < 1.0):
        raise ValueError("bounds require gamma, alpha in (0, 1)")
    g, a = gamma, alpha
    p2 = _prefactor_sq(g, a)
    T0 = (1.0 + g * g - g ** (2 * n) - g ** (2 * (N - n + 1))) / (1.0 - g * g)
    ag = a * g
    core = (1.0 + ag - 2.0 * ag**N) / (1.0 - ag) * T0
    slack = p2 * g / (1.0 - g) ** 2
    center = p2 * core + slack
    return center - slack, center + slack


def alpha_for_unit_kappa(q_over_sigma2: float, n: int, N: int, W: int,
                         tol: float = 1e-10):
    """Smallest-risk memory: the alpha in (0, 1) where kappa crosses 1.

    Bisection on alpha; returns (alpha_star, flag) where flag marks a
    missing sign change (boundary returned).
    """
    if q_over_sigma2 <= 0:
        raise ValueError("q/sigma2 must be positive")

    def f(alpha):
        _, g, _ = flat_spectrum_gamma(alpha, q_over_sigma2, W)
        k, _ = kappa_mu(g, alpha, n, N)
        return k - 1.0

    lo, hi = 1e-9, 1.0 - 1e-9
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo, ""
    if flo * fhi > 0:
        return (lo, "no-crossing") if abs(flo) < abs(fhi) else (hi, "no-crossing")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid, ""
        if flo * fm < 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi), ""


def theorem_bounds(D: float, sigma2: float, lam: np.ndarray,
                   kappa: float, mu: float, K: int):
    """Flat-spectrum bias and variance bound values.

    bias <= (1 - mean(lam)) kappa sup(D) + |1 - kappa| D + mu sigma2
    var  <= (2/K) [sup(kappa D + mu sigma2)]^2
    evaluated in the flat regime where sup(D) = D.
    """
    lam = np.asarray(lam, dtype=float)
    if D <= 0 or sigma2 < 0 or K < 1:
        raise ValueError("inputs must be positive")
    bias = (1.0 - lam.mean()) * kappa * D + abs(1.0 - kappa) * D + mu * sigma2
    var = (2.0 / K) * (kappa * D + mu * sigma2) ** 2
    return float(bias), float(var)


def equivalent_filters(model: StateSpaceModel, taps: TaperSet, n: int, N: int,
                       freq_indices=None) -> np.ndarray:
    """Time-domain filters mapping the whole T = N W record to the smoothed
    eigen-coefficient of window n (1-based) for each taper and frequency.

    The steady-state smoother acting on the projected data z_s is the
    two-sided geometric kernel h_t = G gamma^|t| obtained from the spectral
    factorization of the posterior precision W/sigma2 + |1 - a e^{-iw}|^2/q;
    its zero-lag weight G = q (1+gamma^2) / (sigma2 (Wq/sigma2 + 1 + a^2)(1-gamma^2)).

    Returns an array of shape (K, len(freq_indices), N*W).
    """
    if not model.is_fast:
        raise ValueError("equivalent filters require the divisible grid")
    J, W = model.J, model.W
    if freq_indices is None:
        freq_indices = np.arange(J)
    freq_indices = np.asarray(freq_indices, dtype=int)
    a, s2 = model.alpha, model.sigma2
    q = model.q[freq_indices]
    if a == 0.0 and np.any(q == 0):
        raise ValueError("degenerate steady state (alpha = 0, q = 0)")
    qt = q / s2
    bq = 1.0 - a * a - W * qt
    z = (-bq + np.sqrt(bq * bq + 4.0 * W * qt)) / (2.0 * W)
    gam = a / (1.0 + W * z)
    G = q * (1.0 + gam**2) / (s2 * (W * qt + 1.0 + a * a) * (1.0 - gam**2))

    F = model.F  # (W, J)
    filters = np.zeros((taps.K, freq_indices.size, N * W), dtype=complex)
    s_off = np.arange(1, N + 1) - n
    for fi, j in enumerate(freq_indices):
        w_s = G[fi] * gam[fi] ** np.abs(s_off)          # (N,)
        row = np.conj(F[:, j])                          # (W,)
        block = np.einsum("kw,w->kw", taps.u, row)      # (K, W)
        filters[:, fi, :] = (w_s[None, :, None] * block[:, None, :]).reshape(
            taps.K, N * W
        )
    return filters


@dataclass
class TheoryCurves:
    """All steady-state quantities for one (alpha, q/sigma2, W, N, n)."""

    alpha: float
    q_over_sigma2: float
    W: int
    N: int
    n: int
    zeta: float
    gamma: float
    eta: float
    kappa: float
    mu: float
    kappa_lo: float
    kappa_hi: float


def theory_curves(alpha: float, q_over_sigma2: float, W: int, N: int,
                  n: int) -> TheoryCurves:
    z, g, eta = flat_spectrum_gamma(alpha, q_over_sigma2, W)
    k, m = kappa_mu(g, alpha, n, N)
    if 0.0 < g < 1.0 and 0.0 < alpha < 1.0:
        lo, hi = kappa_bounds(g, alpha, n, N)
    else:
        lo = hi = k
    return TheoryCurves(
        alpha=alpha, q_over_sigma2=q_over_sigma2, W=W, N=N, n=n,
        zeta=z, gamma=g, eta=eta, kappa=k, mu=m, kappa_lo=lo, kappa_hi=hi,
    )
