"""Small numeric helpers: digamma and the chi-square quantile function."""
from __future__ import annotations

import numpy as np
from scipy import special as sp

__all__ = ["digamma", "chi2_quantile", "chi2_cdf"]


def digamma(x):
    """Digamma by upward recurrence to argument >= 6 plus the asymptotic
    series; absolute accuracy ~1e-12 for x > 0.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x).copy()
    if np.any(x <= 0):
        raise ValueError("digamma requires positive arguments")
    out = np.zeros_like(x)
    # psi(x) = psi(x + 1) - 1/x, applied until x >= 10
    while True:
        small = x < 10.0
        if not small.any():
            break
        out[small] -= 1.0 / x[small]
        x[small] += 1.0
    # asymptotic expansion at large argument
    inv = 1.0 / x
    inv2 = inv * inv
    out += (
        np.log(x)
        - 0.5 * inv
        - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0
            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))))
    )
    return float(out[0]) if scalar else out


def chi2_cdf(x, dof):
    return sp.gammainc(dof / 2.0, np.asarray(x, dtype=float) / 2.0)


def chi2_quantile(p: float, dof: float) -> float:
    """Inverse chi-square CDF: Wilson-Hilferty start, Newton refinement on
    the regularized incomplete gamma, to |CDF(x) - p| < 1e-10.
    """
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie in (0, 1)")
    if dof < 1:
        raise ValueError("dof must be >= 1")
    # Wilson-Hilferty: chi2 ~ dof * (1 - 2/(9 dof) + z sqrt(2/(9 dof)))^3
    z = float(np.sqrt(2.0) * sp.erfinv(2.0 * p - 1.0))
    c = 2.0 / (9.0 * dof)
    x = dof * (1.0 - c + z * np.sqrt(c)) ** 3
    x = max(x, 1e-300)
    k = dof / 2.0
    lgk = sp.gammaln(k)
    for _ in range(100):
        f = sp.gammainc(k, x / 2.0) - p
        if abs(f) < 1e-14:
            break
        # pdf of chi2_dof at x
        logpdf = (k - 1.0) * np.log(x / 2.0) - x / 2.0 - lgk - np.log(2.0)
        step = f / np.exp(logpdf)
        xn = x - step
        while xn <= 0:
            step *= 0.5
            xn = x - step
        if abs(step) < 1e-14 * max(1.0, x):
            x = xn
            break
        x = xn
    if abs(sp.gammainc(k, x / 2.0) - p) > 1e-10:
        # Newton can stall far in the tails (tiny pdf); fall back to bisection
        lo, hi = 0.0, max(x, 1.0)
        while sp.gammainc(k, hi / 2.0) < p:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if sp.gammainc(k, mid / 2.0) < p:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15 * max(1.0, hi):
                break
        x = 0.5 * (lo + hi)
        if abs(sp.gammainc(k, x / 2.0) - p) > 1e-10:
            raise RuntimeError("quantile refinement failed to converge")
    return float(x)
