"""Pure-NumPy reference implementation of the per-frequency recursion kernels.

When the observation Gram matrix is W*I and the state covariances are
diagonal, the filter/smoother decouples into J independent scalar recursions;
these kernels run them for all bins at once, looping only over windows.
The compiled extension in _kernels.pyx implements the same contracts.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

_EXP_CLIP = 500.0


def kalman_smooth_diag(z, ynorm2, W, alpha, q, sigma2, x0, p0):
    """Forward filter + fixed-interval smoother + lag-one covariances for the
    decoupled complex linear-Gaussian model.

    z : (N, J) complex projected observations F^H y_n
    ynorm2 : (N,) squared norms of the raw windows (for the likelihood)
    Returns dict with filtered/predicted/smoothed moments, lag-one smoothed
    cross-covariances (entry n pairs windows n and n-1; entry 0 unused) and
    the exact marginal log-likelihood (up to a parameter-free constant).
    """
    z = np.asarray(z, dtype=np.complex128)
    N, J = z.shape
    q = np.broadcast_to(np.asarray(q, dtype=np.float64), (J,))
    xf = np.empty((N, J), dtype=np.complex128)
    pf = np.empty((N, J))
    pp = np.empty((N, J))
    xpred = np.empty((N, J), dtype=np.complex128)

    info_obs = W / sigma2
    loglik = 0.0
    x_prev = np.asarray(x0, dtype=np.complex128)
    p_prev = np.asarray(p0, dtype=np.float64)
    for n in range(N):
        if n == 0:
            # the first state carries the prior (x0, p0) directly
            xp = x_prev.copy()
            ppn = p_prev.copy()
        else:
            xp = alpha * x_prev
            ppn = alpha * alpha * p_prev + q
        pfn = 1.0 / (1.0 / ppn + info_obs)
        xfn = pfn * (xp / ppn + z[n] / sigma2)
        xpred[n] = xp
        pp[n] = ppn
        pf[n] = pfn
        xf[n] = xfn
        # innovation likelihood of the full W-dim window (circular complex):
        # ||y - F xp||^2/s2 - sum_j pp_j |z_j - W xp_j|^2 / (s2 (s2 + W pp_j))
        resid2 = ynorm2[n] - 2.0 * np.real(np.vdot(xp, z[n])) + W * np.sum(
            np.abs(xp) ** 2
        )
        zc = z[n] - W * xp
        quad = resid2 / sigma2 - np.sum(
            ppn * np.abs(zc) ** 2 / (sigma2 * (sigma2 + W * ppn))
        )
        loglik -= quad + np.sum(np.log(sigma2 + W * ppn)) + (W - J) * np.log(sigma2)
        x_prev, p_prev = xfn, pfn

    xs = np.empty_like(xf)
    ps = np.empty_like(pf)
    pc = np.zeros_like(pf)
    xs[N - 1] = xf[N - 1]
    ps[N - 1] = pf[N - 1]
    for n in range(N - 2, -1, -1):
        B = alpha * pf[n] / pp[n + 1]
        xs[n] = xf[n] + B * (xs[n + 1] - xpred[n + 1])
        ps[n] = pf[n] + B * B * (ps[n + 1] - pp[n + 1])
        pc[n + 1] = B * ps[n + 1]
    return {
        "xf": xf,
        "pf": pf,
        "pp": pp,
        "xpred": xpred,
        "xs": xs,
        "ps": ps,
        "pc": pc,
        "loglik": float(loglik),
    }


def _newton_mode(sp, wp, psi, nu):
    """Per-bin posterior mode: s = sp + wp*(exp(psi-s)/2 - nu).

    The residual is increasing and concave in s, so Newton converges
    monotonically from either side; a bisection guard handles pathological
    starts anyway.
    """
    s = np.maximum(sp, psi - _EXP_CLIP / 2.0)
    converged = False
    for _ in range(50):
        e = np.exp(np.clip(psi - s, -_EXP_CLIP, _EXP_CLIP))
        g = s - sp - wp * (0.5 * e - nu)
        if np.all(np.abs(g) < 1e-10):
            converged = True
            break
        gp = 1.0 + 0.5 * wp * e
        s = s - g / gp
    if not converged:
        e = np.exp(np.clip(psi - s, -_EXP_CLIP, _EXP_CLIP))
        g = s - sp - wp * (0.5 * e - nu)
        bad = np.abs(g) >= 1e-10
        for j in np.nonzero(bad)[0]:
            s[j] = _bisect_mode(sp[j], wp[j], psi[j], nu)
    return s


def _bisect_mode(sp, wp, psi, nu):
    lo, hi = sp - wp * nu - 1.0, sp + 1.0
    def g(s):
        return s - sp - wp * (0.5 * np.exp(np.clip(psi - s, -_EXP_CLIP, _EXP_CLIP)) - nu)
    while g(lo) > 0:
        lo -= max(1.0, abs(lo))
    while g(hi) < 0:
        hi += max(1.0, abs(hi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi)


def laplace_smooth_diag(psi, theta, r, nu, s0, w0):
    """Laplace forward filter + RTS smoother for the log-spectrum model.

    psi : (N, J) log eigen-spectra observations (already offset by log 2).
    Returns smoothed moments, lag-one cross-covariances and the Laplace
    approximation of the marginal log-likelihood.
    """
    psi = np.asarray(psi, dtype=np.float64)
    N, J = psi.shape
    r = np.broadcast_to(np.asarray(r, dtype=np.float64), (J,))
    sf = np.empty((N, J))
    wf = np.empty((N, J))
    wp = np.empty((N, J))
    spred = np.empty((N, J))

    loglik = 0.0
    lg = float(gammaln(nu))
    s_prev = np.asarray(s0, dtype=np.float64)
    w_prev = np.asarray(w0, dtype=np.float64)
    for n in range(N):
        sp = theta * s_prev
        wpn = theta * theta * w_prev + r
        s_star = _newton_mode(sp, wpn, psi[n], nu)
        e = np.exp(np.clip(psi[n] - s_star, -_EXP_CLIP, _EXP_CLIP))
        wfn = 1.0 / (1.0 / wpn + 0.5 * e)
        spred[n] = sp
        wp[n] = wpn
        sf[n] = s_star
        wf[n] = wfn
        loglik += np.sum(
            nu * (psi[n] - s_star)
            - 0.5 * e
            - 0.5 * (s_star - sp) ** 2 / wpn
            + 0.5 * np.log(wfn / wpn)
        ) - J * (nu * np.log(2.0) + lg)
        s_prev, w_prev = s_star, wfn

    ss = np.empty_like(sf)
    ws = np.empty_like(wf)
    wc = np.zeros_like(wf)
    ss[N - 1] = sf[N - 1]
    ws[N - 1] = wf[N - 1]
    for n in range(N - 2, -1, -1):
        A = theta * wf[n] / wp[n + 1]
        ss[n] = sf[n] + A * (ss[n + 1] - spred[n + 1])
        ws[n] = wf[n] + A * A * (ws[n + 1] - wp[n + 1])
        wc[n + 1] = A * ws[n + 1]
    return {
        "sf": sf,
        "wf": wf,
        "wp": wp,
        "spred": spred,
        "ss": ss,
        "ws": ws,
        "wc": wc,
        "loglik": float(loglik),
    }
