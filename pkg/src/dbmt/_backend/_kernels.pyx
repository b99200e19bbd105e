# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-frequency recursion kernels (see _py.py for the contracts)."""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log

cnp.import_array()

cdef double _EXP_CLIP = 500.0


cdef inline double _clipped_exp(double x) nogil:
    if x > _EXP_CLIP:
        x = _EXP_CLIP
    elif x < -_EXP_CLIP:
        x = -_EXP_CLIP
    return exp(x)


def kalman_smooth_diag(z, ynorm2, int W, double alpha, q, double sigma2, x0, p0):
    z = np.ascontiguousarray(z, dtype=np.complex128)
    cdef Py_ssize_t N = z.shape[0], J = z.shape[1]
    q_arr = np.broadcast_to(np.asarray(q, dtype=np.float64), (J,)).copy()
    yn_arr = np.array(ynorm2, dtype=np.float64, order='C')
    x0_arr = np.array(x0, dtype=np.complex128, order='C')
    p0_arr = np.array(p0, dtype=np.float64, order='C')

    xf = np.empty((N, J), dtype=np.complex128)
    pf = np.empty((N, J), dtype=np.float64)
    pp = np.empty((N, J), dtype=np.float64)
    xpred = np.empty((N, J), dtype=np.complex128)
    xs = np.empty((N, J), dtype=np.complex128)
    ps = np.empty((N, J), dtype=np.float64)
    pc = np.zeros((N, J), dtype=np.float64)

    cdef double complex[:, ::1] zv = z, xfv = xf, xpv = xpred, xsv = xs
    cdef double[:, ::1] pfv = pf, ppv = pp, psv = ps, pcv = pc
    cdef double[::1] qv = q_arr, ynv = yn_arr, p0v = p0_arr
    cdef double complex[::1] x0v = x0_arr

    cdef double info_obs = W / sigma2
    cdef double loglik = 0.0, p_prev, ppn, pfn, resid2, quad, ac, B
    cdef double complex x_prev, xp, xfn, zc
    cdef Py_ssize_t n, j

    with nogil:
        for j in range(J):
            x_prev = x0v[j]
            p_prev = p0v[j]
            for n in range(N):
                if n == 0:
                    # the first state carries the prior (x0, p0) directly
                    xp = x_prev
                    ppn = p_prev
                else:
                    xp = alpha * x_prev
                    ppn = alpha * alpha * p_prev + qv[j]
                pfn = 1.0 / (1.0 / ppn + info_obs)
                xfn = pfn * (xp / ppn + zv[n, j] / sigma2)
                xpv[n, j] = xp
                ppv[n, j] = ppn
                pfv[n, j] = pfn
                xfv[n, j] = xfn
                # per-bin pieces of the innovation likelihood
                ac = xp.real * zv[n, j].real + xp.imag * zv[n, j].imag
                resid2 = -2.0 * ac + W * (xp.real * xp.real + xp.imag * xp.imag)
                zc = zv[n, j] - W * xp
                quad = resid2 / sigma2 - ppn * (
                    zc.real * zc.real + zc.imag * zc.imag
                ) / (sigma2 * (sigma2 + W * ppn))
                loglik -= quad + log(sigma2 + W * ppn)
                x_prev = xfn
                p_prev = pfn
            xsv[N - 1, j] = xfv[N - 1, j]
            psv[N - 1, j] = pfv[N - 1, j]
            for n in range(N - 2, -1, -1):
                B = alpha * pfv[n, j] / ppv[n + 1, j]
                xsv[n, j] = xfv[n, j] + B * (xsv[n + 1, j] - xpv[n + 1, j])
                psv[n, j] = pfv[n, j] + B * B * (psv[n + 1, j] - ppv[n + 1, j])
                pcv[n + 1, j] = B * psv[n + 1, j]
        # window-norm residual plus determinant constant (independent of j)
        for n in range(N):
            loglik -= ynv[n] / sigma2 + (W - J) * log(sigma2)

    return {
        "xf": xf, "pf": pf, "pp": pp, "xpred": xpred,
        "xs": xs, "ps": ps, "pc": pc, "loglik": loglik,
    }


cdef double _mode_scalar(double sp, double wp, double psi, double nu) nogil:
    cdef double s = sp, g, gp, e, lo, hi, mid
    cdef int it
    if psi - _EXP_CLIP / 2.0 > s:
        s = psi - _EXP_CLIP / 2.0
    for it in range(50):
        e = _clipped_exp(psi - s)
        g = s - sp - wp * (0.5 * e - nu)
        if fabs(g) < 1e-10:
            return s
        gp = 1.0 + 0.5 * wp * e
        s = s - g / gp
    # bisection fallback on the monotone residual
    lo = sp - wp * nu - 1.0
    hi = sp + 1.0
    while lo - sp - wp * (0.5 * _clipped_exp(psi - lo) - nu) > 0.0:
        lo -= 1.0 + fabs(lo)
    while hi - sp - wp * (0.5 * _clipped_exp(psi - hi) - nu) < 0.0:
        hi += 1.0 + fabs(hi)
    for it in range(200):
        mid = 0.5 * (lo + hi)
        if mid - sp - wp * (0.5 * _clipped_exp(psi - mid) - nu) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi)


def laplace_smooth_diag(psi, double theta, r, double nu, s0, w0):
    from scipy.special import gammaln
    psi = np.ascontiguousarray(psi, dtype=np.float64)
    cdef Py_ssize_t N = psi.shape[0], J = psi.shape[1]
    r_arr = np.broadcast_to(np.asarray(r, dtype=np.float64), (J,)).copy()
    s0_arr = np.array(s0, dtype=np.float64, order='C')
    w0_arr = np.array(w0, dtype=np.float64, order='C')

    sf = np.empty((N, J), dtype=np.float64)
    wf = np.empty((N, J), dtype=np.float64)
    wp = np.empty((N, J), dtype=np.float64)
    spred = np.empty((N, J), dtype=np.float64)
    ss = np.empty((N, J), dtype=np.float64)
    ws = np.empty((N, J), dtype=np.float64)
    wc = np.zeros((N, J), dtype=np.float64)

    cdef double[:, ::1] psiv = psi, sfv = sf, wfv = wf, wpv = wp
    cdef double[:, ::1] spv = spred, ssv = ss, wsv = ws, wcv = wc
    cdef double[::1] rv = r_arr, s0v = s0_arr, w0v = w0_arr

    cdef double lg = float(gammaln(nu)), log2 = log(2.0)
    cdef double loglik = 0.0, s_prev, w_prev, sp, wpn, s_star, e, wfn, A
    cdef Py_ssize_t n, j

    with nogil:
        for j in range(J):
            s_prev = s0v[j]
            w_prev = w0v[j]
            for n in range(N):
                sp = theta * s_prev
                wpn = theta * theta * w_prev + rv[j]
                s_star = _mode_scalar(sp, wpn, psiv[n, j], nu)
                e = _clipped_exp(psiv[n, j] - s_star)
                wfn = 1.0 / (1.0 / wpn + 0.5 * e)
                spv[n, j] = sp
                wpv[n, j] = wpn
                sfv[n, j] = s_star
                wfv[n, j] = wfn
                loglik += (
                    nu * (psiv[n, j] - s_star)
                    - 0.5 * e
                    - 0.5 * (s_star - sp) * (s_star - sp) / wpn
                    + 0.5 * log(wfn / wpn)
                    - nu * log2 - lg
                )
                s_prev = s_star
                w_prev = wfn
            ssv[N - 1, j] = sfv[N - 1, j]
            wsv[N - 1, j] = wfv[N - 1, j]
            for n in range(N - 2, -1, -1):
                A = theta * wfv[n, j] / wpv[n + 1, j]
                ssv[n, j] = sfv[n, j] + A * (ssv[n + 1, j] - spv[n + 1, j])
                wsv[n, j] = wfv[n, j] + A * A * (wsv[n + 1, j] - wpv[n + 1, j])
                wcv[n + 1, j] = A * wsv[n + 1, j]

    return {
        "sf": sf, "wf": wf, "wp": wp, "spred": spred,
        "ss": ss, "ws": ws, "wc": wc, "loglik": loglik,
    }
