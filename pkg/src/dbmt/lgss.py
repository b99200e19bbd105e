"""Complex linear-Gaussian state-space engine.

Kalman forward filter, fixed-interval (RTS) smoother, lag-one covariance
smoothing, an exact block-tridiagonal batch MAP solver used as an oracle,
and the steady-state Riccati solver.

When the frequency grid divides the window length the observation Gram
matrix is W*I and, for diagonal state noise, every covariance stays
diagonal: the recursions decouple into J scalar chains handled by the
kernel backend. A dense fallback covers arbitrary observation matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from ._backend import kalman_smooth_diag

__all__ = [
    "StateSpaceModel",
    "SmootherResult",
    "kalman_forward",
    "fis_backward",
    "covariance_smooth",
    "smooth",
    "batch_map_solve",
    "steady_state",
]

_DENSE_GUARD = 4096


def observation_matrix(W: int, J: int) -> np.ndarray:
    """(W, J) matrix with entries exp(i 2 pi l (j-1) / J), l = 0..W-1."""
    l = np.arange(W)[:, None]
    j = np.arange(J)[None, :]
    return np.exp(2j * np.pi * l * j / J)


@dataclass
class StateSpaceModel:
    """Per-taper model: x_n = alpha x_{n-1} + w_n, y_n = F x_n + v_n."""

    alpha: float
    q: np.ndarray
    sigma2: float
    W: int
    J: int

    def __post_init__(self):
        self.q = np.broadcast_to(np.asarray(self.q, dtype=float), (self.J,)).copy()
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError("alpha must lie in [0, 1)")
        if np.any(self.q <= 0):
            raise ValueError("state-noise variances must be positive")
        if self.sigma2 <= 0:
            raise ValueError("observation-noise variance must be positive")

    @property
    def F(self) -> np.ndarray:
        return observation_matrix(self.W, self.J)

    @property
    def is_fast(self) -> bool:
        """True when F^H F = W I exactly (J divides W)."""
        return self.W % self.J == 0


@dataclass
class SmootherResult:
    """Filtered / smoothed moments; diagonal or dense covariance storage.

    Lag-one entry n holds Cov(x_n, x_{n-1} | all data); entry 0 is unused.
    """

    diagonal: bool
    xf: np.ndarray
    xpred: np.ndarray
    pf: Optional[np.ndarray] = None
    pp: Optional[np.ndarray] = None
    Pf: Optional[np.ndarray] = None
    Pp: Optional[np.ndarray] = None
    xs: Optional[np.ndarray] = None
    ps: Optional[np.ndarray] = None
    Ps: Optional[np.ndarray] = None
    pc: Optional[np.ndarray] = None
    Pc: Optional[np.ndarray] = None
    gains: Optional[np.ndarray] = None
    loglik: Optional[float] = None

    @property
    def N(self) -> int:
        return self.xf.shape[0]

    def filtered_cov(self, n: int) -> np.ndarray:
        return np.diag(self.pf[n]).astype(complex) if self.diagonal else self.Pf[n]

    def predicted_cov(self, n: int) -> np.ndarray:
        return np.diag(self.pp[n]).astype(complex) if self.diagonal else self.Pp[n]

    def smoothed_cov(self, n: int) -> np.ndarray:
        return np.diag(self.ps[n]).astype(complex) if self.diagonal else self.Ps[n]

    def cross_cov(self, n: int) -> np.ndarray:
        return np.diag(self.pc[n]).astype(complex) if self.diagonal else self.Pc[n]


def _check_init(model: StateSpaceModel, x0, S0):
    J = model.J
    x0 = np.zeros(J, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex)
    if S0 is None:
        S0 = np.diag(model.q).astype(complex)
    else:
        S0 = np.asarray(S0)
        if S0.ndim == 1:
            S0 = np.diag(S0).astype(complex)
    w = np.linalg.eigvalsh((S0 + S0.conj().T) / 2.0)
    if w.min() < -1e-12 * max(1.0, w.max()):
        raise ValueError("initial covariance is not positive semidefinite")
    return x0, S0


def _project(model: StateSpaceModel, obs: np.ndarray) -> np.ndarray:
    obs = np.atleast_2d(np.asarray(obs))
    if obs.shape[1] != model.W:
        raise ValueError(f"window length {obs.shape[1]} != W={model.W}")
    return obs @ model.F.conj()


def kalman_forward(
    model: StateSpaceModel,
    obs: np.ndarray,
    x0: Optional[np.ndarray] = None,
    S0: Optional[np.ndarray] = None,
    dense: bool = False,
) -> SmootherResult:
    """Forward filter over N windows of raw (tapered) data of length W."""
    x0, S0 = _check_init(model, x0, S0)
    obs = np.atleast_2d(np.asarray(obs))
    use_fast = model.is_fast and not dense and _is_diag(S0)
    if use_fast:
        z = _project(model, obs)
        ynorm2 = np.sum(np.abs(obs) ** 2, axis=1)
        out = kalman_smooth_diag(
            np.ascontiguousarray(z), np.ascontiguousarray(ynorm2),
            model.W, model.alpha, np.ascontiguousarray(model.q),
            model.sigma2, np.ascontiguousarray(x0),
            np.real(np.diag(S0)).copy(),
        )
        return SmootherResult(
            diagonal=True, xf=out["xf"], xpred=out["xpred"],
            pf=out["pf"], pp=out["pp"],
            xs=out["xs"], ps=out["ps"], pc=out["pc"], loglik=out["loglik"],
        )
    return _dense_forward(model, obs, x0, S0)


def _is_diag(S: np.ndarray) -> bool:
    return np.count_nonzero(S - np.diag(np.diag(S))) == 0


def _dense_forward(model, obs, x0, S0) -> SmootherResult:
    N = obs.shape[0]
    J, W = model.J, model.W
    F = model.F
    a, s2 = model.alpha, model.sigma2
    Q = np.diag(model.q).astype(complex)

    xf = np.empty((N, J), dtype=complex)
    xpred = np.empty((N, J), dtype=complex)
    Pf = np.empty((N, J, J), dtype=complex)
    Pp = np.empty((N, J, J), dtype=complex)
    gains = np.empty((N, J, W), dtype=complex)

    loglik = 0.0
    x_prev, S_prev = x0, S0.astype(complex)
    for n in range(N):
        if n == 0:
            # the first state carries the prior (x0, S0) directly
            xp = x_prev
            Sp = S_prev.copy()
        else:
            xp = a * x_prev
            Sp = a * a * S_prev + Q
        Sinn = F @ Sp @ F.conj().T + s2 * np.eye(W)
        Sinn = (Sinn + Sinn.conj().T) / 2.0
        cf = linalg.cho_factor(Sinn, lower=True)
        K = linalg.cho_solve(cf, (Sp @ F.conj().T).conj().T).conj().T
        innov = obs[n] - F @ xp
        xf[n] = xp + K @ innov
        Pf[n] = Sp - K @ F @ Sp
        Pf[n] = (Pf[n] + Pf[n].conj().T) / 2.0
        xpred[n] = xp
        Pp[n] = Sp
        gains[n] = K
        sol = linalg.cho_solve(cf, innov)
        loglik -= float(np.real(np.vdot(innov, sol))) + 2.0 * float(
            np.sum(np.log(np.real(np.diag(cf[0]))))
        )
        x_prev, S_prev = xf[n], Pf[n]
    return SmootherResult(
        diagonal=False, xf=xf, xpred=xpred, Pf=Pf, Pp=Pp, gains=gains,
        loglik=loglik,
    )


def fis_backward(filtered: SmootherResult, model: StateSpaceModel) -> SmootherResult:
    """Fixed-interval smoother; fills smoothed means/covariances in place."""
    if filtered.diagonal:
        return filtered  # kernel already ran the full pass
    N = filtered.N
    xs = np.empty_like(filtered.xf)
    Ps = np.empty_like(filtered.Pf)
    Bs = np.empty_like(filtered.Pf)
    xs[N - 1] = filtered.xf[N - 1]
    Ps[N - 1] = filtered.Pf[N - 1]
    a = model.alpha
    for n in range(N - 2, -1, -1):
        B = a * filtered.Pf[n] @ np.linalg.inv(filtered.Pp[n + 1])
        xs[n] = filtered.xf[n] + B @ (xs[n + 1] - filtered.xpred[n + 1])
        Ps[n] = filtered.Pf[n] + B @ (Ps[n + 1] - filtered.Pp[n + 1]) @ B.conj().T
        Ps[n] = (Ps[n] + Ps[n].conj().T) / 2.0
        Bs[n] = B
    filtered.xs = xs
    filtered.Ps = Ps
    filtered._B = Bs  # retained for covariance smoothing
    return filtered


def covariance_smooth(smoothed: SmootherResult) -> SmootherResult:
    """Attach lag-one smoothed cross-covariances Cov(x_n, x_{n-1} | data)."""
    if smoothed.diagonal:
        return smoothed
    if smoothed.xs is None:
        raise ValueError("run fis_backward first")
    N = smoothed.N
    Pc = np.zeros_like(smoothed.Ps)
    for n in range(1, N):
        Pc[n] = smoothed._B[n - 1] @ smoothed.Ps[n]
    smoothed.Pc = Pc
    return smoothed


def smooth(model, obs, x0=None, S0=None, dense=False) -> SmootherResult:
    res = kalman_forward(model, obs, x0=x0, S0=S0, dense=dense)
    res = fis_backward(res, model)
    return covariance_smooth(res)


def batch_map_solve(
    model: StateSpaceModel,
    obs: np.ndarray,
    x0: Optional[np.ndarray] = None,
    S0: Optional[np.ndarray] = None,
):
    """Exact posterior mean and marginal covariances via one dense solve of
    the block-tridiagonal normal equations. Test oracle; guarded to small
    problems.
    """
    x0, S0 = _check_init(model, x0, S0)
    obs = np.atleast_2d(np.asarray(obs))
    N = obs.shape[0]
    J = model.J
    if N * J > _DENSE_GUARD:
        raise ValueError(f"batch solve limited to N*J <= {_DENSE_GUARD}")
    F = model.F
    a, s2 = model.alpha, model.sigma2
    Q = np.diag(model.q).astype(complex)
    Qinv = np.diag(1.0 / model.q).astype(complex)
    # the first state carries the prior (x0, S0) directly
    Q1inv = np.linalg.inv(S0.astype(complex))
    G = F.conj().T @ F / s2

    H = np.zeros((N * J, N * J), dtype=complex)
    b = np.zeros(N * J, dtype=complex)
    for n in range(N):
        sl = slice(n * J, (n + 1) * J)
        prior = Q1inv if n == 0 else Qinv
        H[sl, sl] = G + prior
        if n < N - 1:
            H[sl, sl] += a * a * Qinv
            H[sl.start + J : sl.stop + J, sl] = -a * Qinv
            H[sl, sl.start + J : sl.stop + J] = -a * Qinv
        b[sl] = F.conj().T @ obs[n] / s2
        if n == 0:
            b[sl] += Q1inv @ x0
    Hinv = np.linalg.inv((H + H.conj().T) / 2.0)
    mean = (Hinv @ b).reshape(N, J)
    margs = np.stack([Hinv[n * J : (n + 1) * J, n * J : (n + 1) * J] for n in range(N)])
    return mean, margs


def steady_state(model: StateSpaceModel, tol: float = 1e-12, max_iter: int = 200000):
    """Fixed point of the predicted-covariance Riccati recursion.

    Returns (Sigma_pred, Sigma_filt, Lam, Gam). For the diagonal fast path
    these are length-J vectors; Lam is the steady smoother/filter decay
    a.k.a. gamma(f), Gam the steady gain applied to the projected data F^H y.
    """
    a, s2, W = model.alpha, model.sigma2, model.W
    if model.is_fast:
        zeta = model.q.copy()
        for it in range(max_iter):
            tau = 1.0 / (1.0 / zeta + W / s2)
            nxt = a * a * tau + model.q
            if np.max(np.abs(nxt - zeta)) < tol * max(1.0, np.max(np.abs(nxt))):
                zeta = nxt
                break
            zeta = nxt
        else:
            raise RuntimeError(
                f"Riccati iteration did not converge after {max_iter} steps; "
                f"residual {np.max(np.abs(nxt - zeta)):.3e}"
            )
        tau = 1.0 / (1.0 / zeta + W / s2)
        sig_filt = tau if a > 0 else 1.0 / (1.0 / model.q + W / s2)
        lam = a * sig_filt / zeta if a > 0 else np.zeros_like(zeta)
        gam = sig_filt / s2
        return zeta, sig_filt, lam, gam

    F = model.F
    Q = np.diag(model.q).astype(complex)
    S = Q.copy()
    Iw = np.eye(W)
    for it in range(max_iter):
        M = F @ S @ F.conj().T + s2 * Iw
        Snew = a * a * (S - S @ F.conj().T @ np.linalg.solve(M, F @ S)) + Q
        Snew = (Snew + Snew.conj().T) / 2.0
        if np.max(np.abs(Snew - S)) < tol * max(1.0, np.max(np.abs(Snew))):
            S = Snew
            break
        S = Snew
    else:
        raise RuntimeError(
            f"Riccati iteration did not converge after {max_iter} steps; "
            f"residual {np.max(np.abs(Snew - S)):.3e}"
        )
    if a > 0:
        Sf = (S - Q) / (a * a)
    else:
        M = F @ S @ F.conj().T + s2 * Iw
        K = S @ F.conj().T @ np.linalg.inv(M)
        Sf = S - K @ F @ S
    Lam = a * Sf @ np.linalg.inv(a * a * Sf + Q)
    Gam = Sf / s2
    return S, Sf, Lam, Gam
