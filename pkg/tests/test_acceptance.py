"""Acceptance gate: one test per release criterion, tolerances pinned.

Each test prints a single "criterion N: PASS" line on success so a plain
`pytest -v tests/test_acceptance.py` reads as a checklist.
"""
import time

import numpy as np
import pytest

from dbmt import (DbmtConfig, EigenTrack, LogModel, MtConfig, StateSpaceModel,
                  SyntheticSpec, alpha_for_unit_kappa, assemble_spectrogram,
                  batch_map_solve, compute_dpss, concentration_matrix,
                  em_fit_taper, em_fit_taper_log, equivalent_filters,
                  flat_spectrum_gamma, gen_statespace_data, gen_synthetic,
                  kappa_bounds, kappa_mu, logdbmt_spectrogram, mt_spectrogram,
                  smooth, theorem_bounds)
from dbmt.analysis import kappa_mu_brute
from dbmt.dbmt_em import _diag_moments


def _report(n, detail=""):
    print(f"criterion {n}: PASS {detail}")


def test_criterion_1_smoother_equals_batch_map():
    # 50 random small instances; means within 1e-8 relative, marginal
    # covariances within 1e-6; total runtime under 10 s
    t0 = time.time()
    rng = np.random.default_rng(42)
    for _ in range(50):
        N = int(rng.integers(2, 17))
        J = int(rng.integers(1, 9))
        W = int(J * rng.integers(1, max(2, 16 // J + 1)))
        W = min(W, 16)
        if W % J:
            W = J
        model = StateSpaceModel(
            alpha=float(rng.uniform(0.05, 0.98)),
            q=rng.uniform(0.1, 2.0, J),
            sigma2=float(rng.uniform(0.2, 2.0)),
            W=W, J=J,
        )
        obs = rng.standard_normal((N, W)) + 1j * rng.standard_normal((N, W))
        res = smooth(model, obs)
        mean, margs = batch_map_solve(model, obs)
        scale = max(1.0, float(np.max(np.abs(mean))))
        assert np.max(np.abs(res.xs - mean)) <= 1e-8 * scale
        for n in range(N):
            ref = np.real(np.diag(margs[n]))
            assert np.max(np.abs(res.ps[n] - ref)) <= 1e-6
    elapsed = time.time() - t0
    assert elapsed < 10.0
    _report(1, f"(50 instances, {elapsed:.2f} s)")


def test_criterion_2_em_monotone_loglik():
    # 20 random runs split across the linear and log models; the marginal
    # log-likelihood never drops by more than a relative 1e-6
    slack = 1e-6
    for seed in range(10):
        model = StateSpaceModel(alpha=0.85, q=np.full(4, 0.6), sigma2=1.0,
                                W=8, J=4)
        obs, _ = gen_statespace_data(model, 80, seed=seed)
        cfg = DbmtConfig(W=8, B=0.25, K=3, J=4, sigma2=1.0, L_max=40)
        track = em_fit_taper(np.asarray(obs), np.ones(8) / np.sqrt(8.0), cfg)
        ll = np.asarray(track.loglik)
        assert np.all(np.diff(ll) >= -slack * np.maximum(1.0, np.abs(ll[:-1])))
    for seed in range(10):
        psi, _ = gen_statespace_data(
            LogModel(theta=0.95, r=0.05, nu=1.0, J=6), 200, seed=seed)
        cfg = DbmtConfig(W=8, B=0.25, K=3, J=6, sigma2=1.0, L_max=40)
        track = em_fit_taper_log(psi, cfg)
        ll = np.asarray(track.loglik)
        assert np.all(np.diff(ll) >= -slack * np.maximum(1.0, np.abs(ll[:-1])))
    _report(2, "(20 runs, zero violations)")


def test_criterion_3_parameter_consistency():
    # alpha and theta recovered within +/-0.1, nu within +/-0.2, averaged
    # over 20 seeds of model-matched data with N = 500; under 2 minutes
    t0 = time.time()
    lin = StateSpaceModel(alpha=0.9, q=np.full(4, 0.5), sigma2=1.0, W=8, J=4)
    cfg_lin = DbmtConfig(W=8, B=0.25, K=3, J=4, sigma2=1.0, L_max=100)
    alphas = []
    for seed in range(20):
        obs, _ = gen_statespace_data(lin, 500, seed=seed)
        alphas.append(
            em_fit_taper(np.asarray(obs), np.ones(8) / np.sqrt(8.0),
                         cfg_lin).alpha)
    cfg_log = DbmtConfig(W=8, B=0.25, K=3, J=8, sigma2=1.0, L_max=300)
    thetas, nus = [], []
    for seed in range(20):
        psi, _ = gen_statespace_data(
            LogModel(theta=0.95, r=0.05, nu=1.0, J=8), 500, seed=seed)
        track = em_fit_taper_log(psi, cfg_log)
        thetas.append(track.theta)
        nus.append(track.nu)
    elapsed = time.time() - t0
    assert abs(np.mean(alphas) - 0.9) <= 0.1
    assert abs(np.mean(thetas) - 0.95) <= 0.1
    assert abs(np.mean(nus) - 1.0) <= 0.2
    assert elapsed < 120.0
    _report(3, f"(alpha {np.mean(alphas):.3f}, theta {np.mean(thetas):.3f}, "
               f"nu {np.mean(nus):.3f}, {elapsed:.1f} s)")


def test_criterion_4_denoising_gain_over_mt():
    # synthetic two-component process at 30 dB SNR, 50 Hz, 6 s windows,
    # 3 tapers, time-bandwidth 3: the log-model spectrogram must beat the
    # 50%-overlap sliding-window baseline in log-domain MSE against the
    # generated ground truth, and be smoother in time; under 5 minutes
    t0 = time.time()
    spec = SyntheticSpec(rng_seed=7)
    _, y, gt = gen_synthetic(spec)
    truth = gt.psd + gt.noise_var
    cfg = DbmtConfig(W=300, B=0.01, K=3, J=300, sigma2=1.0, rng_seed=0)
    spg = logdbmt_spectrogram(y, 50.0, cfg)
    mt = mt_spectrogram(
        y, MtConfig(W=300, B=0.01, K=3, J=300, overlap=0.5), sample_rate=50.0)
    mt_aligned = mt.power[::2][: truth.shape[0]]  # windows at shared starts

    def log_mse(p):
        return float(np.mean((np.log(p) - np.log(truth)) ** 2))

    def temporal_var(p):
        return float(np.mean(np.var(np.log(p), axis=0)))

    mse_mt, mse_db = log_mse(mt_aligned), log_mse(spg.power)
    tv_mt, tv_db = temporal_var(mt_aligned), temporal_var(spg.power)
    elapsed = time.time() - t0
    assert mse_db < mse_mt
    assert tv_db < tv_mt
    assert elapsed < 300.0
    _report(4, f"(log-MSE {mse_db:.3f} < {mse_mt:.3f}, "
               f"temporal var {tv_db:.3f} < {tv_mt:.3f}, {elapsed:.1f} s)")


def test_criterion_5_theory_curves():
    t0 = time.time()
    # noise weight below 1 and increasing in alpha at N=100, n=50, q/s2=10
    mus = []
    for a in np.linspace(0.02, 0.98, 25):
        _, g, _ = flat_spectrum_gamma(a, 10.0, 1)
        _, m = kappa_mu(g, a, 50, 100)
        mus.append(m)
    mus = np.asarray(mus)
    assert np.all(mus <= 1.0 + 1e-12)
    assert np.all(np.diff(mus) > 0)
    # signal weight inside its closed-form bracket, checked against the
    # O(N^2) double sum to 1e-12 on a 9 x 9 grid
    for a in np.linspace(0.1, 0.9, 9):
        for g in np.linspace(0.05, 0.85, 9):
            if g >= a:
                continue
            k, _ = kappa_mu(g, a, 50, 100)
            kb, _ = kappa_mu_brute(g, a, 50, 100)
            assert abs(k - kb) <= 1e-12 * max(1.0, abs(kb))
            lo, hi = kappa_bounds(g, a, 50, 100)
            assert lo - 1e-12 <= k <= hi + 1e-12
    # closed-form steady state equals the Riccati fixed point to 1e-10
    for qt in np.geomspace(1e-2, 1e2, 20):
        z, _, _ = flat_spectrum_gamma(0.9, qt, 1)
        assert abs(0.81 / (1.0 / z + 1.0) + qt - z) <= 1e-10 * z
    # unit-crossing memory decreasing in the drive-to-noise ratio
    stars = [alpha_for_unit_kappa(qt, 50, 100, 1)[0]
             for qt in np.geomspace(0.1, 100.0, 10)]
    assert np.all(np.diff(stars) < 0)
    elapsed = time.time() - t0
    assert elapsed < 30.0
    _report(5, f"({elapsed:.2f} s)")


def test_criterion_6_bounds_hold_on_monte_carlo():
    # flat-spectrum simulation of the steady-state estimator: empirical
    # bias and variance of the averaged power stay below the bound values
    t0 = time.time()
    D, sigma2, W, N, n, alpha = 2.0, 0.5, 1, 41, 21, 0.8
    q_over_s2 = D * (1 - alpha ** 2) / sigma2  # flat drive matching D
    _, gamma, _ = flat_spectrum_gamma(alpha, q_over_s2, W)
    lam = compute_dpss(300, 0.01, 3).lam
    K = lam.size
    kappa, mu = kappa_mu(gamma, alpha, n, N)
    bias_bound, var_bound = theorem_bounds(D, sigma2, lam, kappa, mu, K)

    pref = 1.0 - gamma / alpha
    wts = pref * gamma ** np.abs(np.arange(1, N + 1) - n)
    rng = np.random.default_rng(2024)
    reps = 200
    est = np.empty(reps)
    for rep in range(reps):
        acc = 0.0
        for k in range(K):
            v = lam[k] * D
            x = np.empty(N, dtype=complex)
            x[0] = np.sqrt(v / 2) * (rng.standard_normal()
                                     + 1j * rng.standard_normal())
            sd = np.sqrt(v * (1 - alpha ** 2) / 2)
            for s in range(1, N):
                x[s] = alpha * x[s - 1] + sd * (rng.standard_normal()
                                                + 1j * rng.standard_normal())
            e = np.sqrt(sigma2 / 2) * (rng.standard_normal(N)
                                       + 1j * rng.standard_normal(N))
            acc += np.abs(np.sum(wts * (x + e))) ** 2
        est[rep] = acc / K
    bias_emp = abs(est.mean() - D)
    var_emp = est.var(ddof=1)
    elapsed = time.time() - t0
    assert bias_emp <= bias_bound
    assert var_emp <= var_bound
    assert elapsed < 120.0
    _report(6, f"(bias {bias_emp:.3f} <= {bias_bound:.3f}, "
               f"var {var_emp:.3f} <= {var_bound:.3f}, {elapsed:.1f} s)")


def test_criterion_7_ci_calibration():
    # sliding-window chi-square bands: coverage of the true flat level at
    # nominal 95% over at least 1e4 independent cells
    rng = np.random.default_rng(5)
    v = 2.0
    y = np.sqrt(v) * rng.standard_normal(60000)
    mt = mt_spectrogram(y, MtConfig(W=100, B=0.03, K=3, J=50, overlap=0.0))
    covered = (mt.ci_lo <= v) & (v <= mt.ci_hi)
    assert covered.size >= 10000
    rate_mt = float(covered.mean())
    assert 0.90 <= rate_mt <= 0.99

    # state-space Monte-Carlo bands on model-matched data, smoothing with
    # the true parameters; target is the taper-averaged true power
    model = StateSpaceModel(alpha=0.9, q=np.full(8, 0.5), sigma2=1.0,
                            W=16, J=8)
    cfg = DbmtConfig(W=16, B=0.125, K=3, J=8, sigma2=1.0,
                     mc_samples=400, ci_level=0.95, rng_seed=1)
    hits, total = 0, 0
    for seed in range(30):
        tracks = []
        truths = []
        for k in range(3):
            obs, states = gen_statespace_data(model, 50, seed=1000 * seed + k)
            res = smooth(model, np.asarray(obs))
            ps, _ = _diag_moments(res)
            tracks.append(EigenTrack(taper=k, xs=res.xs, ps=ps, alpha=0.9,
                                     q=model.q, iterations=0))
            truths.append(np.abs(np.asarray(states)) ** 2)
        spg = assemble_spectrogram(tracks, cfg)
        target = np.mean(truths, axis=0)
        hit = (spg.ci_lo <= target) & (target <= spg.ci_hi)
        hits += int(hit.sum())
        total += hit.size
    rate_db = hits / total
    assert total >= 10000
    assert 0.90 <= rate_db <= 0.99
    _report(7, f"(MT {rate_mt:.3f}, state-space {rate_db:.3f})")


def test_criterion_8_taper_quality():
    taps = compute_dpss(300, 3.0 / 300, 3)
    gram = taps.u @ taps.u.T
    assert np.max(np.abs(gram - np.eye(3))) <= 1e-10
    assert np.all(taps.lam > 0.99)
    A = concentration_matrix(300, 3.0 / 300)
    for k in range(3):
        rq = taps.u[k] @ A @ taps.u[k]
        assert abs(taps.lam[k] - rq) <= 1e-10
    _report(8, f"(min concentration {taps.lam.min():.6f})")


def test_criterion_9_equivalent_filter_bank():
    # interior-window reconstruction within 2% relative error
    rng = np.random.default_rng(9)
    W, J, N, n = 8, 4, 40, 20
    model = StateSpaceModel(alpha=0.9, q=np.full(J, 0.7), sigma2=1.0, W=W, J=J)
    taps = compute_dpss(W, 2.0 / W, 3)
    y = rng.standard_normal((N, W)) + 1j * rng.standard_normal((N, W))
    filt = equivalent_filters(model, taps, n, N)
    est = filt @ y.reshape(N * W)
    worst = 0.0
    for k in range(3):
        ref = smooth(model, y * taps.u[k][None, :]).xs[n - 1]
        worst = max(worst, float(np.max(np.abs(est[k] - ref))
                                 / np.max(np.abs(ref))))
    assert worst <= 0.02

    # fitted synthetic model: the 11 Hz filter passes 11 Hz content at
    # least 10 dB louder than the 9 Hz filter does.  Fit on the opening
    # 48 s, where the stepped resonance sits near 5 Hz so the 9 Hz bin
    # holds only noise; later in the record the sweep passes 9 Hz and
    # both bins would saturate.
    spec = SyntheticSpec(rng_seed=7)
    _, y2, gt = gen_synthetic(spec)
    from dbmt.spectrogram import segment
    windows = segment(y2, 300)[:8]
    taps2 = compute_dpss(300, 0.01, 3)
    cfg = DbmtConfig(W=300, B=0.01, K=3, J=300, sigma2=gt.noise_var,
                     L_max=15)
    track = em_fit_taper(windows * 1.0, taps2.u[0], cfg)
    fitted = StateSpaceModel(alpha=track.alpha, q=track.q, sigma2=cfg.sigma2,
                             W=300, J=300)
    j_on = int(round(11.0 / 50.0 * 300))   # 11 Hz bin
    j_off = int(round(9.0 / 50.0 * 300))   # 9 Hz bin
    Nf, nf = 8, 5
    fb = equivalent_filters(fitted, taps2, nf, Nf,
                            freq_indices=np.array([j_on, j_off]))
    # drive each filter with a unit tone at its own center frequency: the
    # on-signal filter passes it, the off-signal filter shrinks it
    t = np.arange(Nf * 300) / 50.0
    g_on = np.abs(fb[0, 0] @ np.exp(2j * np.pi * 11.0 * t))
    g_off = np.abs(fb[0, 1] @ np.exp(2j * np.pi * 9.0 * t))
    gap_db = 20.0 * np.log10(g_on / max(g_off, 1e-300))
    assert gap_db >= 10.0
    _report(9, f"(reconstruction {100 * worst:.2f}%, gap {gap_db:.1f} dB)")
