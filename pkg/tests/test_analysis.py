"""Steady-state theory: weighting functions, bounds, equivalent filters."""
import numpy as np
import pytest

from dbmt import (StateSpaceModel, alpha_for_unit_kappa, compute_dpss,
                  equivalent_filters, flat_spectrum_gamma, kappa_bounds,
                  kappa_mu, smooth, theorem_bounds, theory_curves)
from dbmt.analysis import kappa_mu_brute
from dbmt.lgss import observation_matrix


def test_flat_spectrum_riccati_is_fixed_point():
    for alpha in (0.0, 0.3, 0.9, 0.999):
        for qt in (1e-3, 0.1, 10.0, 1e3):
            for W in (1, 30, 300):
                z, g, eta = flat_spectrum_gamma(alpha, qt, W)
                # z = alpha^2 / (1/z + W) + qt and eta = z/(1 + W z)
                assert abs(alpha ** 2 / (1.0 / z + W) + qt - z) < 1e-10 * z
                assert abs(eta - z / (1.0 + W * z)) < 1e-15
                assert 0.0 <= g < 1.0
                if alpha > 0:
                    # stable form equals the textbook form when it is safe
                    assert abs(g - (1.0 - qt / z) / alpha) < 1e-6 * max(g, 1e-12)


def test_kappa_mu_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(40):
        alpha = rng.uniform(0.05, 0.99)
        gamma = rng.uniform(0.01, alpha)  # gamma < alpha by construction
        N = int(rng.integers(3, 60))
        n = int(rng.integers(1, N + 1))
        k1, m1 = kappa_mu(gamma, alpha, n, N)
        k2, m2 = kappa_mu_brute(gamma, alpha, n, N)
        assert abs(k1 - k2) < 1e-12 * max(1.0, abs(k2))
        assert abs(m1 - m2) < 1e-12 * max(1.0, abs(m2))


def test_kappa_within_closed_form_bounds():
    # 9 x 9 grid of (alpha, gamma) pairs
    alphas = np.linspace(0.1, 0.9, 9)
    gammas = np.linspace(0.05, 0.85, 9)
    N, n = 100, 50
    for a in alphas:
        for g in gammas:
            if g >= a:
                continue
            k, _ = kappa_mu(g, a, n, N)
            lo, hi = kappa_bounds(g, a, n, N)
            assert lo - 1e-12 <= k <= hi + 1e-12


def test_mu_below_one_and_increasing_in_alpha():
    N, n, qt, W = 100, 50, 10.0, 1
    mus = []
    for a in np.linspace(0.01, 0.99, 25):
        _, g, _ = flat_spectrum_gamma(a, qt, W)
        _, m = kappa_mu(g, a, n, N)
        mus.append(m)
    mus = np.asarray(mus)
    assert np.all(mus <= 1.0 + 1e-12)
    # at fixed q/sigma2 a larger alpha widens the steady kernel, raising
    # the retained noise weight
    assert np.all(np.diff(mus) > 0)


def test_alpha_star_decreasing_in_snr():
    N, n, W = 100, 50, 1
    stars = []
    for qt in np.geomspace(0.1, 100.0, 10):
        a, flag = alpha_for_unit_kappa(qt, n, N, W)
        assert flag == ""
        _, g, _ = flat_spectrum_gamma(a, qt, W)
        k, _ = kappa_mu(g, a, n, N)
        assert abs(k - 1.0) < 1e-6
        stars.append(a)
    assert np.all(np.diff(stars) < 0)


def test_theorem_bounds_values_and_validation():
    lam = np.array([0.999, 0.99, 0.9])
    bias, var = theorem_bounds(D=2.0, sigma2=0.5, lam=lam, kappa=0.9,
                               mu=0.3, K=3)
    ref_bias = (1 - lam.mean()) * 0.9 * 2.0 + 0.1 * 2.0 + 0.3 * 0.5
    ref_var = (2.0 / 3.0) * (0.9 * 2.0 + 0.3 * 0.5) ** 2
    assert abs(bias - ref_bias) < 1e-12
    assert abs(var - ref_var) < 1e-12
    with pytest.raises(ValueError):
        theorem_bounds(D=-1.0, sigma2=0.5, lam=lam, kappa=1.0, mu=0.3, K=3)


def test_theory_curves_container():
    tc = theory_curves(0.9, 10.0, 1, 100, 50)
    assert tc.kappa_lo - 1e-12 <= tc.kappa <= tc.kappa_hi + 1e-12
    assert 0 < tc.gamma < 1
    assert tc.mu <= 1.0 + 1e-12


def test_equivalent_filters_reproduce_smoother():
    # applying the steady-state filters to a long record must match the
    # exact smoother at an interior window
    rng = np.random.default_rng(5)
    W, J, N, n = 8, 4, 40, 20
    model = StateSpaceModel(alpha=0.9, q=np.full(J, 0.7), sigma2=1.0, W=W, J=J)
    taps = compute_dpss(W, 2.0 / W, 3)
    y = rng.standard_normal((N, W)) + 1j * rng.standard_normal((N, W))
    filt = equivalent_filters(model, taps, n, N)
    assert filt.shape == (3, J, N * W)
    est = filt @ y.reshape(N * W)  # the filters act on the raw record
    for k in range(3):
        res = smooth(model, y * taps.u[k][None, :])
        ref = res.xs[n - 1]
        assert np.max(np.abs(est[k] - ref)) < 0.02 * np.max(np.abs(ref))


def test_equivalent_filters_require_divisible_grid():
    model = StateSpaceModel(alpha=0.5, q=np.ones(3), sigma2=1.0, W=7, J=3)
    taps = compute_dpss(7, 1.5 / 7, 2)
    with pytest.raises(ValueError):
        equivalent_filters(model, taps, 2, 5)


def test_flat_spectrum_gamma_validation():
    with pytest.raises(ValueError):
        flat_spectrum_gamma(1.0, 1.0, 1)
    with pytest.raises(ValueError):
        flat_spectrum_gamma(0.5, 0.0, 1)
    with pytest.raises(ValueError):
        flat_spectrum_gamma(0.5, 1.0, 0)
