"""Unit tests for the data-phase precoders and sum-rate evaluation."""

import numpy as np
import pytest

from pilotsim import channel, pilot, rate
from tests.helpers import crandn, random_stats


def make_cell(rng, m, n, l, k_ues):
    return [random_stats(rng, m, n, l) for _ in range(k_ues)]


def test_data_phase_config_validation():
    with pytest.raises(ValueError):
        rate.DataPhaseConfig(rho_d=1.0, t_d=0, t_c=8, sigma_z_sq=1.0, l_streams=2)
    with pytest.raises(ValueError):
        rate.DataPhaseConfig(rho_d=1.0, t_d=9, t_c=8, sigma_z_sq=1.0, l_streams=2)
    with pytest.raises(ValueError):
        rate.DataPhaseConfig(rho_d=-1.0, t_d=4, t_c=8, sigma_z_sq=1.0, l_streams=2)
    with pytest.raises(ValueError):
        rate.DataPhaseConfig(rho_d=1.0, t_d=4, t_c=8, sigma_z_sq=0.0, l_streams=2)


def test_data_precoder_orthonormal_scaled():
    rng = np.random.default_rng(0)
    h = crandn(rng, 8, 6)
    f = rate.data_precoder(h, 3)
    assert f.shape == (6, 3)
    np.testing.assert_allclose(f.conj().T @ f, np.eye(3) / 3, atol=1e-12)
    with pytest.raises(ValueError):
        rate.data_precoder(h, 7)


def test_data_precoder_spans_dominant_subspace():
    rng = np.random.default_rng(1)
    stats = random_stats(rng, 8, 6, 2)
    g = channel.draw_scaled_gains(stats, 1, rng)[0]
    h = (stats.B * g) @ stats.U.conj().T
    f = rate.data_precoder(h, 2)
    # the top-2 eigenspace of H^H H is the span of U; F must live in it
    proj = stats.U @ np.linalg.pinv(stats.U)
    np.testing.assert_allclose(proj @ f, f, atol=1e-8)


def test_data_precoder_rank_deficient_estimate():
    f = rate.data_precoder(np.zeros((4, 3)), 2)
    np.testing.assert_allclose(f.conj().T @ f, np.eye(2) / 2, atol=1e-12)


def test_transmit_covariance_power():
    rng = np.random.default_rng(2)
    f = rate.data_precoder(crandn(rng, 5, 4), 2)
    rx = rate.transmit_covariance(f, rho_d=3.0, t_d=6)
    # per-symbol transmit energy rho_d / T_d
    assert np.trace(rx).real == pytest.approx(3.0 / 6)
    np.testing.assert_allclose(rx, rx.conj().T, atol=1e-14)


def test_expected_error_quadratic_matches_dense_blocks():
    rng = np.random.default_rng(3)
    m, n, l = 4, 3, 2
    stats = make_cell(rng, m, n, l, 1)
    cov = pilot.error_cov_closed_form(pilot.NPUC, stats[0], 1.0, 0.5)
    a = crandn(rng, n, n)
    a = a @ a.conj().T
    fast = rate.expected_error_quadratic(cov, a)
    dense = rate.expected_error_quadratic_dense(cov.to_dense(), a, m, n)
    np.testing.assert_allclose(fast, dense, atol=1e-10)
    # and the trace specializes to tr(R_err (A^T kron I))
    full = cov.to_dense() @ np.kron(a.T, np.eye(m))
    assert np.trace(fast).real == pytest.approx(np.trace(full).real, abs=1e-10)


def test_zeff_covariance_hermitian_pd():
    rng = np.random.default_rng(4)
    stats = make_cell(rng, 5, 4, 2, 2)
    covs = [pilot.error_cov_closed_form(pilot.NPUC, s, 1.0, 1.0) for s in stats]
    precoders = [rate.data_precoder(crandn(rng, 5, 4), 2) for _ in range(2)]
    z = rate.zeff_covariance(covs, precoders, rho_d=2.0, t_d=8, sigma_z_sq=0.3)
    np.testing.assert_allclose(z, z.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(z).min() >= 0.3 - 1e-10


def test_batched_chol_logdet():
    rng = np.random.default_rng(5)
    mats = np.stack([np.eye(4) + 0.1 * (lambda x: x @ x.conj().T)(crandn(rng, 4, 4))
                     for _ in range(6)])
    got = rate._batched_chol_logdet(mats)
    want = np.array([np.linalg.slogdet(m)[1] for m in mats])
    np.testing.assert_allclose(got, want, atol=1e-10)


def default_config(t_tau, t_c=32, rho_d=4.0, l_streams=2):
    return rate.DataPhaseConfig(rho_d=rho_d, t_d=t_c - t_tau, t_c=t_c,
                                sigma_z_sq=1.0, l_streams=l_streams)


def test_sum_rate_zero_endpoints():
    rng = np.random.default_rng(6)
    stats = make_cell(rng, 6, 4, 2, 2)
    scheme = pilot.build_scheme(pilot.PUC, 2, 4, 2, None, 1.0, stats=stats)
    cfg = default_config(scheme.t_tau, rho_d=0.0)
    assert rate.sum_rate_mc(scheme, stats, cfg, 10, rng).spectral_efficiency == 0.0
    scheme0 = pilot.build_scheme(pilot.PUC, 2, 4, 2, None, 0.0, stats=stats)
    cfg = default_config(scheme0.t_tau)
    assert rate.sum_rate_mc(scheme0, stats, cfg, 10, rng).spectral_efficiency == 0.0


def test_sum_rate_matches_unbatched_reference():
    rng = np.random.default_rng(7)
    m, n, l, k_ues = 8, 6, 2, 2
    stats = make_cell(rng, m, n, l, k_ues)
    scheme = pilot.build_scheme(pilot.PUC, k_ues, n, l, None, 2.0, stats=stats)
    cfg = default_config(scheme.t_tau)
    covs = [pilot.error_cov_closed_form(pilot.PUC, s, scheme.rho_tau,
                                        cfg.sigma_z_sq) for s in stats]
    ests = [pilot.PathSpaceEstimator(scheme, stats, k, cfg.sigma_z_sq)
            for k in range(k_ues)]

    def reference(n_draws, rng):
        vals = []
        for _ in range(n_draws):
            gains = [channel.draw_scaled_gains(s, 1, rng) for s in stats]
            total = np.zeros((m, m), dtype=complex)
            zeff = cfg.sigma_z_sq * np.eye(m, dtype=complex)
            for k, s in enumerate(stats):
                y = pilot.simulate_received_batch(scheme, stats, gains,
                                                  cfg.sigma_z_sq, rng, k)
                w = ests[k].path_gains(y)[0]
                h_hat = pilot.estimate_from_gains(s, w)
                f = rate.data_precoder(h_hat, cfg.l_streams)
                rx = rate.transmit_covariance(f, cfg.rho_d, cfg.t_d)
                total += h_hat @ rx @ h_hat.conj().T
                zeff += rate.expected_error_quadratic(covs[k], rx)
            sign, ld1 = np.linalg.slogdet(zeff + total)
            _, ld0 = np.linalg.slogdet(zeff)
            assert sign.real > 0
            vals.append(cfg.t_d / cfg.t_c * (ld1 - ld0) / np.log(2))
        return float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(len(vals)))

    got = rate.sum_rate_mc(scheme, stats, cfg, 3000,
                           np.random.default_rng(100)).spectral_efficiency
    want, stderr = reference(1500, np.random.default_rng(200))
    assert got == pytest.approx(want, abs=5 * stderr)


def test_sum_rate_increases_with_data_energy():
    rng = np.random.default_rng(8)
    stats = make_cell(rng, 6, 4, 2, 1)
    scheme = pilot.build_scheme(pilot.PUC, 1, 4, 2, None, 2.0, stats=stats)
    values = []
    for rho_d in (0.5, 2.0, 8.0):
        cfg = default_config(scheme.t_tau, rho_d=rho_d)
        values.append(rate.sum_rate_mc(scheme, stats, cfg, 400,
                                       np.random.default_rng(9)).spectral_efficiency)
    assert values[0] < values[1] < values[2]


def test_sum_rate_result_fields():
    rng = np.random.default_rng(10)
    stats = make_cell(rng, 4, 3, 2, 1)
    scheme = pilot.build_scheme(pilot.NPUC, 1, 3, 2, None, 1.0)
    cfg = default_config(scheme.t_tau, t_c=8)
    res = rate.sum_rate_mc(scheme, stats, cfg, 32, rng)
    assert res.trials == 32
    assert res.spectral_efficiency >= 0
    assert res.std_error > 0
    with pytest.raises(ValueError):
        rate.sum_rate_mc(scheme, stats, cfg, 0, rng)


def test_asymptotic_rate_bound_value():
    cfg = rate.DataPhaseConfig(rho_d=8.0, t_d=16, t_c=32, sigma_z_sq=0.5,
                               l_streams=2)
    want = 2 * 16 / 32 * np.log2(1 + 8.0 * 3.0 / (16 * 2 * 0.5))
    assert rate.asymptotic_rate_bound(2, [1.0, 2.0, 5.0], cfg) == pytest.approx(want)
