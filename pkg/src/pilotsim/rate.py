"""Data-phase evaluation: eigendirection precoders, effective-noise covariance
and the Monte Carlo sum-rate lower bound.

Each UE transmits L data streams through F = sqrt(1/L) * (top-L eigenvectors
of Hhat^H Hhat), with equal power per stream.  The receiver treats the
estimation error as extra Gaussian noise with covariance
R_zeff = sigma_z^2 I + sum_k E[Herr_k R_x_k Herr_k^H], evaluated exactly from
the factored error covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pilotsim.channel import ChannelStats, draw_scaled_gains
from pilotsim.linalg import NumericalError, hermitian_evd
from pilotsim.pilot import ErrorCovariance, PathSpaceEstimator, PilotScheme, \
    combine_batch, error_cov_closed_form, simulate_uncombined_batch


@dataclass(frozen=True)
class DataPhaseConfig:
    """Data-phase parameters for one coherence block."""

    rho_d: float
    t_d: int
    t_c: int
    sigma_z_sq: float
    l_streams: int

    def __post_init__(self):
        if self.t_d < 1 or self.t_d > self.t_c:
            raise ValueError(f"need 1 <= T_d <= T_c, got T_d={self.t_d}, T_c={self.t_c}")
        if self.rho_d < 0:
            raise ValueError(f"rho_d must be nonnegative, got {self.rho_d}")
        if self.sigma_z_sq <= 0:
            raise ValueError(f"sigma_z_sq must be positive, got {self.sigma_z_sq}")


@dataclass(frozen=True)
class RateResult:
    """Sum spectral efficiency estimate in bits per channel use."""

    spectral_efficiency: float
    trials: int
    std_error: float


def data_precoder(estimate: np.ndarray, l_streams: int) -> np.ndarray:
    """Equal-power eigendirection precoder F with F^H F = (1/L) I.

    The columns are the top-L eigenvectors of Hhat^H Hhat.  When the estimate
    is rank deficient the trailing eigenvectors of the (Hermitian) Gram still
    form an orthonormal complement, so F always has L orthogonal columns.
    """
    estimate = np.asarray(estimate, dtype=np.complex128)
    n = estimate.shape[1]
    if n < l_streams:
        raise ValueError(f"need N >= L, got N={n}, L={l_streams}")
    gram = estimate.conj().T @ estimate
    _, vecs = hermitian_evd(gram)
    return np.sqrt(1.0 / l_streams) * vecs[:, :l_streams]


def transmit_covariance(precoder: np.ndarray, rho_d: float, t_d: int) -> np.ndarray:
    """Per-symbol transmit covariance (rho_d / T_d) F F^H."""
    return (rho_d / t_d) * (precoder @ precoder.conj().T)


def expected_error_quadratic(error_cov: ErrorCovariance, a: np.ndarray) -> np.ndarray:
    """E[Herr A Herr^H] for the factored error covariance, an M x M matrix.

    With R_err = (conj(U) kr B) S (conj(U) kr B)^H the expectation contracts
    to B (S o (U^H A U)) B^H; no MN-sized object is formed.
    """
    stats = error_cov.stats
    t = stats.U.conj().T @ a @ stats.U
    return stats.B @ (error_cov.inner * t) @ stats.B.conj().T


def expected_error_quadratic_dense(r_dense: np.ndarray, a: np.ndarray,
                                   m: int, n: int) -> np.ndarray:
    """Reference block contraction sum_ij A[i,j] * Block_ij(R_err).

    Dense MN x MN input with column-stacking block layout; small instances
    only (test oracle for :func:`expected_error_quadratic`).
    """
    out = np.zeros((m, m), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            out += a[i, j] * r_dense[i * m:(i + 1) * m, j * m:(j + 1) * m]
    return out


def zeff_covariance(error_covs: list[ErrorCovariance], precoders: list[np.ndarray],
                    rho_d: float, t_d: int, sigma_z_sq: float) -> np.ndarray:
    """Effective noise covariance sigma_z^2 I + sum_k E[Herr_k R_x_k Herr_k^H]."""
    m = error_covs[0].stats.m
    out = sigma_z_sq * np.eye(m, dtype=np.complex128)
    for cov, f in zip(error_covs, precoders):
        out += expected_error_quadratic(cov, transmit_covariance(f, rho_d, t_d))
    return (out + out.conj().T) / 2


def _batched_chol_logdet(mats: np.ndarray) -> np.ndarray:
    """log det for a batch of Hermitian PD matrices via Cholesky."""
    try:
        chol = np.linalg.cholesky(mats)
    except np.linalg.LinAlgError:
        raise NumericalError("effective noise covariance is not positive definite") from None
    diag = np.real(np.einsum("...ii->...i", chol))
    return 2.0 * np.sum(np.log(diag), axis=-1)


def sum_rate_mc(scheme: PilotScheme, stats: list[ChannelStats], config: DataPhaseConfig,
                n_draws: int, rng: np.random.Generator,
                batch: int = 256) -> RateResult:
    """Monte Carlo sum-rate lower bound in bits per channel use.

    Per realization: draw channels and pilot noise, form MMSE estimates,
    build per-UE eigendirection precoders, then evaluate
    (T_d/T_c) log2 det(I + R_zeff^{-1} sum_k Hhat_k R_x_k Hhat_k^H) with
    R_zeff from the closed-form error covariances and that realization's
    precoders.
    """
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    k_ues = len(stats)
    m = stats[0].m
    l = config.l_streams
    if config.rho_d == 0 or scheme.rho_tau == 0:
        # no data energy, or no pilot energy (estimates collapse to the prior
        # mean zero and carry no information): the bound is exactly zero
        return RateResult(0.0, n_draws, 0.0)

    estimators = [PathSpaceEstimator(scheme, stats, k, config.sigma_z_sq)
                  for k in range(k_ues)]
    err_inner = [error_cov_closed_form(
        scheme.scenario, stats[k], scheme.rho_tau, config.sigma_z_sq,
        t_tau=scheme.t_tau, all_stats=stats, ue_index=k) for k in range(k_ues)]
    stream_scale = config.rho_d / (config.t_d * l)

    rates = np.empty(n_draws)
    done = 0
    while done < n_draws:
        nb = min(batch, n_draws - done)
        gains = [draw_scaled_gains(s, nb, rng) for s in stats]
        received = simulate_uncombined_batch(scheme, stats, gains,
                                             config.sigma_z_sq, rng)
        weights = []
        for k in range(k_ues):
            y = combine_batch(scheme, stats, received, k)
            weights.append(estimators[k].path_gains(y))

        signal = np.zeros((nb, m, m), dtype=np.complex128)
        zeff = np.broadcast_to(
            config.sigma_z_sq * np.eye(m, dtype=np.complex128), (nb, m, m)).copy()
        for k, s in enumerate(stats):
            w = weights[k]
            # Gram of the estimate in UE space: U (wbar o R_B o w) U^H
            inner = np.einsum("bl,lm,bm->blm", w.conj(), s.r_b, w, optimize=True)
            gram_n = np.einsum("nl,blm,pm->bnp", s.U, inner, s.U.conj(), optimize=True)
            gram_n = (gram_n + np.conj(np.swapaxes(gram_n, -1, -2))) / 2
            _, evecs = np.linalg.eigh(gram_n)
            e_top = evecs[..., -l:]  # (nb, N, L) dominant eigendirections
            proj = np.einsum("ln,bnm->blm", s.U.conj().T, e_top, optimize=True)
            h_e = np.einsum("ml,bl,blp->bmp", s.B, w, proj, optimize=True)  # Hhat E
            signal += stream_scale * np.einsum(
                "bmp,bnp->bmn", h_e, h_e.conj(), optimize=True)
            # E[Herr R_x Herr^H] = B (S o (U^H R_x U)) B^H with
            # U^H R_x U = stream_scale * proj proj^H
            t_mat = stream_scale * np.einsum(
                "blp,bmp->blm", proj, proj.conj(), optimize=True)
            zeff += np.einsum("ql,blm,nm->bqn", s.B,
                              err_inner[k].inner[None, :, :] * t_mat, s.B.conj(),
                              optimize=True)
        zeff = (zeff + np.conj(np.swapaxes(zeff, -1, -2))) / 2
        signal = (signal + np.conj(np.swapaxes(signal, -1, -2))) / 2
        logdet = _batched_chol_logdet(zeff + signal) - _batched_chol_logdet(zeff)
        rates[done:done + nb] = (config.t_d / config.t_c) * logdet / np.log(2)
        done += nb

    mean = float(np.mean(rates))
    stderr = float(np.std(rates, ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else 0.0
    return RateResult(max(mean, 0.0), n_draws, stderr)


def asymptotic_rate_bound(k_ues: int, sigma_sq_list, config: DataPhaseConfig) -> float:
    """Large-M,N sum-rate limit (L T_d / T_c) log2(1 + rho_d sum sigma^2 / (T_d L sigma_z^2))."""
    total = float(np.sum(np.asarray(sigma_sq_list, dtype=float)[:k_ues]))
    snr = config.rho_d * total / (config.t_d * config.l_streams * config.sigma_z_sq)
    return (config.l_streams * config.t_d / config.t_c) * np.log2(1 + snr)
