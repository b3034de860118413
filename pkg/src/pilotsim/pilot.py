"""Pilot schemes, MMSE channel estimation, error covariances and NMSE bounds.

Three uplink pilot transmission scenarios are supported:

* ``nPuC`` -- non-precoded, uncombined: V_k = I_N, W_k = I_M, T_tau = K*N.
* ``PuC``  -- precoded, uncombined: V_k = U_k, W_k = I_M, T_tau = K*L.
* ``PC``   -- precoded and combined: V_k = U_k, W_k = B_k, 1 <= T_tau <= L,
  with every UE transmitting the identical pilot block.

The channel prior has the factored covariance c * A A^H with
A = conj(U) (columnwise kron) B and c = delta*M*sigma^2, so every MMSE
estimate lives in the L-dimensional column space of A.  All estimators below
therefore solve systems of size L (nPuC/PuC) or T_tau*L (PC) and return path
coefficients w with Hhat = B diag(w) U^H; M*N-sized objects are never formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pilotsim.channel import ChannelRealization, ChannelStats, complex_normal, draw_scaled_gains
from pilotsim.linalg import NumericalError, hadamard, khatri_rao, kronecker, solve_hermitian_pd

NPUC = "nPuC"
PUC = "PuC"
PC = "PC"
SCENARIOS = (NPUC, PUC, PC)

# MMSE systems are kept PD by flooring the noise variance
SIGMA_Z_SQ_MIN = 1e-12

UPLINK = "UL"
DOWNLINK = "DL"
REGIME_FINITE = "finite-finite"
REGIME_N_INF = "N-inf"
REGIME_M_INF = "M-inf"
REGIME_BOTH_INF = "both-inf"


def zeta(stats: ChannelStats, rho_tau: float, sigma_z_sq: float) -> float:
    """Per-path pilot SNR rho_tau * sigma^2 / (L * sigma_z^2)."""
    return rho_tau * stats.sigma_sq / (stats.num_paths * sigma_z_sq)


def dft_matrix(t: int) -> np.ndarray:
    """Unitary DFT matrix of size t (rows are orthonormal sequences)."""
    j, k = np.meshgrid(np.arange(t), np.arange(t), indexing="ij")
    return np.exp(-2j * np.pi * j * k / t) / np.sqrt(t)


def shared_pc_pilot(l_paths: int, t_tau: int, rho_tau: float) -> np.ndarray:
    """L x T_tau pilot block shared by all UEs in the PC scenario.

    Row l carries DFT row (l mod T_tau), scaled so tr(P P^H) = rho_tau.  For
    T_tau = L this is sqrt(rho/L) times a unitary matrix; for T_tau = 1 all
    rows are equal.
    """
    if not 1 <= t_tau <= l_paths:
        raise ValueError(f"PC requires 1 <= T_tau <= L, got T_tau={t_tau}, L={l_paths}")
    f = dft_matrix(t_tau)
    rows = f[np.arange(l_paths) % t_tau]
    return np.sqrt(rho_tau / l_paths) * rows


@dataclass(frozen=True)
class PilotScheme:
    """Scenario tag plus per-UE pilot/precoder/combiner matrices.

    precoders / combiners entries of None denote identity matrices (I_N at
    the UE, I_M at the BS); this keeps nPuC schemes independent of M.
    """

    scenario: str
    t_tau: int
    rho_tau: float
    pilots: tuple
    precoders: tuple
    combiners: tuple

    @property
    def num_ues(self) -> int:
        return len(self.pilots)

    def precoded_pilot(self, j: int) -> np.ndarray:
        """V_j P_j as an N x T_tau matrix."""
        p = self.pilots[j]
        v = self.precoders[j]
        return p if v is None else v @ p

    def combiner_or_eye(self, k: int, m_bs: int) -> np.ndarray:
        w = self.combiners[k]
        return np.eye(m_bs, dtype=np.complex128) if w is None else w


def build_scheme(scenario: str, k_ues: int, n_ue: int, l_paths: int,
                 t_tau: int | None, rho_tau: float,
                 stats: list[ChannelStats] | None = None) -> PilotScheme:
    """Construct the pilot matrices for one scenario.

    Orthogonal pilots (nPuC, PuC) are rows of a scaled unitary DFT matrix
    partitioned among UEs; PC pilots come from :func:`shared_pc_pilot`.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    if rho_tau < 0:
        raise ValueError(f"rho_tau must be nonnegative, got {rho_tau}")

    if scenario == NPUC:
        required = k_ues * n_ue
        if t_tau is None:
            t_tau = required
        if t_tau != required:
            raise ValueError(
                f"nPuC needs T_tau = K*N = {required} for orthogonal pilots, got {t_tau}"
            )
        f = dft_matrix(t_tau)
        pilots = tuple(
            np.sqrt(rho_tau / n_ue) * f[k * n_ue:(k + 1) * n_ue] for k in range(k_ues)
        )
        precoders = (None,) * k_ues
        combiners = (None,) * k_ues
    elif scenario == PUC:
        required = k_ues * l_paths
        if t_tau is None:
            t_tau = required
        if t_tau != required:
            raise ValueError(
                f"PuC needs T_tau = K*L = {required} for orthogonal pilots, got {t_tau}"
            )
        if stats is None or len(stats) != k_ues:
            raise ValueError("PuC needs per-UE second-order statistics for precoders")
        f = dft_matrix(t_tau)
        pilots = tuple(
            np.sqrt(rho_tau / l_paths) * f[k * l_paths:(k + 1) * l_paths]
            for k in range(k_ues)
        )
        precoders = tuple(s.U for s in stats)
        combiners = (None,) * k_ues
    else:  # PC
        if t_tau is None:
            t_tau = 1
        if stats is None or len(stats) != k_ues:
            raise ValueError("PC needs per-UE second-order statistics for precoders/combiners")
        shared = shared_pc_pilot(l_paths, t_tau, rho_tau)
        pilots = (shared,) * k_ues
        precoders = tuple(s.U for s in stats)
        combiners = tuple(s.B for s in stats)

    return PilotScheme(scenario=scenario, t_tau=t_tau, rho_tau=rho_tau,
                       pilots=pilots, precoders=precoders, combiners=combiners)


def receive(scheme: PilotScheme, channels: list[ChannelRealization],
            sigma_z_sq: float, rng: np.random.Generator) -> list[np.ndarray]:
    """Simulate one pilot block: Y_k = W_k^H (sum_j H_j V_j P_j + Z).

    The additive noise block Z is common to all UEs' combiner outputs, as in
    a single physical reception.
    """
    m_bs = channels[0].H.shape[0]
    signal = np.zeros((m_bs, scheme.t_tau), dtype=np.complex128)
    for j, ch in enumerate(channels):
        signal = signal + ch.H @ scheme.precoded_pilot(j)
    noisy = signal + complex_normal(rng, (m_bs, scheme.t_tau), sigma_z_sq)
    out = []
    for k in range(scheme.num_ues):
        w = scheme.combiners[k]
        out.append(noisy.copy() if w is None else w.conj().T @ noisy)
    return out


def effective_pilot(scheme: PilotScheme, k: int, j: int, m_bs: int) -> np.ndarray:
    """Effective pilot matrix with vec(Y_k) = sum_j Pbrev_kj^H vec(H_j) + noise.

    Pbrev_kj = conj(V_j P_j) kron W_k.  Intended for small instances (tests,
    dense oracles); large-scale code paths never materialize it.
    """
    vp = scheme.precoded_pilot(j)
    w = scheme.combiner_or_eye(k, m_bs)
    return kronecker(vp.conj(), w)


def _pc_cross_factors(scheme: PilotScheme, stats: list[ChannelStats], k: int) -> list[np.ndarray]:
    """C_j = Pbrev_kj^H A_j for the PC scenario, each (T_tau*L) x L.

    Uses the Khatri-Rao push-through identity so only path-Gram products
    appear: C_j = ((U_j P_j)^T conj(U_j)) columnwise-kron (B_k^H B_j).
    """
    b_k = stats[k].B
    out = []
    for j in range(scheme.num_ues):
        vp = scheme.precoded_pilot(j)  # U_j P_j
        top = vp.T @ stats[j].U.conj()  # T_tau x L
        bottom = b_k.conj().T @ stats[j].B  # L x L
        out.append(khatri_rao(top, bottom))
    return out


def _pc_system(scheme: PilotScheme, stats: list[ChannelStats], k: int,
               sigma_z_sq: float) -> tuple[np.ndarray, list[np.ndarray]]:
    """Observation covariance D = Q_k + Qbar_k of vec(Y_k) plus the C_j factors."""
    factors = _pc_cross_factors(scheme, stats, k)
    t = scheme.t_tau
    l_paths = stats[k].num_paths
    d = sigma_z_sq * kronecker(np.eye(t), stats[k].r_b)
    for j, c_j in enumerate(factors):
        d = d + stats[j].cov_scale * (c_j @ c_j.conj().T)
    return d, factors


def interference_covariances(scheme: PilotScheme, stats: list[ChannelStats], k: int,
                             sigma_z_sq: float) -> tuple[np.ndarray, np.ndarray]:
    """(Q_k, Qbar_k): own-signal-plus-noise and inter-UE interference covariances.

    Only defined for the PC scenario, where pilots are reused across UEs.
    Both are Hermitian PSD of size T_tau*L.
    """
    if scheme.scenario != PC:
        raise ValueError(f"interference covariances are PC-only, got {scheme.scenario}")
    factors = _pc_cross_factors(scheme, stats, k)
    q = stats[k].cov_scale * (factors[k] @ factors[k].conj().T) \
        + sigma_z_sq * kronecker(np.eye(scheme.t_tau), stats[k].r_b)
    qbar = np.zeros_like(q)
    for j, c_j in enumerate(factors):
        if j != k:
            qbar = qbar + stats[j].cov_scale * (c_j @ c_j.conj().T)
    return q, qbar


class PathSpaceEstimator:
    """Per-UE MMSE estimator reduced to path space.

    Precomputes the (at most T_tau*L sized) system so that batches of
    received blocks map to batches of path coefficients w, with the estimate
    Hhat = B diag(w) U^H.
    """

    def __init__(self, scheme: PilotScheme, stats: list[ChannelStats], k: int,
                 sigma_z_sq: float):
        if sigma_z_sq < SIGMA_Z_SQ_MIN:
            sigma_z_sq = SIGMA_Z_SQ_MIN
        self.scheme = scheme
        self.stats_k = stats[k]
        self.k = k
        self.sigma_z_sq = sigma_z_sq
        c = self.stats_k.cov_scale
        l_paths = self.stats_k.num_paths
        if scheme.scenario in (NPUC, PUC):
            vp = scheme.precoded_pilot(k)  # N x T_tau
            self._vp_h = vp.conj().T
            # Gram of the effective pilot in path space; orthogonality across
            # UEs makes the single-UE system exact
            top = vp.T @ self.stats_k.U.conj()
            gram = hadamard(top.conj().T @ top, self.stats_k.r_b)
            self._system = c * gram + sigma_z_sq * np.eye(l_paths)
        else:
            d, factors = _pc_system(scheme, stats, k, sigma_z_sq)
            self._system = d
            self._c_k_conj = factors[k].conj()
        # certify the system once; reused for every batch
        solve_hermitian_pd(self._system, np.eye(self._system.shape[0]))

    def path_gains(self, y) -> np.ndarray:
        """Map received blocks (..., rows, T_tau) to path coefficients (..., L)."""
        y = np.asarray(y, dtype=np.complex128)
        c = self.stats_k.cov_scale
        if self.scheme.scenario in (NPUC, PUC):
            projected = y @ self._vp_h  # (..., M, N)
            q = np.einsum("ml,...mn,nl->...l", self.stats_k.B.conj(), projected,
                          self.stats_k.U, optimize=True)
            rhs = q.reshape(-1, q.shape[-1]).T
            w = c * np.linalg.solve(self._system, rhs).T
            return w.reshape(q.shape)
        # PC: vectorize each L x T_tau block column-wise
        yv = np.swapaxes(y, -1, -2).reshape(*y.shape[:-2], -1)
        sol = np.linalg.solve(self._system, yv.reshape(-1, yv.shape[-1]).T).T
        w = c * (sol @ self._c_k_conj)
        return w.reshape(*y.shape[:-2], -1)


def estimate_from_gains(stats: ChannelStats, w: np.ndarray) -> np.ndarray:
    """Assemble Hhat = B diag(w) U^H from path coefficients."""
    return (stats.B * w) @ stats.U.conj().T


def mmse_estimate(scheme: PilotScheme, stats: list[ChannelStats], received: np.ndarray,
                  sigma_z_sq: float, k: int) -> np.ndarray:
    """MMSE estimate of UE k's channel from its received pilot block."""
    est = PathSpaceEstimator(scheme, stats, k, sigma_z_sq)
    w = est.path_gains(received)
    return estimate_from_gains(stats[k], w)


@dataclass(frozen=True)
class ErrorCovariance:
    """Estimation-error covariance in factored form R_err = A inner A^H.

    A is the Khatri-Rao covariance factor of the UE (MN x L) and inner is a
    small L x L Hermitian PSD matrix, so traces and quadratic forms never
    touch MN-sized matrices.
    """

    stats: ChannelStats
    inner: np.ndarray  # L x L

    def to_dense(self) -> np.ndarray:
        a = khatri_rao(self.stats.U.conj(), self.stats.B)
        return a @ self.inner @ a.conj().T

    def trace(self) -> float:
        gram = hadamard(self.stats.r_u.T, self.stats.r_b)  # A^H A
        return max(float(np.real(np.trace(self.inner @ gram))), 0.0)


def error_cov_closed_form(scenario: str, stats_k: ChannelStats, rho_tau: float,
                          sigma_z_sq: float, t_tau: int | None = None,
                          all_stats: list[ChannelStats] | None = None,
                          ue_index: int = 0) -> ErrorCovariance:
    """Closed-form error covariance for one UE.

    nPuC/PuC use the orthogonal-pilot closed forms
    c * (I + coef * (R_U^p)^T o R_B)^{-1} with (coef, p) = (M zeta, 1) or
    (delta M zeta, 2).  PC subtracts the estimator gain against the full
    interference-plus-noise covariance of the shared-pilot observation.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    sigma_z_sq = max(sigma_z_sq, SIGMA_Z_SQ_MIN)
    c = stats_k.cov_scale
    l_paths = stats_k.num_paths
    z = zeta(stats_k, rho_tau, sigma_z_sq)
    eye = np.eye(l_paths)

    if scenario == NPUC:
        system = eye + stats_k.m * z * hadamard(stats_k.r_u.T, stats_k.r_b)
        inner = c * solve_hermitian_pd(system, eye)
    elif scenario == PUC:
        r_u = stats_k.r_u
        system = eye + stats_k.delta * stats_k.m * z * hadamard((r_u @ r_u).T, stats_k.r_b)
        inner = c * solve_hermitian_pd(system, eye)
    else:
        if all_stats is None:
            all_stats = [stats_k]
            ue_index = 0
        if t_tau is None:
            t_tau = 1
        scheme = build_scheme(PC, len(all_stats), stats_k.n, l_paths, t_tau,
                              rho_tau, stats=all_stats)
        d, factors = _pc_system(scheme, all_stats, ue_index, sigma_z_sq)
        c_k = factors[ue_index]
        inner = c * eye - c ** 2 * (c_k.conj().T @ solve_hermitian_pd(d, c_k))
    inner = (inner + inner.conj().T) / 2
    return ErrorCovariance(stats=stats_k, inner=inner)


def nmse(error_cov: ErrorCovariance) -> float:
    """Normalized MSE tr(R_err)/tr(R), clipped to [0, 1] at roundoff scale."""
    value = error_cov.trace() / error_cov.stats.trace_r
    return float(min(max(value, 0.0), 1.0))


def _bound_epsilon(system: np.ndarray) -> float:
    from pilotsim.linalg import condition_number

    kappa = condition_number(system)
    if not np.isfinite(kappa):
        return np.inf
    return (1 - kappa) ** 2 / (4 * kappa)


def nmse_bounds(scenario: str, stats_k: ChannelStats, rho_tau: float,
                sigma_z_sq: float) -> tuple[float, float]:
    """Closed-form NMSE bracket for the orthogonal-pilot scenarios.

    nPuC:  (1+Mz)^{-1} [1 - eps/(Mz)]+  <=  e  <=  (1+Mz)^{-1}
    PuC:   the same shape scaled by the extremal eigenvalues of R_U, with
           delta*M*z in place of M*z.
    """
    if scenario == PC:
        raise ValueError("no closed-form NMSE bounds for the PC scenario")
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    sigma_z_sq = max(sigma_z_sq, SIGMA_Z_SQ_MIN)
    z = zeta(stats_k, rho_tau, sigma_z_sq)
    l_paths = stats_k.num_paths
    eye = np.eye(l_paths)
    if scenario == NPUC:
        coef = stats_k.m * z
        system = eye + coef * hadamard(stats_k.r_u.T, stats_k.r_b)
        lo_scale = hi_scale = 1.0
    else:
        coef = stats_k.delta * stats_k.m * z
        r_u = stats_k.r_u
        system = eye + coef * hadamard((r_u @ r_u).T, stats_k.r_b)
        eig = np.linalg.eigvalsh((r_u + r_u.conj().T) / 2)
        lo_scale = 1.0 / eig[-1]
        hi_scale = np.inf if eig[0] <= 0 else 1.0 / eig[0]
    if coef <= 0:
        return 0.0, 1.0 if scenario == NPUC else min(hi_scale, 1.0) * 1.0
    eps = _bound_epsilon(system)
    slack = 0.0 if not np.isfinite(eps) else max(1.0 - eps / coef, 0.0)
    lower = lo_scale / (1 + coef) * slack
    upper = hi_scale / (1 + coef)
    return float(lower), float(upper)


def simulate_uncombined_batch(scheme: PilotScheme, stats: list[ChannelStats],
                              gains: list[np.ndarray], sigma_z_sq: float,
                              rng: np.random.Generator) -> np.ndarray:
    """Batched pre-combiner received blocks sum_j H_j V_j P_j + Z.

    gains[j] has shape (n_draws, L); output (n_draws, M, T_tau).  One physical
    reception per draw, shared by every UE's combiner.
    """
    n_draws = gains[0].shape[0]
    m_bs = stats[0].m
    t = scheme.t_tau
    y = np.zeros((n_draws, m_bs, t), dtype=np.complex128)
    for j, s in enumerate(stats):
        footprint = s.U.conj().T @ scheme.precoded_pilot(j)  # L x T
        y += np.einsum("ml,bl,lt->bmt", s.B, gains[j], footprint, optimize=True)
    y += complex_normal(rng, (n_draws, m_bs, t), sigma_z_sq)
    return y


def combine_batch(scheme: PilotScheme, stats: list[ChannelStats],
                  uncombined: np.ndarray, k: int) -> np.ndarray:
    """UE k's view of the shared reception: W_k^H applied to each block."""
    w_k = scheme.combiners[k]
    if w_k is None:
        return uncombined
    return np.einsum("mr,bmt->brt", w_k.conj(), uncombined, optimize=True)


def simulate_received_batch(scheme: PilotScheme, stats: list[ChannelStats],
                            gains: list[np.ndarray], sigma_z_sq: float,
                            rng: np.random.Generator, k: int) -> np.ndarray:
    """Batched received blocks for UE k given scaled path gains per UE.

    gains[j] has shape (n_draws, L); output (n_draws, rows, T_tau) where rows
    is M (no combiner) or L (PC combiner).
    """
    y = simulate_uncombined_batch(scheme, stats, gains, sigma_z_sq, rng)
    return combine_batch(scheme, stats, y, k)


def empirical_nmse(scheme: PilotScheme, stats: list[ChannelStats], n_draws: int,
                   sigma_z_sq: float, rng: np.random.Generator, k: int = 0) -> float:
    """Monte Carlo NMSE of UE k over fresh gain and noise draws."""
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    est = PathSpaceEstimator(scheme, stats, k, sigma_z_sq)
    # Frobenius norm of B diag(d) U^H through the path Gram
    gram = hadamard(stats[k].r_b, stats[k].r_u.T)
    # chunk the draws so the received blocks stay within a fixed memory budget
    batch = max(1, min(n_draws, (1 << 23) // max(stats[0].m * scheme.t_tau, 1)))
    total = 0.0
    done = 0
    while done < n_draws:
        nb = min(batch, n_draws - done)
        gains = [draw_scaled_gains(s, nb, rng) for s in stats]
        y = simulate_received_batch(scheme, stats, gains, sigma_z_sq, rng, k)
        w = est.path_gains(y)
        err = gains[k] - w
        sq = np.real(np.einsum("bl,lm,bm->b", err.conj(), gram, err, optimize=True))
        total += float(np.sum(sq))
        done += nb
    return total / (n_draws * stats[k].trace_r)


def gain_ratio_puc_over_npuc(stats_k: ChannelStats, rho_tau: float,
                             sigma_z_sq: float) -> float:
    """Large-N NMSE ratio e_PuC / e_nPuC = (1 + M zeta)/(1 + delta M zeta).

    At least 1/delta by the (1+a)/(1+b) >= a/b inequality for 0 < a <= b.
    """
    z = zeta(stats_k, rho_tau, max(sigma_z_sq, SIGMA_Z_SQ_MIN))
    mz = stats_k.m * z
    return (1 + mz) / (1 + stats_k.delta * mz)


# Minimum number of unique pilots needed network-wide, per scenario,
# link direction and asymptotic regime.
_PILOT_COUNT_TABLE = {
    (NPUC, UPLINK): {
        REGIME_FINITE: lambda k, n, m, l: k * n,
        REGIME_N_INF: lambda k, n, m, l: k * n,
        REGIME_M_INF: lambda k, n, m, l: k * n,
        REGIME_BOTH_INF: lambda k, n, m, l: k * n,
    },
    (PUC, UPLINK): {
        REGIME_FINITE: lambda k, n, m, l: k * l,
        REGIME_N_INF: lambda k, n, m, l: k,
        REGIME_M_INF: lambda k, n, m, l: k * l,
        REGIME_BOTH_INF: lambda k, n, m, l: k,
    },
    (PC, UPLINK): {
        REGIME_FINITE: lambda k, n, m, l: k * l,
        REGIME_N_INF: lambda k, n, m, l: k,
        REGIME_M_INF: lambda k, n, m, l: l,
        REGIME_BOTH_INF: lambda k, n, m, l: 1,
    },
    (NPUC, DOWNLINK): {
        REGIME_FINITE: lambda k, n, m, l: m,
        REGIME_N_INF: lambda k, n, m, l: m,
        REGIME_M_INF: lambda k, n, m, l: m,
        REGIME_BOTH_INF: lambda k, n, m, l: m,
    },
    (PUC, DOWNLINK): {
        REGIME_FINITE: lambda k, n, m, l: k * l,
        REGIME_N_INF: lambda k, n, m, l: k * l,
        REGIME_M_INF: lambda k, n, m, l: k,
        REGIME_BOTH_INF: lambda k, n, m, l: k,
    },
    (PC, DOWNLINK): {
        REGIME_FINITE: lambda k, n, m, l: k * l,
        REGIME_N_INF: lambda k, n, m, l: l,
        REGIME_M_INF: lambda k, n, m, l: k,
        REGIME_BOTH_INF: lambda k, n, m, l: 1,
    },
}


def min_pilot_count(scenario: str, direction: str, regime: str,
                    k_ues: int, n_ue: int, m_bs: int, l_paths: int) -> int:
    """Minimum number of unique pilots for a scenario/direction/regime."""
    try:
        formula = _PILOT_COUNT_TABLE[(scenario, direction)][regime]
    except KeyError:
        raise ValueError(
            f"invalid combination scenario={scenario!r}, direction={direction!r}, "
            f"regime={regime!r}"
        ) from None
    return int(formula(k_ues, n_ue, m_bs, l_paths))
