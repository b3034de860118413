"""Shared test utilities: random instances and structured-product identity checks.

The identity checks are written as plain callables returning the worst
absolute deviation so that both the unit tests and the acceptance suite can
run them over many random instances.
"""

from __future__ import annotations

import numpy as np

from pilotsim import channel, pilot
from pilotsim.linalg import khatri_rao, kronecker, vec


def crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    f = crandn(rng, n, rank or n)
    return f @ f.conj().T


def random_pd(rng: np.random.Generator, n: int) -> np.ndarray:
    return random_psd(rng, n) + 0.1 * np.eye(n)


def random_stats(rng: np.random.Generator, m: int, n: int, l: int,
                 sigma_sq: float = 1.0, geometry: str = "uniform-linear"):
    """Random per-UE second-order statistics on fresh angle draws."""
    if geometry == "random-positions":
        bs = channel.ArrayConfig.random_positions(m, rng)
        ue = channel.ArrayConfig.random_positions(n, rng)
    else:
        bs = channel.ArrayConfig(m)
        ue = channel.ArrayConfig(n)
    paths = channel.sample_paths(rng, l, sigma_sq=sigma_sq)
    return channel.stats_from_paths(bs, ue, paths)


# ---------------------------------------------------------------------------
# dense MMSE oracle (small instances only)


def dense_observation(scheme, stats, k, sigma_z_sq):
    """Dense MMSE pieces for UE k: effective pilots, observation covariance.

    Returns (pilots, cov) with pilots[j] = Pbrev_kj (MN x T*rows) such that
    vec(Y_k) = sum_j pilots[j]^H vec(H_j) + combined noise, and cov the
    covariance of vec(Y_k).
    """
    m = stats[0].m
    pilots = [pilot.effective_pilot(scheme, k, j, m) for j in range(len(stats))]
    w = scheme.combiner_or_eye(k, m)
    noise_cov = sigma_z_sq * np.kron(np.eye(scheme.t_tau), w.conj().T @ w)
    cov = noise_cov.astype(np.complex128)
    for j, s in enumerate(stats):
        r_j = s.r_factor.to_dense()
        cov += pilots[j].conj().T @ r_j @ pilots[j]
    return pilots, cov


def dense_estimate(scheme, stats, k, sigma_z_sq, received):
    """Generic MMSE estimate vec -> matrix, via explicit dense covariances."""
    pilots, cov = dense_observation(scheme, stats, k, sigma_z_sq)
    r_k = stats[k].r_factor.to_dense()
    gain = r_k @ pilots[k] @ np.linalg.inv(cov)
    h_vec = gain @ vec(received)
    return h_vec.reshape(stats[k].m, stats[k].n, order="F")


def dense_error_cov(scheme, stats, k, sigma_z_sq):
    pilots, cov = dense_observation(scheme, stats, k, sigma_z_sq)
    r_k = stats[k].r_factor.to_dense()
    cross = r_k @ pilots[k]
    return r_k - cross @ np.linalg.solve(cov, cross.conj().T)


# ---------------------------------------------------------------------------
# structured-product identities; each returns the worst absolute error


def check_product_definitions(rng: np.random.Generator) -> float:
    """Kronecker blocks are [A]_ij B; Khatri-Rao columns are a_l kron b_l."""
    m, n, r, s, l = rng.integers(1, 5, size=5)
    a, b = crandn(rng, m, n), crandn(rng, r, s)
    kron = kronecker(a, b)
    worst = 0.0
    for i in range(m):
        for j in range(n):
            block = kron[i * r:(i + 1) * r, j * s:(j + 1) * s]
            worst = max(worst, float(np.max(np.abs(block - a[i, j] * b))))
    c, d = crandn(rng, m, l), crandn(rng, r, l)
    kr = khatri_rao(c, d)
    for col in range(l):
        expect = np.kron(c[:, col], d[:, col])
        worst = max(worst, float(np.max(np.abs(kr[:, col] - expect))))
    return worst


def check_vectorization_identity(rng: np.random.Generator) -> float:
    """vec(A B C) = (C^T kron A) vec(B)."""
    m, n, p, q = rng.integers(1, 6, size=4)
    a, b, c = crandn(rng, m, n), crandn(rng, n, p), crandn(rng, p, q)
    lhs = vec(a @ b @ c)
    rhs = kronecker(c.T, a) @ vec(b)
    return float(np.max(np.abs(lhs - rhs)))


def check_kr_kron_identities(rng: np.random.Generator) -> float:
    """Mixed Kronecker/Khatri-Rao product and Gram identities."""
    n, m, r, s, l = rng.integers(1, 5, size=5)
    a, b = crandn(rng, n, m), crandn(rng, r, s)
    c, d = crandn(rng, m, l), crandn(rng, s, l)
    worst = float(np.max(np.abs(
        kronecker(a, b) @ khatri_rao(c, d) - khatri_rao(a @ c, b @ d))))
    worst = max(worst, float(np.max(np.abs(
        khatri_rao(c, d).conj().T @ kronecker(a.conj().T, b.conj().T)
        - khatri_rao(a @ c, b @ d).conj().T))))
    gram = khatri_rao(c, d).conj().T @ khatri_rao(c, d)
    worst = max(worst, float(np.max(np.abs(
        gram - (c.conj().T @ c) * (d.conj().T @ d)))))
    return worst


def check_trace_inverse_bracket(rng: np.random.Generator) -> float:
    """sum 1/a_ii <= tr(inv(A)) <= same * (1+kappa)^2/(4 kappa); returns violation."""
    from pilotsim.linalg import trace_inverse_bounds

    n = int(rng.integers(1, 8))
    a = random_pd(rng, n)
    lower, upper = trace_inverse_bounds(a)
    exact = float(np.real(np.trace(np.linalg.inv(a))))
    return max(lower - exact, exact - upper, 0.0)


def check_psd_trace_product(rng: np.random.Generator) -> float:
    """lambda_min(A) tr(B) <= tr(A B) <= lambda_max(A) tr(B); returns violation."""
    n = int(rng.integers(1, 8))
    a = random_psd(rng, n, rank=int(rng.integers(1, n + 1)))
    b = random_psd(rng, n, rank=int(rng.integers(1, n + 1)))
    w = np.linalg.eigvalsh(a)
    tr_ab = float(np.real(np.trace(a @ b)))
    tr_b = float(np.real(np.trace(b)))
    return max(w[0] * tr_b - tr_ab, tr_ab - w[-1] * tr_b, 0.0)


def check_ratio_inequality(rng: np.random.Generator) -> float:
    """(1+a)/(1+b) >= a/b for 0 < a <= b; returns violation."""
    a = float(rng.uniform(1e-6, 10.0))
    b = a + float(rng.uniform(0.0, 10.0))
    return max(a / b - (1 + a) / (1 + b), 0.0)


IDENTITY_CHECKS = (
    ("product-definitions", check_product_definitions, 1e-12),
    ("vectorization", check_vectorization_identity, 1e-10),
    ("khatri-rao-kronecker", check_kr_kron_identities, 1e-10),
    ("trace-inverse-bracket", check_trace_inverse_bracket, 1e-8),
    ("psd-trace-product", check_psd_trace_product, 1e-8),
    ("ratio-inequality", check_ratio_inequality, 1e-12),
)
