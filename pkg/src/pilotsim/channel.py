"""Cluster channel model: steering vectors, path sampling, channel assembly.

The channel between an N-antenna UE and an M-antenna BS is a sum of L
discrete paths, H = B G U^H, with B and U the per-path steering matrices and
G diagonal with entries g_i * sqrt(M N / L).  Everything downstream works off
the second-order statistics (U, B, sigma^2) captured in ChannelStats.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from pilotsim.linalg import LowRankPsd, khatri_rao

log = logging.getLogger(__name__)

AOA_RANGE_DEFAULT = (-np.pi / 3, np.pi / 3)
AOD_RANGE_DEFAULT = (-np.pi / 6, np.pi / 6)


@dataclass(frozen=True)
class ArrayConfig:
    """Antenna array description.

    positions are in wavelengths along the array axis; for the uniform-linear
    geometry they are implied by element_spacing and need not be stored.
    """

    element_count: int
    geometry: str = "uniform-linear"
    element_spacing: float = 0.5
    positions: np.ndarray | None = None

    def __post_init__(self):
        if self.element_count < 1:
            raise ValueError(f"element_count must be >= 1, got {self.element_count}")
        if self.element_spacing <= 0:
            raise ValueError(f"element_spacing must be > 0, got {self.element_spacing}")
        if self.geometry not in ("uniform-linear", "random-positions"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.geometry == "random-positions":
            if self.positions is None:
                raise ValueError("random-positions geometry requires explicit positions")
            pos = np.asarray(self.positions, dtype=float)
            if pos.shape != (self.element_count,):
                raise ValueError(
                    f"positions must have shape ({self.element_count},), got {pos.shape}"
                )
            object.__setattr__(self, "positions", pos)

    @classmethod
    def random_positions(cls, element_count: int, rng: np.random.Generator,
                         aperture: float | None = None) -> "ArrayConfig":
        """Array with elements placed uniformly at random over the aperture.

        Default aperture matches a half-wavelength-spaced ULA of the same size.
        """
        if aperture is None:
            aperture = 0.5 * element_count
        pos = np.sort(rng.uniform(0.0, aperture, size=element_count))
        return cls(element_count, geometry="random-positions", positions=pos)

    def element_axis(self) -> np.ndarray:
        """Element positions in wavelengths."""
        if self.geometry == "uniform-linear":
            return self.element_spacing * np.arange(self.element_count)
        return self.positions


def steering_vector(cfg: ArrayConfig, angle: float) -> np.ndarray:
    """Unit-norm array response at the given angle (radians), as a column."""
    phase = 2 * np.pi * cfg.element_axis() * np.sin(angle)
    v = np.exp(1j * phase) / np.sqrt(cfg.element_count)
    return v.reshape(-1, 1)


def steering_matrix(cfg: ArrayConfig, angles: np.ndarray) -> np.ndarray:
    """Stack steering vectors for an angle list into element_count x L."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    phase = 2 * np.pi * np.outer(cfg.element_axis(), np.sin(angles))
    return np.exp(1j * phase) / np.sqrt(cfg.element_count)


@dataclass(frozen=True)
class PathSet:
    """L propagation paths: angles at both ends plus complex gains."""

    aoa: np.ndarray
    aod: np.ndarray
    gains: np.ndarray
    sigma_sq: float

    def __post_init__(self):
        aoa = np.atleast_1d(np.asarray(self.aoa, dtype=float))
        aod = np.atleast_1d(np.asarray(self.aod, dtype=float))
        gains = np.atleast_1d(np.asarray(self.gains, dtype=np.complex128))
        if not (len(aoa) == len(aod) == len(gains)) or len(aoa) < 1:
            raise ValueError("aoa, aod and gains must share a common length L >= 1")
        if self.sigma_sq < 0:
            raise ValueError(f"sigma_sq must be nonnegative, got {self.sigma_sq}")
        object.__setattr__(self, "aoa", aoa)
        object.__setattr__(self, "aod", aod)
        object.__setattr__(self, "gains", gains)

    @property
    def num_paths(self) -> int:
        return len(self.aoa)


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian draws with the given variance."""
    std = np.sqrt(variance / 2)
    return std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_paths(rng: np.random.Generator, num_paths: int,
                 aoa_range=AOA_RANGE_DEFAULT, aod_range=AOD_RANGE_DEFAULT,
                 sigma_sq: float = 1.0) -> PathSet:
    """Draw L paths with uniform angles and CN(0, sigma_sq) gains.

    If two paths coincide in both AoA and AoD (probability-zero degeneracy
    that would make the path Gram singular) the angles are resampled.
    """
    if num_paths < 1:
        raise ValueError(f"num_paths must be >= 1, got {num_paths}")
    lo_a, hi_a = aoa_range
    lo_d, hi_d = aod_range
    if not (hi_a > lo_a and hi_d > lo_d):
        raise ValueError("angle ranges must be nonempty intervals")
    for _ in range(100):
        aoa = rng.uniform(lo_a, hi_a, size=num_paths)
        aod = rng.uniform(lo_d, hi_d, size=num_paths)
        pairs = set(zip(aoa.tolist(), aod.tolist()))
        if len(pairs) == num_paths:
            break
        log.warning("degenerate path angles drawn; resampling")
    gains = complex_normal(rng, num_paths, sigma_sq)
    return PathSet(aoa=aoa, aod=aod, gains=gains, sigma_sq=sigma_sq)


@dataclass(frozen=True)
class ChannelRealization:
    """One fading block for one UE: steering matrices, gains, assembled H."""

    B: np.ndarray  # M x L
    U: np.ndarray  # N x L
    G: np.ndarray  # L x L diagonal, entries g_i * sqrt(MN/L)
    H: np.ndarray  # M x N


def assemble(cfg_bs: ArrayConfig, cfg_ue: ArrayConfig, paths: PathSet) -> ChannelRealization:
    """Build H = B G U^H for one gain draw."""
    b = steering_matrix(cfg_bs, paths.aoa)
    u = steering_matrix(cfg_ue, paths.aod)
    m, n, l = cfg_bs.element_count, cfg_ue.element_count, paths.num_paths
    scaled = paths.gains * np.sqrt(m * n / l)
    g = np.diag(scaled)
    h = (b * scaled) @ u.conj().T
    return ChannelRealization(B=b, U=u, G=g, H=h)


@dataclass(frozen=True)
class ChannelStats:
    """Second-order channel information assumed known at both ends.

    The channel covariance is delta*M*sigma_sq * A A^H with A the Khatri-Rao
    factor conj(U) (columnwise kron) B; it has rank L and trace M*N*sigma_sq.
    """

    U: np.ndarray  # N x L
    B: np.ndarray  # M x L
    sigma_sq: float
    delta: float = field(init=False)

    def __post_init__(self):
        n, l = self.U.shape
        if self.B.shape[1] != l:
            raise ValueError(
                f"U and B must share the path count: {self.U.shape} vs {self.B.shape}"
            )
        if self.sigma_sq < 0:
            raise ValueError(f"sigma_sq must be nonnegative, got {self.sigma_sq}")
        object.__setattr__(self, "delta", n / l)

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def num_paths(self) -> int:
        return self.U.shape[1]

    @property
    def r_u(self) -> np.ndarray:
        """Path Gram at the UE, U^H U (unit diagonal)."""
        return self.U.conj().T @ self.U

    @property
    def r_b(self) -> np.ndarray:
        """Path Gram at the BS, B^H B (unit diagonal)."""
        return self.B.conj().T @ self.B

    @property
    def cov_scale(self) -> float:
        """Per-path variance of the scaled gains: delta * M * sigma_sq."""
        return self.delta * self.m * self.sigma_sq

    @property
    def r_factor(self) -> LowRankPsd:
        """Channel covariance in factored form."""
        return LowRankPsd(khatri_rao(self.U.conj(), self.B), self.cov_scale)

    @property
    def trace_r(self) -> float:
        return self.cov_scale * self.num_paths


def stats_from_paths(cfg_bs: ArrayConfig, cfg_ue: ArrayConfig, paths: PathSet) -> ChannelStats:
    """Second-order statistics implied by a path set (gains marginalized)."""
    b = steering_matrix(cfg_bs, paths.aoa)
    u = steering_matrix(cfg_ue, paths.aod)
    return ChannelStats(U=u, B=b, sigma_sq=paths.sigma_sq)


def draw_scaled_gains(stats: ChannelStats, n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """Sample (n_draws, L) scaled path gains g_i * sqrt(MN/L), CN(0, delta*M*sigma^2)."""
    return complex_normal(rng, (n_draws, stats.num_paths), stats.cov_scale)
