"""Spatially correlated user channels and quantized-feedback CSIT error.

Channels follow the Karhunen-Loeve form h = U Lambda^{1/2} g with g IID
CN(0, 1).  Covariances come from a multipath profile,
K = sum_l sigma_l^2 a(theta_l) a(theta_l)^H.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .arraygeom import UlaArray

RANK_TOL = 1e-10


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    """IID CN(0, 1) samples."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2)


@dataclass(frozen=True)
class PathProfile:
    """Angles of departure and mean path powers of one user's channel."""

    paths: tuple

    def __post_init__(self):
        paths = tuple((float(a), float(p)) for a, p in self.paths)
        if not paths:
            raise ValueError("a path profile needs at least one path")
        if any(p < 0 for _, p in paths) or not any(p > 0 for _, p in paths):
            raise ValueError("path powers must be positive")
        object.__setattr__(self, "paths", paths)

    @classmethod
    def random(cls, rng, num_paths: int = 4, span: float = np.pi / 3,
               total_power: float = 1.0) -> "PathProfile":
        """Equal-power paths with AoDs uniform in [-span, span]."""
        rng = _rng(rng)
        aods = rng.uniform(-span, span, size=num_paths)
        return cls(tuple((a, total_power / num_paths) for a in aods))


@dataclass(frozen=True)
class ChannelCovariance:
    """Covariance K = U diag(eigvals) U^H restricted to its nonzero eigenspace."""

    matrix: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray

    @property
    def rank(self) -> int:
        return self.eigvals.size

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, matrix) -> "ChannelCovariance":
        matrix = np.asarray(matrix, dtype=complex)
        matrix = (matrix + matrix.conj().T) / 2
        w, v = np.linalg.eigh(matrix)
        top = w.max(initial=0.0)
        keep = w > RANK_TOL * top if top > 0 else np.zeros(w.shape, dtype=bool)
        # largest eigenvalue first
        w, v = w[keep][::-1], v[:, keep][:, ::-1]
        return cls(matrix, v, w)


def covariance_from_paths(profile: PathProfile, array: UlaArray) -> ChannelCovariance:
    angles = np.array([a for a, _ in profile.paths])
    powers = np.array([p for _, p in profile.paths])
    a = array.steering(angles)  # (L_k, N)
    k = (a.T * powers) @ a.conj()
    return ChannelCovariance.from_matrix(k)


def draw_channel(cov: ChannelCovariance, seed=None) -> np.ndarray:
    """One realization h = U Lambda^{1/2} g."""
    rng = _rng(seed)
    g = complex_normal(rng, cov.rank)
    return cov.eigvecs @ (np.sqrt(cov.eigvals) * g)


def apply_csit_error(h, cov: ChannelCovariance, kappa: float, seed=None):
    """Quantized-feedback channel estimate.

    Returns ``(h_hat, Phi)`` with h = h_hat + phi, Phi = kappa^2 K, and phi
    uncorrelated with h_hat.  The error is drawn as
    phi = kappa^2 h + kappa sqrt(1 - kappa^2) U Lambda^{1/2} g, which gives
    Cov(phi) = kappa^2 K and Cov(h_hat) = (1 - kappa^2) K.
    """
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"kappa must lie in [0, 1], got {kappa!r}")
    rng = _rng(seed)
    h = np.asarray(h, dtype=complex)
    g = complex_normal(rng, cov.rank)
    fresh = cov.eigvecs @ (np.sqrt(cov.eigvals) * g)
    phi = kappa**2 * h + kappa * np.sqrt(1.0 - kappa**2) * fresh
    return h - phi, kappa**2 * cov.matrix


@dataclass(frozen=True)
class ChannelSet:
    """True channels, their estimates and error covariances for K users.

    ``true`` and ``estimate`` have shape (K, N); ``error_cov`` has shape
    (K, N, N).
    """

    true: np.ndarray
    estimate: np.ndarray
    error_cov: np.ndarray
    covs: tuple

    @property
    def num_users(self) -> int:
        return self.estimate.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.estimate.shape[1]

    def without_error_cov(self) -> "ChannelSet":
        """Same channels with Phi forced to zero (error statistics ignored)."""
        return replace(self, error_cov=np.zeros_like(self.error_cov))

    def sample_error(self, rng, num_draws: int = 1) -> np.ndarray:
        """Fresh error draws phi_k ~ CN(0, Phi_k), shape (num_draws, K, N)."""
        rng = _rng(rng)
        w, v = np.linalg.eigh(self.error_cov)
        root = v * np.sqrt(np.clip(w, 0.0, None))[:, None, :]  # (K, N, N)
        g = complex_normal(rng, (num_draws, self.num_users, self.num_antennas))
        return np.einsum("kij,dkj->dki", root, g)


def generate_channel_set(profiles: Sequence[PathProfile], array: UlaArray,
                         kappa: float, seed=None) -> ChannelSet:
    """Draw true channels and their imperfect estimates for every user."""
    rng = _rng(seed)
    n = array.num_elements
    k_users = len(profiles)
    true = np.empty((k_users, n), dtype=complex)
    est = np.empty((k_users, n), dtype=complex)
    err = np.empty((k_users, n, n), dtype=complex)
    covs = []
    for k, prof in enumerate(profiles):
        cov = covariance_from_paths(prof, array)
        covs.append(cov)
        true[k] = draw_channel(cov, rng)
        est[k], err[k] = apply_csit_error(true[k], cov, kappa, rng)
    return ChannelSet(true, est, err, tuple(covs))
