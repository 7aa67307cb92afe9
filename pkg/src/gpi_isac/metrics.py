"""Communication and radar performance functionals.

Conventions: the joint precoder is F = [F_C, F_R] with unit total power,
symbols carry power P, user noise is ``noise_comm`` and radar receiver
noise is ``noise_radar``.  The stacked vector is f = vec(F).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arraygeom import BeamMask, RadarScene, UlaArray, target_matrices
from .blockdiag import BlockDiagHermitian
from .channel import ChannelSet

UNIT_NORM_TOL = 1e-6


def db(x):
    """10 log10(x), with log10(0) mapped to -inf."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def undb(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions and power levels.

    Attributes
    ----------
    num_antennas, num_users, num_radar : int
        N, K and M.
    tx_power : float
        Symbol power P.
    noise_comm, noise_radar : float
        User noise variance and radar receiver noise variance.
    """

    num_antennas: int
    num_users: int
    num_radar: int
    tx_power: float = 1.0
    noise_comm: float = 1.0
    noise_radar: float = 1.0

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ValueError("num_antennas must be positive")
        if self.num_users < 0 or self.num_radar < 0 or self.num_users + self.num_radar < 1:
            raise ValueError("need K >= 0, M >= 0 and K + M >= 1")
        for name in ("tx_power", "noise_comm", "noise_radar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_snr_db(cls, num_antennas, num_users, num_radar, snr_db,
                    noise_comm=1.0, noise_radar=1.0) -> "SystemConfig":
        """SNR = P / noise_comm."""
        return cls(num_antennas, num_users, num_radar,
                   tx_power=float(undb(snr_db)) * noise_comm,
                   noise_comm=noise_comm, noise_radar=noise_radar)

    @property
    def num_columns(self) -> int:
        return self.num_users + self.num_radar

    @property
    def inv_snr(self) -> float:
        return self.noise_comm / self.tx_power


@dataclass(frozen=True)
class StackedBeamformer:
    """Joint precoder F (N x (K+M)); the first K columns serve users."""

    matrix: np.ndarray
    num_users: int

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or not 0 <= self.num_users <= m.shape[1]:
            raise ValueError("matrix must be N x (K+M) with K <= K+M")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_vec(cls, vec, num_antennas: int, num_users: int) -> "StackedBeamformer":
        vec = np.asarray(vec, dtype=complex)
        return cls(vec.reshape(-1, num_antennas).T, num_users)

    @classmethod
    def zeros(cls, cfg: SystemConfig) -> "StackedBeamformer":
        return cls(np.zeros((cfg.num_antennas, cfg.num_columns)), cfg.num_users)

    @property
    def vec(self) -> np.ndarray:
        """vec(F): columns stacked top to bottom."""
        return self.matrix.T.reshape(-1)

    @property
    def comm(self) -> np.ndarray:
        return self.matrix[:, : self.num_users]

    @property
    def radar(self) -> np.ndarray:
        return self.matrix[:, self.num_users:]

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.matrix) ** 2))

    def normalized(self) -> "StackedBeamformer":
        return StackedBeamformer(self.matrix / np.sqrt(self.power), self.num_users)


def _as_matrix(F) -> np.ndarray:
    return F.matrix if isinstance(F, StackedBeamformer) else np.asarray(F)


def _user_count(F, cfg: SystemConfig) -> int:
    return F.num_users if isinstance(F, StackedBeamformer) else cfg.num_users


# ---------------------------------------------------------------- communication

def sinr_all(channels, F, cfg: SystemConfig) -> np.ndarray:
    """SINR of every user for true channels ``channels`` (shape (K, N))."""
    h = np.atleast_2d(np.asarray(channels))
    m = _as_matrix(F)
    k_users = _user_count(F, cfg)
    gains = np.abs(h.conj() @ m) ** 2  # (K, K+M): |h_k^H f_j|^2
    desired = gains[np.arange(k_users), np.arange(k_users)]
    interference = gains.sum(axis=1) - desired
    return desired / (interference + cfg.inv_snr)


def sinr(k: int, channels, F, cfg: SystemConfig) -> float:
    return float(sinr_all(channels, F, cfg)[k])


def sum_se(channels, F, cfg: SystemConfig) -> float:
    """Sum of log2(1 + SINR_k) in bits/s/Hz."""
    return float(np.sum(np.log2(1.0 + sinr_all(channels, F, cfg))))


def average_se(chset: ChannelSet, F, cfg: SystemConfig, num_draws: int = 100,
               seed=None) -> tuple:
    """Monte Carlo E_phi[sum SE] with h = h_hat + phi, phi ~ CN(0, Phi).

    Returns ``(mean, standard_error)``.
    """
    phi = chset.sample_error(seed, num_draws)
    vals = np.array([sum_se(chset.estimate + p, F, cfg) for p in phi])
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(num_draws)) if num_draws > 1 else 0.0


@dataclass(frozen=True)
class LiftedPair:
    """Numerator/denominator matrices of user k's rate lower bound."""

    B: BlockDiagHermitian
    C: BlockDiagHermitian


def lifted_pair(k: int, h_hat, error_cov, cfg: SystemConfig) -> LiftedPair:
    """B_k = I (x) (h h^H + Phi) + (sigma^2/P) I and C_k = B_k minus h h^H in block k."""
    h_hat = np.asarray(h_hat, dtype=complex)
    n = h_hat.size
    outer = np.outer(h_hat, h_hat.conj())
    shared = outer + np.asarray(error_cov) + cfg.inv_snr * np.eye(n)
    B = BlockDiagHermitian.from_shared(shared, cfg.num_columns)
    C = BlockDiagHermitian.from_shared(shared, cfg.num_columns, {k: shared - outer})
    return LiftedPair(B, C)


def lifted_pairs(chset: ChannelSet, cfg: SystemConfig) -> list:
    return [lifted_pair(k, chset.estimate[k], chset.error_cov[k], cfg)
            for k in range(chset.num_users)]


def check_unit_norm(fbar) -> None:
    norm = np.linalg.norm(fbar)
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"stacked beamformer must have unit norm, got {norm:.9g}")


def se_lower_bound(pairs, fbar) -> float:
    """Sum over users of log2(f^H B_k f / f^H C_k f) at unit power."""
    fbar = np.asarray(fbar)
    check_unit_norm(fbar)
    return float(sum(np.log2(p.B.quad(fbar) / p.C.quad(fbar)) for p in pairs))


# ---------------------------------------------------------------- transmit beam

def beam_pattern(F, array: UlaArray, angles, cfg: SystemConfig) -> np.ndarray:
    """P * ||a(theta)^H F||^2 for each angle."""
    a = array.steering(np.atleast_1d(angles))
    return cfg.tx_power * np.sum(np.abs(a.conj() @ _as_matrix(F)) ** 2, axis=1)


def tx_beam_power(F, array: UlaArray, angle: float, cfg: SystemConfig) -> float:
    return float(beam_pattern(F, array, [angle], cfg)[0])


def lifted_beam_matrix(array: UlaArray, angle: float, cfg: SystemConfig) -> BlockDiagHermitian:
    """A(theta) = P I (x) a(theta) a(theta)^H."""
    a = array.steering(angle)
    return BlockDiagHermitian.from_shared(cfg.tx_power * np.outer(a, a.conj()),
                                          cfg.num_columns)


def beam_mse(F, mask: BeamMask, array: UlaArray, cfg: SystemConfig) -> float:
    """(1/L) sum_l |P d(theta_l) - B(F; theta_l)|^2."""
    pattern = beam_pattern(F, array, mask.grid.angles, cfg)
    return float(np.mean((cfg.tx_power * mask.values - pattern) ** 2))


def beam_nmse_db(F, mask: BeamMask, array: UlaArray, cfg: SystemConfig) -> float:
    """MSE / P^2 in dB."""
    return float(db(beam_mse(F, mask, array, cfg) / cfg.tx_power**2))


# ---------------------------------------------------------------- radar receive

@dataclass(frozen=True)
class LiftedRadarPair:
    """I (x) G_tar^H G_tar and I (x) G_cl^H G_cl + (N sigma_R^2 / P) I."""

    Gbar_tar: BlockDiagHermitian
    Gbar_cl: BlockDiagHermitian


def lifted_radar_pair(scene: RadarScene, array: UlaArray, cfg: SystemConfig) -> LiftedRadarPair:
    g_tar, g_cl = target_matrices(scene, array)
    n = array.num_elements
    ridge = n * cfg.noise_radar / cfg.tx_power
    tar = g_tar.conj().T @ g_tar
    cl = g_cl.conj().T @ g_cl + ridge * np.eye(n)
    return LiftedRadarPair(BlockDiagHermitian.from_shared(tar, cfg.num_columns),
                           BlockDiagHermitian.from_shared(cl, cfg.num_columns))


def _scnr_from_matrices(F, g_num, g_cl, n, cfg) -> float:
    m = _as_matrix(F)
    num = np.sum(np.abs(g_num @ m) ** 2)
    den = np.sum(np.abs(g_cl @ m) ** 2) + n * cfg.noise_radar / cfg.tx_power
    return float(num / den)


def scnr(F, scene: RadarScene, array: UlaArray, cfg: SystemConfig) -> float:
    """Tr(G_tar F F^H G_tar^H) / (Tr(G_cl F F^H G_cl^H) + N sigma_R^2 / P)."""
    scene.require_target()
    g_tar, g_cl = target_matrices(scene, array)
    return _scnr_from_matrices(F, g_tar, g_cl, array.num_elements, cfg)


def target_scnrs(F, scene: RadarScene, array: UlaArray, cfg: SystemConfig) -> np.ndarray:
    """SCNR of each target alone against all clutter plus noise."""
    scene.require_target()
    _, g_cl = target_matrices(scene, array)
    out = []
    for target in scene.targets:
        g_i, _ = target_matrices(RadarScene((target,)), array)
        out.append(_scnr_from_matrices(F, g_i, g_cl, array.num_elements, cfg))
    return np.array(out)


def rx_beam_pattern(F, scene: RadarScene, array: UlaArray, cfg: SystemConfig,
                    angles) -> np.ndarray:
    """a_r^H (G F F^H G^H + sigma_R^2/P I) a_r with G = G_tar + G_cl, per angle."""
    g_tar, g_cl = target_matrices(scene, array)
    echo = (g_tar + g_cl) @ _as_matrix(F)  # (N, K+M)
    a = array.steering(np.atleast_1d(angles))
    noise = cfg.noise_radar / cfg.tx_power * array.num_elements
    return np.sum(np.abs(a.conj() @ echo) ** 2, axis=1) + noise


def rx_beam_gain(F, scene: RadarScene, array: UlaArray, cfg: SystemConfig,
                 angle: float) -> float:
    return float(rx_beam_pattern(F, scene, array, cfg, [angle])[0])
