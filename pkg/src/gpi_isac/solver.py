"""Generalized power iteration (GPI) solvers for joint ISAC beamforming.

The stationarity condition of the Lagrangian of each problem has the form
``Psi(f) f = lambda(f) Omega(f) f`` with block-diagonal Hermitian ``Psi`` and
``Omega`` that depend on f itself.  :func:`gpi_iterate` seeks the principal
eigenvector of ``Omega(f)^{-1} Psi(f)`` by normalized fixed-point
iteration; :func:`solve_isac_mse` and :func:`solve_isac_scnr` wrap it in a
bisection over the Lagrange multiplier ``mu``.

The scalar prefactors of ``Psi``/``Omega`` (``lambda_num``/``lambda_den``)
are taken as 1: every iterate is normalized, so only the direction of
``Omega^{-1} Psi f`` matters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .arraygeom import BeamMask, RadarScene, UlaArray
from .blockdiag import BlockDiagHermitian
from .channel import ChannelSet, complex_normal
from .metrics import (
    LiftedPair,
    LiftedRadarPair,
    StackedBeamformer,
    SystemConfig,
    beam_nmse_db,
    check_unit_norm,
    db,
    lifted_pairs,
    lifted_radar_pair,
)

log = logging.getLogger(__name__)

LN2 = np.log(2.0)

Builder = Callable[[np.ndarray], tuple]


class DegenerateTargetError(ValueError):
    """The beamformer puts (numerically) no power on any target."""


@dataclass(frozen=True)
class SolverConfig:
    """Iteration limits and multiplier bracket.

    Defaults: mu in [0, 2000], all tolerances 1e-3, all iteration caps 20.
    ``polish_max`` bounds the extra iterations granted to an inner run that
    stops at ``inner_max`` without converging, so that feasibility is judged
    on a settled point (0 disables).
    """

    mu_min: float = 0.0
    mu_max: float = 2000.0
    inner_tol: float = 1e-3
    inner_max: int = 20
    outer_tol: float = 1e-3
    outer_max: int = 20
    init_policy: str = "deterministic"
    init_seed: Optional[int] = None
    polish_max: int = 200

    def __post_init__(self):
        if not 0 <= self.mu_min <= self.mu_max:
            raise ValueError("need 0 <= mu_min <= mu_max")
        if not (self.inner_tol > 0 and self.outer_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.inner_max < 1 or self.outer_max < 1 or self.polish_max < 0:
            raise ValueError("iteration caps must be >= 1")
        if self.init_policy not in ("deterministic", "seeded_random"):
            raise ValueError(f"unknown init_policy {self.init_policy!r}")


@dataclass
class GpiResult:
    fbar: np.ndarray
    residual: float
    iterations: int
    converged: bool
    eigenvalue: float


@dataclass
class SolveReport:
    """Outcome of one constrained solve."""

    beamformer: StackedBeamformer
    mu: float
    se_lb: float
    constraint: str
    nmse_db: Optional[float] = None
    scnr_db: Optional[float] = None
    stationarity_residual: float = float("nan")
    log2_lambda: float = float("nan")
    inner_iterations: list = field(default_factory=list)
    mu_trace: list = field(default_factory=list)
    feasible: bool = True
    inner_converged: bool = True

    @property
    def converged(self) -> bool:
        return self.feasible and self.inner_converged

    @property
    def fbar(self) -> np.ndarray:
        return self.beamformer.vec

    def to_dict(self) -> dict:
        F = self.beamformer.matrix
        return {
            "constraint": self.constraint,
            "converged": self.converged,
            "feasible": self.feasible,
            "mu": self.mu,
            "se_lb": self.se_lb,
            "nmse_db": self.nmse_db,
            "scnr_db": self.scnr_db,
            "stationarity_residual": self.stationarity_residual,
            "log2_lambda": self.log2_lambda,
            "inner_iterations": list(self.inner_iterations),
            "mu_trace": list(self.mu_trace),
            "num_users": self.beamformer.num_users,
            "beamformer_real": F.real.tolist(),
            "beamformer_imag": F.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveReport":
        F = np.asarray(d["beamformer_real"]) + 1j * np.asarray(d["beamformer_imag"])
        kwargs = {k: d[k] for k in ("mu", "se_lb", "constraint", "nmse_db", "scnr_db",
                                    "stationarity_residual", "log2_lambda",
                                    "inner_iterations", "mu_trace", "feasible")}
        kwargs["inner_converged"] = d["converged"] or not d["feasible"]
        return cls(StackedBeamformer(F, d["num_users"]), **kwargs)


# ------------------------------------------------------------------ building blocks

def _rows(fbar, n_blocks: int) -> np.ndarray:
    return np.asarray(fbar).reshape(n_blocks, -1)


class _CommTerms:
    """Rate-bound terms sum_k B_k/(f^H B_k f) and sum_k C_k/(f^H C_k f)."""

    def __init__(self, pairs: Sequence[LiftedPair], size: int = 0):
        self.num_users = len(pairs)
        if pairs:
            self.shared = np.stack([p.B.blocks[0] for p in pairs])
            self.desired = np.stack([p.B.blocks[k] - p.C.blocks[k]
                                     for k, p in enumerate(pairs)])
        else:
            # no users: empty sums, the radar terms carry the whole pair
            self.shared = np.zeros((0, size, size), complex)
            self.desired = np.zeros((0, size, size), complex)

    def quads(self, x: np.ndarray) -> tuple:
        """(f^H B_k f, f^H C_k f) for every user; x holds the columns of F as rows."""
        gram = x.T @ x.conj()  # F F^H
        b = np.real(np.einsum("kij,ji->k", self.shared, gram))
        k = self.num_users
        d = np.real(np.einsum("ki,kij,kj->k", x[:k].conj(), self.desired, x[:k]))
        return b, b - d

    def blocks(self, x: np.ndarray) -> tuple:
        """Shared numerator block, shared denominator block, per-user corrections."""
        b, c = self.quads(x)
        if np.any(c <= 0):
            raise FloatingPointError("degenerate rate denominator f^H C_k f <= 0")
        num = np.einsum("kij,k->ij", self.shared, 1.0 / b)
        den = np.einsum("kij,k->ij", self.shared, 1.0 / c)
        corrections = self.desired / c[:, None, None]
        return num, den, corrections


def _assemble(num_shared, den_shared, corrections, n_blocks) -> tuple:
    psi = BlockDiagHermitian.from_shared(num_shared, n_blocks)
    overrides = {k: den_shared - corr for k, corr in enumerate(corrections)}
    omega = BlockDiagHermitian.from_shared(den_shared, n_blocks, overrides)
    return psi, omega


class _BeamTerms:
    """Beam-pattern MSE terms with A(theta) = P I (x) a a^H and D(theta) = P d I."""

    def __init__(self, mask: BeamMask, array: UlaArray, cfg: SystemConfig):
        self.steer = array.steering(mask.grid.angles)  # (L, N)
        self.d = np.asarray(mask.values)
        self.p = cfg.tx_power
        self.num_angles = self.d.size

    def quads(self, x: np.ndarray) -> tuple:
        """(f^H D_l f, f^H A_l f) for every grid angle."""
        fdf = self.p * self.d * np.sum(np.abs(x) ** 2)
        faf = self.p * np.sum(np.abs(self.steer.conj() @ x.T) ** 2, axis=1)
        return fdf, faf

    def weighted_outer(self, w) -> np.ndarray:
        """P sum_l w_l a_l a_l^H."""
        return self.p * (self.steer.T * w) @ self.steer.conj()

    def blocks(self, x: np.ndarray) -> tuple:
        """Shared radar blocks sum_l{(fDf)A + (fAf)D} and sum_l{(fDf)D + (fAf)A}."""
        fdf, faf = self.quads(x)
        eye = np.eye(self.steer.shape[1])
        num = self.weighted_outer(fdf) + self.p * np.dot(faf, self.d) * eye
        den = self.p * np.dot(fdf, self.d) * eye + self.weighted_outer(faf)
        return num, den

    def mse(self, x: np.ndarray) -> float:
        fdf, faf = self.quads(x)
        return float(np.mean((fdf - faf) ** 2))


def _mse_weight(mu: float, num_angles: int, p: float) -> float:
    return 2.0 * mu * LN2 / (num_angles * p**2)


def build_mse_pair(fbar, pairs: Sequence[LiftedPair], mask: BeamMask, array: UlaArray,
                   mu: float, cfg: SystemConfig) -> tuple:
    """Matrices (Psi, Omega) of the MSE-constrained stationarity condition."""
    check_unit_norm(fbar)
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return _mse_builder(_CommTerms(pairs, cfg.num_antennas), _BeamTerms(mask, array, cfg), mu, cfg)(fbar)


def _mse_builder(comm: _CommTerms, beam: _BeamTerms, mu: float, cfg: SystemConfig) -> Builder:
    n_blocks = cfg.num_columns
    weight = _mse_weight(mu, beam.num_angles, cfg.tx_power)

    def build(fbar):
        x = _rows(fbar, n_blocks)
        num, den, corr = comm.blocks(x)
        if weight:
            rnum, rden = beam.blocks(x)
            num = num + weight * rnum
            den = den + weight * rden
        return _assemble(num, den, corr, n_blocks)

    return build


class _EchoTerms:
    """SCNR terms built from Gbar_tar and Gbar_cl (identical blocks)."""

    def __init__(self, radar: LiftedRadarPair):
        self.tar = radar.Gbar_tar.blocks[0]
        self.cl = radar.Gbar_cl.blocks[0]
        self.floor_scale = float(np.max(np.abs(self.tar)))

    def quads(self, x: np.ndarray) -> tuple:
        gram = x.T @ x.conj()
        tar = float(np.real(np.einsum("ij,ji->", self.tar, gram)))
        cl = float(np.real(np.einsum("ij,ji->", self.cl, gram)))
        return tar, cl

    def blocks(self, x: np.ndarray) -> tuple:
        tar, cl = self.quads(x)
        if tar <= 1e-12 * np.sum(np.abs(x) ** 2) * self.floor_scale:
            raise DegenerateTargetError("beamformer carries no power toward the targets")
        return self.tar / tar, self.cl / cl


def build_scnr_pair(fbar, pairs: Sequence[LiftedPair], radar: LiftedRadarPair, mu: float,
                    cfg: SystemConfig) -> tuple:
    """Matrices (Upsilon, Xi) of the SCNR-constrained stationarity condition."""
    check_unit_norm(fbar)
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return _scnr_builder(_CommTerms(pairs, cfg.num_antennas), _EchoTerms(radar), mu, cfg)(fbar)


def _scnr_builder(comm: _CommTerms, echo: _EchoTerms, mu: float, cfg: SystemConfig) -> Builder:
    n_blocks = cfg.num_columns

    def build(fbar):
        x = _rows(fbar, n_blocks)
        num, den, corr = comm.blocks(x)
        if mu:
            rnum, rden = echo.blocks(x)
            num = num + mu * rnum
            den = den + mu * rden
        return _assemble(num, den, corr, n_blocks)

    return build


# ------------------------------------------------------------------ power iteration

def canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate v so that its largest-magnitude entry is real and nonnegative."""
    i = int(np.argmax(np.abs(v)))
    a = np.abs(v[i])
    return v if a == 0 else v * (np.conj(v[i]) / a)


def _align(v: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Rotate v by the global phase that minimizes ||v - ref||."""
    inner = np.vdot(v, ref)
    a = np.abs(inner)
    return v if a == 0 else v * (inner / a)


def nepv_residual(builder: Builder, fbar) -> tuple:
    """(||Omega^{-1} Psi f - lam f||, lam) with lam = f^H Omega^{-1} Psi f, at unit f."""
    psi, omega = builder(fbar)
    v = omega.solve(psi.matvec(fbar))
    lam = np.vdot(fbar, v)
    return float(np.linalg.norm(v - lam * fbar)), float(lam.real)


def gpi_iterate(builder: Builder, f0, tol: float = 1e-3, max_iter: int = 20) -> GpiResult:
    """Normalized fixed-point iteration f <- Omega(f)^{-1} Psi(f) f / ||.||.

    Stops once two consecutive phase-aligned iterates differ by less than
    ``tol`` or after ``max_iter`` updates.
    """
    f = np.asarray(f0, dtype=complex)
    f = f / np.linalg.norm(f)
    converged = False
    t = 0
    for t in range(1, max_iter + 1):
        psi, omega = builder(f)
        v = omega.solve(psi.matvec(f))
        f_new = _align(v / np.linalg.norm(v), f)
        step = np.linalg.norm(f_new - f)
        f = f_new
        if step < tol:
            converged = True
            break
    f = canonical_phase(f)
    residual, lam = nepv_residual(builder, f)
    return GpiResult(f, residual, t, converged, lam)


# ------------------------------------------------------------------ initialization

def initial_beamformer(cfg: SystemConfig, array: UlaArray, estimates=None,
                       radar_angles: Sequence[float] = (), policy: str = "deterministic",
                       seed=None) -> np.ndarray:
    """Starting stacked vector of unit norm.

    The deterministic policy points user columns along the normalized
    channel estimates and radar columns at ``radar_angles`` (cycled); the
    seeded policy draws IID complex Gaussian entries.
    """
    n = cfg.num_antennas
    if policy == "seeded_random":
        rng = np.random.default_rng(seed)
        f = complex_normal(rng, n * cfg.num_columns)
        return f / np.linalg.norm(f)
    cols = []
    for k in range(cfg.num_users):
        h = np.asarray(estimates[k])
        nrm = np.linalg.norm(h)
        cols.append(h / nrm if nrm > 0 else np.ones(n) / np.sqrt(n))
    angles = list(radar_angles) or [0.0]
    for m in range(cfg.num_radar):
        cols.append(array.steering(angles[m % len(angles)]) / np.sqrt(n))
    f = np.concatenate(cols).astype(complex)
    return f / np.linalg.norm(f)


def _mask_centers(mask: BeamMask) -> list:
    if mask.centers:
        return list(mask.centers)
    return [float(mask.grid.angles[int(np.argmax(mask.values))])]


# ------------------------------------------------------------------ diagnostics

def log2_lambda_mse(fbar, pairs, mask: BeamMask, array: UlaArray, mu: float, t_mse: float,
                    cfg: SystemConfig) -> float:
    """log2 of the MSE-problem eigenvalue: SE bound + mu (T - MSE) / P^2."""
    return lagrangian_mse(fbar, pairs, mask, array, mu, t_mse, cfg)


def lagrangian_mse(fbar, pairs, mask: BeamMask, array: UlaArray, mu: float, t_mse: float,
                   cfg: SystemConfig) -> float:
    """L(f; mu) = sum_k log2(fB_kf / fC_kf) + mu (T - MSE(f)) / P^2, any f."""
    comm = _CommTerms(pairs, cfg.num_antennas)
    beam = _BeamTerms(mask, array, cfg)
    x = _rows(fbar, cfg.num_columns)
    value = 0.0
    if comm.num_users:
        b, c = comm.quads(x)
        value += float(np.sum(np.log2(b / c)))
    return value + mu * (t_mse - beam.mse(x)) / cfg.tx_power**2


def lagrangian_scnr(fbar, pairs, radar: LiftedRadarPair, mu: float, t_scnr: float,
                    cfg: SystemConfig) -> float:
    """sum_k log2(fB_kf / fC_kf) + mu (log2 SCNR(f) - log2 T)."""
    comm = _CommTerms(pairs, cfg.num_antennas)
    echo = _EchoTerms(radar)
    x = _rows(fbar, cfg.num_columns)
    value = 0.0
    if comm.num_users:
        b, c = comm.quads(x)
        value += float(np.sum(np.log2(b / c)))
    tar, cl = echo.quads(x)
    return value + mu * (np.log2(tar / cl) - np.log2(t_scnr))


def _rate_gradient(pairs, fbar) -> np.ndarray:
    g = np.zeros_like(np.asarray(fbar, dtype=complex))
    for p in pairs:
        bf, cf = p.B.matvec(fbar), p.C.matvec(fbar)
        g += bf / np.vdot(fbar, bf).real - cf / np.vdot(fbar, cf).real
    return g


def lagrangian_gradient_mse(fbar, pairs, mask: BeamMask, array: UlaArray, mu: float,
                            cfg: SystemConfig) -> np.ndarray:
    """Gradient of :func:`lagrangian_mse` in real coordinates.

    Entry n is dL/dRe(f_n) + j dL/dIm(f_n), i.e. twice the Wirtinger
    derivative with respect to conj(f).
    """
    fbar = np.asarray(fbar, dtype=complex)
    beam = _BeamTerms(mask, array, cfg)
    x = _rows(fbar, cfg.num_columns)
    fdf, faf = beam.quads(x)
    err = faf - fdf  # (L,)
    # sum_l err_l (D_l f - A_l f), row-wise over the columns of F
    d_part = cfg.tx_power * np.dot(err, beam.d) * x
    proj = beam.steer.conj() @ x.T  # (L, B): a_l^H f_j
    a_part = cfg.tx_power * (beam.steer.T @ (err[:, None] * proj)).T
    radar = (d_part - a_part).reshape(-1)
    bracket = _rate_gradient(pairs, fbar) + _mse_weight(mu, beam.num_angles, cfg.tx_power) * radar
    return 2.0 / LN2 * bracket


def lagrangian_gradient_scnr(fbar, pairs, radar: LiftedRadarPair, mu: float,
                             cfg: SystemConfig) -> np.ndarray:
    """Gradient of :func:`lagrangian_scnr` in the same convention as the MSE variant."""
    fbar = np.asarray(fbar, dtype=complex)
    bracket = _rate_gradient(pairs, fbar)
    if mu:
        tf, cf = radar.Gbar_tar.matvec(fbar), radar.Gbar_cl.matvec(fbar)
        bracket = bracket + mu * (tf / np.vdot(fbar, tf).real - cf / np.vdot(fbar, cf).real)
    return 2.0 / LN2 * bracket


# ------------------------------------------------------------------ ISAC solvers

def _bisect(run: Callable[..., tuple], f0: np.ndarray, scfg: SolverConfig) -> tuple:
    """Multiplier search shared by the MSE and SCNR problems.

    ``run(mu, f, max_iter)`` returns ``(GpiResult, feasible)``.  Starting at
    mu_max, a feasible point moves mu toward the lower end of the bracket, an
    infeasible one toward the upper end; the bracket halves every step.
    If every step was feasible, mu_min is tried once more from ``f0`` and
    kept when feasible (a slack constraint has a zero multiplier).
    Returns ``(chosen, feasible, trace, inner)`` where ``chosen`` is the
    last feasible ``(mu, GpiResult)`` pair, or the final pair if none was
    feasible.
    """
    lo, hi = scfg.mu_min, scfg.mu_max
    mu = scfg.mu_max
    f = f0
    best = last = None
    trace, inner = [], []
    for n in range(1, scfg.outer_max + 1):
        res, feasible = run(mu, f, scfg.inner_max)
        iters = res.iterations
        if not res.converged and scfg.polish_max:
            res, feasible = run(mu, res.fbar, scfg.polish_max)
            iters += res.iterations
        f = res.fbar
        last = (mu, res)
        trace.append(mu)
        inner.append(iters)
        log.debug("outer %d: mu=%.6g feasible=%s gpi_iters=%d", n, mu, feasible, res.iterations)
        if feasible:
            best = (mu, res)
            hi = mu
        else:
            lo = mu
            if n == 1:
                break  # infeasible even at mu_max
        new_mu = (lo + hi) / 2
        if abs(new_mu - mu) <= scfg.outer_tol:
            break
        mu = new_mu
    if best is None:
        return last, False, trace, inner
    if lo == scfg.mu_min and best[0] > scfg.mu_min:
        # every step was feasible: the constraint may be slack, so try mu_min
        # from the initial point instead of the radar-weighted warm start
        res, feasible = run(scfg.mu_min, f0, scfg.inner_max)
        iters = res.iterations
        if not res.converged and scfg.polish_max:
            res, feasible = run(scfg.mu_min, res.fbar, scfg.polish_max)
            iters += res.iterations
        trace.append(scfg.mu_min)
        inner.append(iters)
        if feasible and res.converged:
            best = (scfg.mu_min, res)
    return best, True, trace, inner


def _report(constraint, chosen, feasible, pairs, cfg, trace, inner, **extra) -> SolveReport:
    mu, res = chosen
    fbar = res.fbar
    se = float(sum(np.log2(p.B.quad(fbar) / p.C.quad(fbar)) for p in pairs))
    return SolveReport(
        beamformer=StackedBeamformer.from_vec(fbar, cfg.num_antennas, cfg.num_users),
        mu=float(mu), se_lb=se, constraint=constraint,
        stationarity_residual=res.residual, inner_iterations=inner, mu_trace=trace,
        feasible=feasible, inner_converged=res.converged, **extra)


def _check_users(chset: ChannelSet, cfg: SystemConfig) -> None:
    if cfg.num_users < 1:
        raise ValueError("the sum-rate objective needs at least one user")
    if chset.num_users != cfg.num_users or chset.num_antennas != cfg.num_antennas:
        raise ValueError("channel set does not match the system configuration")


def solve_isac_mse(chset: ChannelSet, mask: BeamMask, array: UlaArray, t_mse: float,
                   cfg: SystemConfig, scfg: SolverConfig = SolverConfig(), f0=None,
                   use_error_cov: bool = True) -> SolveReport:
    """Maximize the sum-SE lower bound subject to beam-pattern MSE <= ``t_mse``."""
    _check_users(chset, cfg)
    if not t_mse > 0:
        raise ValueError("t_mse must be positive")
    if not use_error_cov:
        chset = chset.without_error_cov()
    pairs = lifted_pairs(chset, cfg)
    comm, beam = _CommTerms(pairs, cfg.num_antennas), _BeamTerms(mask, array, cfg)
    if f0 is None:
        f0 = initial_beamformer(cfg, array, chset.estimate, _mask_centers(mask),
                                scfg.init_policy, scfg.init_seed)

    def run(mu, f, max_iter):
        res = gpi_iterate(_mse_builder(comm, beam, mu, cfg), f, scfg.inner_tol, max_iter)
        return res, beam.mse(_rows(res.fbar, cfg.num_columns)) <= t_mse

    chosen, feasible, trace, inner = _bisect(run, f0, scfg)
    mse = beam.mse(_rows(chosen[1].fbar, cfg.num_columns))
    report = _report("mse", chosen, feasible, pairs, cfg, trace, inner,
                     nmse_db=float(db(mse / cfg.tx_power**2)))
    report.log2_lambda = report.se_lb + report.mu * (t_mse - mse) / cfg.tx_power**2
    return report


def solve_isac_scnr(chset: ChannelSet, scene: RadarScene, array: UlaArray, t_scnr: float,
                    cfg: SystemConfig, scfg: SolverConfig = SolverConfig(), f0=None,
                    use_error_cov: bool = True) -> SolveReport:
    """Maximize the sum-SE lower bound subject to SCNR >= ``t_scnr`` (linear)."""
    _check_users(chset, cfg)
    scene.require_target()
    if not t_scnr > 0:
        raise ValueError("t_scnr must be positive")
    if not use_error_cov:
        chset = chset.without_error_cov()
    pairs = lifted_pairs(chset, cfg)
    radar = lifted_radar_pair(scene, array, cfg)
    comm, echo = _CommTerms(pairs, cfg.num_antennas), _EchoTerms(radar)
    if f0 is None:
        f0 = initial_beamformer(cfg, array, chset.estimate, scene.target_angles,
                                scfg.init_policy, scfg.init_seed)

    def ratio(f):
        tar, cl = echo.quads(_rows(f, cfg.num_columns))
        return tar / cl

    def run(mu, f, max_iter):
        res = gpi_iterate(_scnr_builder(comm, echo, mu, cfg), f, scfg.inner_tol, max_iter)
        return res, ratio(res.fbar) >= t_scnr

    chosen, feasible, trace, inner = _bisect(run, f0, scfg)
    gamma = ratio(chosen[1].fbar)
    report = _report("scnr", chosen, feasible, pairs, cfg, trace, inner,
                     scnr_db=float(db(gamma)))
    report.log2_lambda = report.se_lb + report.mu * (np.log2(gamma) - np.log2(t_scnr))
    return report


def solve_comm(chset: ChannelSet, array: UlaArray, cfg: SystemConfig,
               scfg: SolverConfig = SolverConfig(), f0=None,
               use_error_cov: bool = True) -> SolveReport:
    """Communication-only GPI precoding (no radar constraint, mu = 0)."""
    _check_users(chset, cfg)
    if not use_error_cov:
        chset = chset.without_error_cov()
    pairs = lifted_pairs(chset, cfg)
    comm = _CommTerms(pairs, cfg.num_antennas)
    if f0 is None:
        f0 = initial_beamformer(cfg, array, chset.estimate, (), scfg.init_policy,
                                scfg.init_seed)
    n_blocks = cfg.num_columns

    def build(f):
        num, den, corr = comm.blocks(_rows(f, n_blocks))
        return _assemble(num, den, corr, n_blocks)

    res = gpi_iterate(build, f0, scfg.inner_tol, scfg.inner_max)
    iters = res.iterations
    if not res.converged and scfg.polish_max:
        res = gpi_iterate(build, res.fbar, scfg.inner_tol, scfg.polish_max)
        iters += res.iterations
    report = _report("none", (0.0, res), True, pairs, cfg, [0.0], [iters])
    report.log2_lambda = report.se_lb
    return report


# ------------------------------------------------------------------ radar only

def solve_radar_mse(mask: BeamMask, array: UlaArray, cfg: SystemConfig,
                    scfg: SolverConfig = SolverConfig(), f0=None,
                    return_result: bool = False):
    """Beam-pattern MSE minimization with every column devoted to sensing.

    ``cfg.num_columns`` sets the number of beamforming columns; users, if
    any, are ignored by the objective.
    """
    if mask.is_zero:
        raise ValueError("radar-only MSE design needs a nonzero beam mask")
    beam = _BeamTerms(mask, array, cfg)
    n_blocks = cfg.num_columns
    if f0 is None:
        radar_cfg = SystemConfig(cfg.num_antennas, 0, n_blocks, cfg.tx_power,
                                 cfg.noise_comm, cfg.noise_radar)
        f0 = initial_beamformer(radar_cfg, array, None, _mask_centers(mask),
                                scfg.init_policy, scfg.init_seed)

    def build(f):
        num, den = beam.blocks(_rows(f, n_blocks))
        return (BlockDiagHermitian.from_shared(num, n_blocks),
                BlockDiagHermitian.from_shared(den, n_blocks))

    res = gpi_iterate(build, f0, scfg.inner_tol, scfg.inner_max)
    if not res.converged and scfg.polish_max:
        more = gpi_iterate(build, res.fbar, scfg.inner_tol, scfg.polish_max)
        res = GpiResult(more.fbar, more.residual, res.iterations + more.iterations,
                        more.converged, more.eigenvalue)
    bf = StackedBeamformer.from_vec(res.fbar, cfg.num_antennas, cfg.num_users)
    return (bf, res) if return_result else bf


def principal_generalized_eigvec(num, den) -> tuple:
    """Top eigenpair of the Hermitian-definite pencil (num, den) via Cholesky whitening."""
    chol = np.linalg.cholesky(den)
    inv = np.linalg.inv(chol)
    w, u = np.linalg.eigh(inv @ num @ inv.conj().T)
    v = inv.conj().T @ u[:, -1]
    return float(w[-1]), v / np.linalg.norm(v)


def solve_radar_scnr(scene: RadarScene, array: UlaArray, cfg: SystemConfig,
                     scfg: SolverConfig = SolverConfig(), f0=None) -> StackedBeamformer:
    """SCNR maximization with every column devoted to sensing.

    The lifted pencil (Gbar_tar, Gbar_cl) repeats one N x N pencil on every
    block, so each column of the optimum is proportional to that pencil's
    principal eigenvector v.  Power iteration from ``f0`` converges to
    c (x) v with c_j = v^H f0_j; that limit is returned directly.
    """
    scene.require_target()
    radar = lifted_radar_pair(scene, array, cfg)
    _, v = principal_generalized_eigvec(radar.Gbar_tar.blocks[0], radar.Gbar_cl.blocks[0])
    if f0 is None:
        radar_cfg = SystemConfig(cfg.num_antennas, 0, cfg.num_columns, cfg.tx_power,
                                 cfg.noise_comm, cfg.noise_radar)
        f0 = initial_beamformer(radar_cfg, array, None, scene.target_angles,
                                scfg.init_policy, scfg.init_seed)
    weights = _rows(f0, cfg.num_columns) @ v.conj()
    if np.linalg.norm(weights) < 1e-12:
        weights = np.ones(cfg.num_columns)
    fbar = np.kron(weights / np.linalg.norm(weights), v)
    return StackedBeamformer.from_vec(canonical_phase(fbar), cfg.num_antennas, cfg.num_users)


def radar_report(bf: StackedBeamformer, mask: Optional[BeamMask], scene: Optional[RadarScene],
                 array: UlaArray, cfg: SystemConfig, constraint: str) -> SolveReport:
    """Wrap a radar-only beamformer in a report (SE fields are zero)."""
    from .metrics import scnr as _scnr

    nmse = beam_nmse_db(bf, mask, array, cfg) if mask is not None else None
    scnr_db = float(db(_scnr(bf, scene, array, cfg))) if scene is not None and scene.targets else None
    return SolveReport(beamformer=bf, mu=float("nan"), se_lb=0.0, constraint=constraint,
                       nmse_db=nmse, scnr_db=scnr_db)


__all__ = [
    "DegenerateTargetError",
    "GpiResult",
    "SolveReport",
    "SolverConfig",
    "build_mse_pair",
    "build_scnr_pair",
    "canonical_phase",
    "gpi_iterate",
    "initial_beamformer",
    "lagrangian_gradient_mse",
    "lagrangian_gradient_scnr",
    "lagrangian_mse",
    "lagrangian_scnr",
    "log2_lambda_mse",
    "nepv_residual",
    "principal_generalized_eigvec",
    "radar_report",
    "solve_comm",
    "solve_isac_mse",
    "solve_isac_scnr",
    "solve_radar_mse",
    "solve_radar_scnr",
]
