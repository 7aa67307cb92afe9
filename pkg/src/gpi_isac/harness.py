"""Monte Carlo experiment driver.

A sweep visits every (SNR, kappa, threshold) point, runs ``trials`` channel
realizations at each, and records per-trial metrics.  Trial ``t`` always
uses seed ``base_seed + t``, so every sweep point sees the same channels and
results are reproducible regardless of thread count.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np
from scipy.stats import ncx2

from .arraygeom import BeamMask, RadarScene, UlaArray
from .channel import PathProfile, generate_channel_set
from .metrics import (
    StackedBeamformer,
    SystemConfig,
    average_se,
    beam_nmse_db,
    db,
    lifted_pairs,
    scnr,
    se_lower_bound,
    sum_se,
    target_scnrs,
    undb,
)
from .solver import (
    SolveReport,
    SolverConfig,
    radar_report,
    solve_comm,
    solve_isac_mse,
    solve_isac_scnr,
    solve_radar_mse,
    solve_radar_scnr,
)

log = logging.getLogger(__name__)

CONSTRAINTS = ("mse", "scnr", "none", "radar_only_mse", "radar_only_scnr", "rzf")
_THRESHOLDED = ("mse", "scnr")


# ---------------------------------------------------------------- detection

def marcum_q1(a, b):
    """First-order Marcum Q function Q1(a, b).

    Uses the identity Q1(a, b) = P[X > b^2] for X noncentral chi-square with
    2 degrees of freedom and noncentrality a^2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("Marcum Q arguments must be nonnegative")
    a, b = np.broadcast_arrays(a, b)
    # The chi-square density is at most exp(-(a - sqrt(x))^2 / 2) / 2, so
    # 1 - Q1 <= b^2 exp(-(a - b)^2 / 2) / 2 for b < a.  Below 1e-17 the result
    # is 1 in double precision; scipy's ncx2.sf overflows in part of that region.
    with np.errstate(divide="ignore"):
        log_tail = np.log(0.5) + 2.0 * np.log(b) - 0.5 * (a - b) ** 2
    one = (b < a) & (log_tail < np.log(1e-17))
    # scipy is inaccurate for subnormal noncentrality; first-order expansion
    # of the Poisson mixture instead (error O(a^4 b^4))
    tiny = ~one & (a * a < 1e-20)
    out = np.ones(a.shape)
    out[tiny] = np.exp(-0.5 * b[tiny] ** 2) * (1.0 + 0.25 * (a[tiny] * b[tiny]) ** 2)
    rest = ~(one | tiny)
    if np.any(rest):
        out[rest] = ncx2.sf(b[rest] ** 2, 2, a[rest] ** 2)
    return float(out) if out.ndim == 0 else out


def detection_threshold(p_fa: float) -> float:
    """b = sqrt(-2 ln p_fa), so that Q1(0, b) = p_fa."""
    if not 0.0 < p_fa < 1.0:
        raise ValueError(f"p_fa must lie in (0, 1), got {p_fa!r}")
    return math.sqrt(-2.0 * math.log(p_fa))


def pd_from_scnr(gamma, p_fa: float = 1e-4):
    """Detection probability of a nonfluctuating target at SCNR ``gamma``."""
    b = detection_threshold(p_fa)
    gamma = np.asarray(gamma, dtype=float)
    pd = np.asarray(marcum_q1(np.sqrt(2.0 * np.clip(gamma, 0.0, None)), b), dtype=float)
    # Q1(0, b) = exp(-b^2/2) analytically; pin it to avoid a rounding ulp
    pd = np.where(gamma == 0, p_fa, pd)
    return float(pd) if pd.ndim == 0 else pd


def detection_probability(F, scene: RadarScene, array: UlaArray, cfg: SystemConfig,
                          p_fa: float = 1e-4) -> tuple:
    """Per-target, worst and average detection probability.

    Each target's SCNR counts that target alone in the numerator and all
    clutter plus noise in the denominator.
    """
    detection_threshold(p_fa)
    gammas = target_scnrs(F, scene, array, cfg)
    pd = np.atleast_1d(pd_from_scnr(gammas, p_fa))
    return [float(p) for p in pd], float(pd.min()), float(pd.mean())


# ---------------------------------------------------------------- baseline

def rzf_baseline(estimates, cfg: SystemConfig) -> StackedBeamformer:
    """Regularized zero-forcing on the channel estimates; radar columns are zero.

    Column k is proportional to (H H^H + (K sigma^2 / P) I)^{-1} h_k with the
    estimates as the columns of H.  The stack is scaled to unit power.
    """
    h = np.atleast_2d(np.asarray(estimates, dtype=complex))  # (K, N)
    k_users, n = h.shape
    if k_users < 1:
        raise ValueError("RZF needs at least one user")
    gram = h.T @ h.conj() + k_users * cfg.inv_snr * np.eye(n)  # sum_k h_k h_k^H + reg
    comm = np.linalg.solve(gram, h.T)
    comm /= np.linalg.norm(comm, axis=0)
    F = np.zeros((n, k_users + cfg.num_radar), dtype=complex)
    F[:, :k_users] = comm
    return StackedBeamformer(F, k_users).normalized()


# ---------------------------------------------------------------- experiment

@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce a sweep.

    ``system`` fixes N, K and M and the noise levels; its ``tx_power`` is
    replaced at each SNR point.  ``thresholds_db`` holds NMSE targets (dB)
    for ``mse`` and SCNR targets (dB) for ``scnr``; other kinds ignore it.
    When ``profiles`` is None every trial draws fresh random path profiles.
    """

    system: SystemConfig
    constraint: str = "mse"
    snr_db: tuple = (20.0,)
    kappas: tuple = (0.0,)
    thresholds_db: tuple = (float("nan"),)
    trials: int = 1
    base_seed: int = 0
    mask: Optional[BeamMask] = None
    scene: Optional[RadarScene] = None
    profiles: Optional[tuple] = None
    num_paths: int = 4
    path_span: float = np.pi / 3
    element_spacing: float = 0.5
    solver: SolverConfig = field(default_factory=SolverConfig)
    use_error_cov: bool = True
    se_draws: int = 100
    p_fa: float = 1e-4
    name: str = "experiment"

    def __post_init__(self):
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"constraint must be one of {CONSTRAINTS}, got {self.constraint!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        for name in ("snr_db", "kappas", "thresholds_db"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, vals)
        if any(not 0.0 <= k <= 1.0 for k in self.kappas):
            raise ValueError("kappa values must lie in [0, 1]")
        if self.constraint in _THRESHOLDED and any(math.isnan(t) for t in self.thresholds_db):
            raise ValueError(f"constraint {self.constraint!r} needs thresholds_db")
        if self.constraint in ("mse", "radar_only_mse") and self.mask is None:
            raise ValueError(f"constraint {self.constraint!r} needs a beam mask")
        if self.constraint in ("scnr", "radar_only_scnr"):
            if self.scene is None or not self.scene.targets:
                raise ValueError(f"constraint {self.constraint!r} needs a scene with a target")
        if self.constraint in ("mse", "scnr", "none", "rzf") and self.system.num_users < 1:
            raise ValueError(f"constraint {self.constraint!r} needs at least one user")
        if self.profiles is not None:
            profs = tuple(self.profiles)
            if len(profs) != self.system.num_users:
                raise ValueError("need one path profile per user")
            object.__setattr__(self, "profiles", profs)
        if self.se_draws < 0:
            raise ValueError("se_draws must be nonnegative")
        if not 0.0 < self.p_fa < 1.0:
            raise ValueError("p_fa must lie in (0, 1)")

    @property
    def array(self) -> UlaArray:
        return UlaArray(self.system.num_antennas, self.element_spacing)

    def points(self) -> list:
        """Sweep points as (snr_db, kappa, threshold_db) in emission order."""
        thr = self.thresholds_db if self.constraint in _THRESHOLDED else (float("nan"),)
        return list(itertools.product(self.snr_db, self.kappas, thr))


@dataclass
class TrialRecord:
    """Metrics of one trial at one sweep point.

    ``se_true`` is the sum SE on the true channels, ``se_mc`` the Monte Carlo
    average over fresh error draws around the estimates, and ``se_lb`` the
    solver's lower bound.  Metrics that do not apply are None; a failed
    trial has NaN metrics, ``converged`` False and a message in ``error``.
    """

    constraint: str
    snr_db: float
    kappa: float
    threshold_db: Optional[float]
    trial: int
    seed: int
    se_lb: Optional[float] = None
    se_true: Optional[float] = None
    se_mc: Optional[float] = None
    se_mc_stderr: Optional[float] = None
    nmse_db: Optional[float] = None
    scnr_db: Optional[float] = None
    pd_worst: Optional[float] = None
    pd_average: Optional[float] = None
    mu: Optional[float] = None
    iterations: Optional[int] = None
    wall_time: Optional[float] = None
    feasible: bool = True
    converged: bool = True
    error: str = ""


METRICS = ("se_lb", "se_true", "se_mc", "nmse_db", "scnr_db", "pd_worst", "pd_average",
           "mu", "iterations", "wall_time")


def _trial_profiles(spec: ExperimentSpec, rng) -> list:
    if spec.profiles is not None:
        return list(spec.profiles)
    return [PathProfile.random(rng, spec.num_paths, spec.path_span)
            for _ in range(spec.system.num_users)]


def trial_setup(spec: ExperimentSpec, snr_db: float, kappa: float, trial: int) -> tuple:
    """Channels for one trial: returns ``(cfg, chset, mc_rng)``.

    ``chset`` is None when the system has no users.  ``mc_rng`` drives the
    Monte Carlo SE draws and is independent of the channel stream.
    """
    s = spec.system
    cfg = SystemConfig.from_snr_db(s.num_antennas, s.num_users, s.num_radar, snr_db,
                                   s.noise_comm, s.noise_radar)
    chan_ss, mc_ss = np.random.SeedSequence(spec.base_seed + trial).spawn(2)
    rng = np.random.default_rng(chan_ss)
    profiles = _trial_profiles(spec, rng)
    chset = generate_channel_set(profiles, spec.array, kappa, rng) if profiles else None
    return cfg, chset, np.random.default_rng(mc_ss)


def solve_point(spec: ExperimentSpec, chset, cfg: SystemConfig,
                threshold_db: Optional[float] = None) -> SolveReport:
    """Run the solver selected by ``spec.constraint`` for one channel draw."""
    array = spec.array
    kind = spec.constraint
    scfg = spec.solver
    if kind in ("mse", "scnr", "none"):
        if kind == "mse":
            t = float(undb(threshold_db)) * cfg.tx_power**2
            rep = solve_isac_mse(chset, spec.mask, array, t, cfg, scfg,
                                 use_error_cov=spec.use_error_cov)
        elif kind == "scnr":
            rep = solve_isac_scnr(chset, spec.scene, array, float(undb(threshold_db)), cfg,
                                  scfg, use_error_cov=spec.use_error_cov)
        else:
            rep = solve_comm(chset, array, cfg, scfg, use_error_cov=spec.use_error_cov)
        # fill in whichever radar metric the solver did not constrain
        if rep.nmse_db is None and spec.mask is not None:
            rep.nmse_db = beam_nmse_db(rep.beamformer, spec.mask, array, cfg)
        if rep.scnr_db is None and spec.scene is not None and spec.scene.targets:
            rep.scnr_db = float(db(scnr(rep.beamformer, spec.scene, array, cfg)))
        return rep
    iters, ok = [], True
    if kind == "radar_only_mse":
        bf, res = solve_radar_mse(spec.mask, array, cfg, scfg, return_result=True)
        iters, ok = [res.iterations], res.converged
    elif kind == "radar_only_scnr":
        bf = solve_radar_scnr(spec.scene, array, cfg, scfg)
    else:
        bf = rzf_baseline(chset.estimate, cfg)
    rep = radar_report(bf, spec.mask, spec.scene, array, cfg, kind)
    if chset is not None:
        rep.se_lb = se_lower_bound(lifted_pairs(chset, cfg), bf.vec)
    rep.inner_iterations, rep.inner_converged = iters, ok
    return rep


def run_trial(spec: ExperimentSpec, point: tuple, trial: int) -> TrialRecord:
    """One trial at one sweep point; exceptions become a failed record."""
    snr_db, kappa, thr = point
    rec = TrialRecord(spec.constraint, snr_db, kappa,
                      None if math.isnan(thr) else thr, trial, spec.base_seed + trial)
    t0 = time.perf_counter()
    try:
        array = spec.array
        cfg, chset, mc_rng = trial_setup(spec, snr_db, kappa, trial)
        rep = solve_point(spec, chset, cfg, thr)
        bf = rep.beamformer
        rec.mu = None if math.isnan(rep.mu) else rep.mu
        rec.iterations = int(sum(rep.inner_iterations))
        rec.feasible, rec.converged = bool(rep.feasible), bool(rep.converged)
        if chset is not None:
            rec.se_lb = rep.se_lb
            rec.se_true = sum_se(chset.true, bf, cfg)
            if spec.se_draws:
                rec.se_mc, rec.se_mc_stderr = average_se(chset, bf, cfg, spec.se_draws, mc_rng)
        if spec.mask is not None:
            rec.nmse_db = beam_nmse_db(bf, spec.mask, array, cfg)
        if spec.scene is not None and spec.scene.targets:
            rec.scnr_db = float(db(scnr(bf, spec.scene, array, cfg)))
            _, rec.pd_worst, rec.pd_average = detection_probability(bf, spec.scene, array,
                                                                    cfg, spec.p_fa)
    except Exception as exc:  # recorded, never raised
        log.warning("trial %d at %s failed: %s", trial, point, exc)
        for name in METRICS:
            if name not in ("wall_time", "iterations"):
                setattr(rec, name, float("nan"))
        rec.feasible = rec.converged = False
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.wall_time = time.perf_counter() - t0
    return rec


def run_sweep(spec: ExperimentSpec, threads: int = 1) -> list:
    """Run every trial at every sweep point.

    Records come back grouped by sweep point (in :meth:`ExperimentSpec.points`
    order) and by trial index within a point, whatever the thread count.
    """
    jobs = [(p, t) for p in spec.points() for t in range(spec.trials)]
    if threads <= 1:
        return [run_trial(spec, p, t) for p, t in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: run_trial(spec, *job), jobs))


def aggregate(records: Sequence[TrialRecord]) -> list:
    """Mean and standard deviation of every metric per sweep point.

    NaN and absent values are skipped; ``n`` counts trials, ``n_converged``
    the converged ones.
    """
    groups = {}
    for r in records:
        groups.setdefault((r.constraint, r.snr_db, r.kappa, r.threshold_db), []).append(r)
    rows = []
    for (kind, snr_db, kappa, thr), recs in groups.items():
        row = {"constraint": kind, "snr_db": snr_db, "kappa": kappa, "threshold_db": thr,
               "n": len(recs), "n_converged": sum(r.converged for r in recs)}
        for name in METRICS:
            vals = np.array([getattr(r, name) for r in recs if getattr(r, name) is not None],
                            dtype=float)
            vals = vals[np.isfinite(vals)]
            row[f"mean_{name}"] = float(vals.mean()) if vals.size else None
            row[f"std_{name}"] = float(vals.std(ddof=1)) if vals.size > 1 else None
        rows.append(row)
    return rows


# ---------------------------------------------------------------- CSV

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def _write_rows(path, header: Sequence[str], rows, comments: Sequence[str]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def emit_csv(records: Sequence[TrialRecord], path, comments: Sequence[str] = (),
             timing: bool = False) -> None:
    """Write one row per record; ``comments`` become leading ``#`` lines.

    The ``wall_time`` column is written only with ``timing=True`` so that
    reruns with the same seed produce byte-identical files.
    """
    names = [f.name for f in fields(TrialRecord) if timing or f.name != "wall_time"]
    _write_rows(path, names, ([getattr(r, n) for n in names] for r in records), comments)


def emit_summary_csv(rows: Sequence[dict], path, comments: Sequence[str] = (),
                     timing: bool = False) -> None:
    """Write :func:`aggregate` output (timing columns only with ``timing=True``)."""
    if not rows:
        _write_rows(path, ["constraint", "snr_db", "kappa", "threshold_db", "n"], [], comments)
        return
    names = [n for n in rows[0] if timing or not n.endswith("wall_time")]
    _write_rows(path, names, ([row[n] for n in names] for row in rows), comments)


_BOOL_FIELDS = ("feasible", "converged")
_STR_FIELDS = ("constraint", "error")
_INT_FIELDS = ("trial", "seed", "iterations")


def read_csv(path) -> list:
    """Parse a file written by :func:`emit_csv` back into records."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        kw = {}
        for name, text in row.items():
            if name in _STR_FIELDS:
                kw[name] = text
            elif name in _BOOL_FIELDS:
                kw[name] = text == "true"
            elif text == "":
                kw[name] = None
            elif name in _INT_FIELDS:
                kw[name] = int(text)
            else:
                kw[name] = float(text)
        out.append(TrialRecord(**kw))
    return out


def with_system(spec: ExperimentSpec, **changes) -> ExperimentSpec:
    """Copy of ``spec`` with fields of its SystemConfig replaced."""
    return replace(spec, system=replace(spec.system, **changes))
