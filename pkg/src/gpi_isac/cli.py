"""Command-line front end.

Configuration is an INI file with the sections listed in ``SCHEMA``; any
key can also be overridden with ``--set section.key=value``.  Unknown
sections or keys are errors.  Angles are in radians and may be written as
multiples of pi (``pi/6``, ``-0.25*pi``).  Every dB quantity at this
interface is converted to linear scale internally.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .arraygeom import RadarScene, UlaArray, rect_mask, uniform_grid
from .harness import (
    CONSTRAINTS,
    ExperimentSpec,
    aggregate,
    emit_csv,
    emit_summary_csv,
    run_sweep,
    solve_point,
    trial_setup,
)
from .metrics import SystemConfig, beam_pattern, rx_beam_pattern
from .solver import SolveReport, SolverConfig

log = logging.getLogger("gpi_isac")

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists ``(field, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{f}: {m}" for f, m in self.problems))


# ---------------------------------------------------------------- value parsing

_PI_RE = re.compile(r"^([+-]?)\s*(\d*\.?\d*(?:e[+-]?\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d*\.?\d+))?$")


def parse_angle(text: str) -> float:
    text = text.strip().lower()
    m = _PI_RE.match(text)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) else 1.0
        div = float(m.group(3)) if m.group(3) else 1.0
        return sign * coef * np.pi / div
    return float(text)


def _split(text: str) -> list:
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_float_list(text: str) -> list:
    """Comma-separated values; ``start:stop:step`` expands inclusively."""
    out = []
    for tok in _split(text):
        if ":" in tok:
            start, stop, step = (float(x) for x in tok.split(":"))
            if step <= 0 or stop < start:
                raise ValueError(f"bad range {tok!r}")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            out.extend(float(round(start + i * step, 12)) for i in range(n))
        else:
            out.append(float(tok))
    return out


def parse_angle_list(text: str) -> list:
    return [parse_angle(t) for t in _split(text)]


def parse_reflectors(text: str) -> list:
    """``angle:coefficient`` pairs; the coefficient may be complex (``0.5+0.1j``)."""
    out = []
    for tok in _split(text):
        angle, _, coeff = tok.partition(":")
        out.append((parse_angle(angle), complex(coeff.replace(" ", "")) if coeff else 1.0))
    return out


def parse_bool(text: str) -> bool:
    key = text.strip().lower()
    if key not in configparser.ConfigParser.BOOLEAN_STATES:
        raise ValueError(f"not a boolean: {text!r}")
    return configparser.ConfigParser.BOOLEAN_STATES[key]


def parse_optional_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


def _fmt_list(vals) -> str:
    return ", ".join(f"{v:.9g}" for v in vals)


def _fmt_reflectors(items) -> str:
    def coeff(c):
        c = complex(c)
        return f"{c.real:.9g}" if c.imag == 0 else f"{c.real:.9g}{c.imag:+.9g}j"

    return ", ".join(f"{a:.9g}:{coeff(c)}" for a, c in items)


# (parser, formatter, default) per key
_F = (float, lambda v: f"{v:.9g}")
_I = (int, str)
_S = (str, str)
_FL = (parse_float_list, _fmt_list)
_AL = (parse_angle_list, _fmt_list)
_A = (parse_angle, lambda v: f"{v:.9g}")
_R = (parse_reflectors, _fmt_reflectors)
_B = (parse_bool, lambda v: "true" if v else "false")
_OI = (parse_optional_int, lambda v: "none" if v is None else str(v))

SCHEMA = {
    "system": {
        "num_antennas": (*_I, 8),
        "num_users": (*_I, 4),
        "num_radar": (*_I, 8),
        "noise_comm": (*_F, 1.0),
        "noise_radar": (*_F, 1.0),
        "element_spacing": (*_F, 0.5),
    },
    "channel": {
        "kappa": (*_FL, [0.3]),
        "num_paths": (*_I, 4),
        "path_span": (*_A, np.pi / 3),
    },
    "experiment": {
        "name": (*_S, "experiment"),
        "constraint": (*_S, "mse"),
        "snr_db": (*_FL, [20.0]),
        "trials": (*_I, 1),
        "seed": (*_I, 0),
        "se_draws": (*_I, 100),
        "use_error_cov": (*_B, True),
        "p_fa": (*_F, 1e-4),
    },
    "radar": {
        "t_nmse_db": (*_FL, [-7.5]),
        "t_scnr_db": (*_FL, [20.0]),
        "grid_points": (*_I, 256),
        "mask_centers": (*_AL, [-np.pi / 4, 0.0, np.pi / 4]),
        "mask_half_width": (*_A, np.pi / 12),
        "targets": (*_R, [(np.pi / 6, 1.0)]),
        "clutters": (*_R, [(-np.pi / 3, 1.0), (-np.pi / 8, 1.0), (np.pi / 3, 1.0)]),
    },
    "solver": {
        "mu_min": (*_F, 0.0),
        "mu_max": (*_F, 2000.0),
        "inner_tol": (*_F, 1e-3),
        "inner_max": (*_I, 20),
        "outer_tol": (*_F, 1e-3),
        "outer_max": (*_I, 20),
        "polish_max": (*_I, 200),
        "init_policy": (*_S, "deterministic"),
        "init_seed": (*_OI, None),
    },
}


def default_config() -> dict:
    return {sec: {k: d for k, (_, _, d) in keys.items()} for sec, keys in SCHEMA.items()}


def _apply(cfg: dict, section: str, key: str, text: str, problems: list) -> None:
    if section not in SCHEMA:
        problems.append((section, "unknown section"))
        return
    if key not in SCHEMA[section]:
        problems.append((f"{section}.{key}", "unknown key"))
        return
    parse = SCHEMA[section][key][0]
    try:
        cfg[section][key] = parse(text)
    except (ValueError, TypeError) as exc:
        problems.append((f"{section}.{key}", f"cannot parse {text!r}: {exc}"))


def load_config(path=None, overrides=()) -> dict:
    """Defaults, then the INI file at ``path``, then ``section.key=value`` overrides."""
    cfg = default_config()
    problems = []
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError([("--config", f"cannot read {path}: {exc}")]) from None
        except configparser.Error as exc:
            raise ConfigError([("--config", f"malformed file: {exc}")]) from None
        for section in parser.sections():
            for key, text in parser.items(section):
                _apply(cfg, section, key, text, problems)
    for item in overrides:
        name, sep, text = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot:
            problems.append((item, "override must look like section.key=value"))
            continue
        _apply(cfg, section, key, text, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def format_config(cfg: dict) -> str:
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (_, fmt, _) in keys.items():
            lines.append(f"{key} = {fmt(cfg[section][key])}")
        lines.append("")
    return "\n".join(lines)


def build_spec(cfg: dict) -> ExperimentSpec:
    """Validate a resolved config and turn it into an :class:`ExperimentSpec`."""
    problems = []
    sy, ch, ex, ra, so = (cfg[s] for s in ("system", "channel", "experiment", "radar", "solver"))
    kind = ex["constraint"]
    if kind not in CONSTRAINTS:
        problems.append(("experiment.constraint", f"must be one of {', '.join(CONSTRAINTS)}"))
    if kind in ("mse", "radar_only_mse") and not ra["mask_centers"]:
        problems.append(("radar.mask_centers", f"a beam mask is required for constraint {kind!r}"))
    if kind in ("scnr", "radar_only_scnr") and not ra["targets"]:
        problems.append(("radar.targets", f"at least one target is required for constraint {kind!r}"))
    if kind == "mse" and not ra["t_nmse_db"]:
        problems.append(("radar.t_nmse_db", "required for constraint 'mse'"))
    if kind == "scnr" and not ra["t_scnr_db"]:
        problems.append(("radar.t_scnr_db", "required for constraint 'scnr'"))
    if kind in ("mse", "scnr", "none", "rzf") and sy["num_users"] < 1:
        problems.append(("system.num_users", f"constraint {kind!r} needs at least one user"))
    if not ex["snr_db"]:
        problems.append(("experiment.snr_db", "must not be empty"))
    if not ch["kappa"]:
        problems.append(("channel.kappa", "must not be empty"))
    if ex["trials"] < 1:
        problems.append(("experiment.trials", "must be a positive integer"))
    if ex["seed"] < 0:
        problems.append(("experiment.seed", "must be nonnegative"))
    if problems:
        raise ConfigError(problems)

    def guarded(section, make):
        try:
            return make()
        except ValueError as exc:
            problems.append((section, str(exc)))
            return None

    system = guarded("system", lambda: SystemConfig(
        sy["num_antennas"], sy["num_users"], sy["num_radar"],
        noise_comm=sy["noise_comm"], noise_radar=sy["noise_radar"]))
    solver = guarded("solver", lambda: SolverConfig(**so))
    mask = None
    if ra["mask_centers"]:
        mask = guarded("radar", lambda: rect_mask(uniform_grid(ra["grid_points"]),
                                                  ra["mask_centers"], ra["mask_half_width"]))
    scene = guarded("radar", lambda: RadarScene(tuple(ra["targets"]), tuple(ra["clutters"])))
    guarded("system.element_spacing", lambda: UlaArray(1, sy["element_spacing"]))
    if problems:
        raise ConfigError(problems)
    thresholds = {"mse": ra["t_nmse_db"], "scnr": ra["t_scnr_db"]}.get(kind, [float("nan")])
    try:
        return ExperimentSpec(
            system=system, constraint=kind, snr_db=tuple(ex["snr_db"]),
            kappas=tuple(ch["kappa"]), thresholds_db=tuple(thresholds), trials=ex["trials"],
            base_seed=ex["seed"], mask=mask, scene=scene, num_paths=ch["num_paths"],
            path_span=ch["path_span"], element_spacing=sy["element_spacing"], solver=solver,
            use_error_cov=ex["use_error_cov"], se_draws=ex["se_draws"], p_fa=ex["p_fa"],
            name=ex["name"])
    except ValueError as exc:
        raise ConfigError([("experiment", str(exc))]) from None


# ---------------------------------------------------------------- output helpers

def _header(cfg: dict) -> list:
    lines = [f"gpi-isac {__version__}", f"seed: {cfg['experiment']['seed']}"]
    for section, keys in SCHEMA.items():
        body = "; ".join(f"{k}={fmt(cfg[section][k])}" for k, (_, fmt, _) in keys.items())
        lines.append(f"config [{section}] {body}")
    return lines


def _default_path(spec: ExperimentSpec, suffix: str = "") -> Path:
    stamp = time.strftime("%Y%m%dT%H%M%S")
    return Path(f"{spec.name}_{spec.constraint}_{stamp}{suffix}.csv")


def _table(rows, columns) -> str:
    def cell(v):
        if v is None:
            return "-"
        return f"{v:.4g}" if isinstance(v, float) else str(v)

    body = [[cell(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c)
              for i, c in enumerate(columns)]
    out = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    out += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(out)


def _first_point(spec: ExperimentSpec) -> tuple:
    return spec.points()[0]


def _solve_once(spec: ExperimentSpec) -> tuple:
    snr_db, kappa, thr = _first_point(spec)
    cfg, chset, _ = trial_setup(spec, snr_db, kappa, 0)
    return solve_point(spec, chset, cfg, None if np.isnan(thr) else thr), cfg


# ---------------------------------------------------------------- subcommands

def cmd_solve(spec: ExperimentSpec, cfg: dict, args) -> int:
    """Single solve on one channel draw (first SNR, kappa and threshold)."""
    report, _ = _solve_once(spec)
    snr_db, kappa, thr = _first_point(spec)
    print(f"constraint      {spec.constraint}")
    print(f"snr_db          {snr_db:g}   kappa {kappa:g}   threshold_db "
          f"{'-' if np.isnan(thr) else f'{thr:g}'}")
    print(f"se_lower_bound  {report.se_lb:.6f} bits/s/Hz")
    if report.nmse_db is not None:
        print(f"nmse_db         {report.nmse_db:.4f}")
    if report.scnr_db is not None:
        print(f"scnr_db         {report.scnr_db:.4f}")
    print(f"mu              {report.mu:.6g}")
    print(f"iterations      {int(sum(report.inner_iterations))}")
    print(f"converged       {report.converged}")
    if args.out:
        payload = {"version": __version__, "seed": spec.base_seed, "report": report.to_dict()}
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_sweep(spec: ExperimentSpec, cfg: dict, args) -> int:
    records = run_sweep(spec, threads=args.threads)
    rows = aggregate(records)
    path = Path(args.out) if args.out else _default_path(spec)
    emit_csv(records, path, _header(cfg), timing=args.timing)
    emit_summary_csv(rows, path.with_name(path.stem + "_summary.csv"), _header(cfg),
                     timing=args.timing)
    print(_table(rows, ["snr_db", "kappa", "threshold_db", "n", "n_converged", "mean_se_true",
                        "mean_se_mc", "mean_se_lb", "mean_nmse_db", "mean_scnr_db"]))
    return EXIT_OK


def cmd_beampattern(spec: ExperimentSpec, cfg: dict, args) -> int:
    """Normalized transmit beam power and receive beam gain on the angular grid."""
    snr_db = _first_point(spec)[0]
    if args.load:
        payload = json.loads(Path(args.load).read_text(encoding="utf-8"))
        report = SolveReport.from_dict(payload.get("report", payload))
        s = spec.system
        sys_cfg = SystemConfig.from_snr_db(s.num_antennas, s.num_users, s.num_radar, snr_db,
                                           s.noise_comm, s.noise_radar)
    else:
        report, sys_cfg = _solve_once(spec)
    F = report.beamformer
    array = spec.array
    angles = uniform_grid(cfg["radar"]["grid_points"]).angles
    tx = beam_pattern(F, array, angles, sys_cfg)
    rx = rx_beam_pattern(F, spec.scene, array, sys_cfg, angles)
    tx_norm = tx / tx.max() if tx.max() > 0 else tx
    rx_norm = rx / rx.max()
    path = Path(args.out) if args.out else _default_path(spec, "_beampattern")
    rows = zip(angles, np.degrees(angles), tx_norm, rx_norm)
    lines = [f"# {c}" for c in _header(cfg)]
    lines.append("angle_rad,angle_deg,tx_beam_norm,rx_gain_norm")
    lines += [f"{a:.9g},{d:.9g},{t:.9g},{r:.9g}" for a, d, t, r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    peak = angles[int(np.argmax(tx))]
    print(f"wrote {len(angles)} angles to {path}; transmit peak at {peak:.4f} rad")
    return EXIT_OK


def cmd_detect(spec: ExperimentSpec, cfg: dict, args) -> int:
    """Worst and average detection probability across the SNR sweep."""
    if spec.scene is None or not spec.scene.targets:
        raise ConfigError([("radar.targets", "detection needs at least one target")])
    print(f"p_fa = {spec.p_fa:.0e}")
    records = run_sweep(spec, threads=args.threads)
    rows = aggregate(records)
    path = Path(args.out) if args.out else _default_path(spec, "_detect")
    emit_summary_csv(rows, path, _header(cfg), timing=args.timing)
    print(_table(rows, ["snr_db", "kappa", "threshold_db", "n", "mean_scnr_db",
                        "mean_pd_worst", "mean_pd_average"]))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "beampattern": cmd_beampattern,
            "detect": cmd_detect}


# ---------------------------------------------------------------- argument parsing

def _common(suppress: bool) -> argparse.ArgumentParser:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d(None), help="INI configuration file")
    p.add_argument("--seed", type=int, default=d(None), help="base seed (experiment.seed)")
    p.add_argument("--threads", type=int, default=d(os.cpu_count() or 1),
                   help="worker threads for sweeps (default: all cores)")
    p.add_argument("--out", default=d(None), help="output path")
    p.add_argument("--dry-run", action="store_true", default=d(False),
                   help="validate and print the resolved config, write nothing")
    p.add_argument("--show-config", action="store_true", default=d(False),
                   help="print the resolved config and exit")
    p.add_argument("--set", action="append", default=d([]), metavar="SECTION.KEY=VALUE",
                   help="override one config value (repeatable)")
    p.add_argument("--constraint", default=d(None), choices=CONSTRAINTS)
    p.add_argument("--snr-db", default=d(None), help="SNR list in dB (experiment.snr_db)")
    p.add_argument("--kappa", default=d(None), help="CSIT error level(s) (channel.kappa)")
    p.add_argument("--t-nmse-db", default=d(None), help="NMSE target(s) in dB")
    p.add_argument("--t-scnr-db", default=d(None), help="SCNR target(s) in dB")
    p.add_argument("--trials", type=int, default=d(None))
    p.add_argument("--timing", action="store_true", default=d(False),
                   help="include wall-time columns in CSV output")
    p.add_argument("-v", "--verbose", action="count", default=d(0))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpi-isac", parents=[_common(False)],
        description="Joint communication/radar beamforming experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"solve": "single solve on one channel draw",
             "sweep": "Monte Carlo sweep, CSV output",
             "beampattern": "per-angle transmit and receive beam patterns",
             "detect": "detection probability versus SNR"}
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[_common(True)], help=text)
        if name == "beampattern":
            sp.add_argument("--load", default=None, help="saved solve report (JSON)")
    return parser


def _overrides(args) -> list:
    out = list(args.set)
    flag_keys = [("constraint", "experiment.constraint"), ("snr_db", "experiment.snr_db"),
                 ("kappa", "channel.kappa"), ("t_nmse_db", "radar.t_nmse_db"),
                 ("t_scnr_db", "radar.t_scnr_db"), ("trials", "experiment.trials"),
                 ("seed", "experiment.seed")]
    for attr, key in flag_keys:
        val = getattr(args, attr)
        if val is not None:
            out.append(f"{key}={val}")
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.show_config:
            print(format_config(cfg))
            return EXIT_OK
        spec = build_spec(cfg)
        if args.threads < 1:
            raise ConfigError([("--threads", "must be at least 1")])
        if args.dry_run:
            print(format_config(cfg))
            print(f"# dry run: {args.command} over {len(spec.points())} point(s) x "
                  f"{spec.trials} trial(s); nothing written")
            return EXIT_OK
        return COMMANDS[args.command](spec, cfg, args)
    except ConfigError as exc:
        for field_name, msg in exc.problems:
            print(f"config error: {field_name}: {msg}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
