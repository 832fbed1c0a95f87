"""Command-line front end: JSON configs and presets in, CSV spectra and a manifest out.

Config schema
-------------
Every dimensional quantity is written as ``<name>_<unit>`` with unit ``mhz``
(ordinary frequency), ``gamma`` (multiples of the excited-state decay rate) or
``rad_s``. Exactly one unit form may be given per quantity.

``atom``
    ``n_levels`` (3 or 4), ``gamma_exc`` (mhz or rad_s), ``gamma_ground``,
    ``excited_splitting`` (default -63.4 MHz for 4 levels), optional
    ``dipole_weights``, ``branching``, ``ground_equilibrium``.
``laser1`` / ``laser2``
    ``rabi``, ``detuning`` (default 0), ``linewidth_b`` (default 0).
``doppler``
    ``enabled``, ``sigma_kv`` (default 220 MHz), ``n_classes``, ``rule``
    (``gauss-hermite``, ``trapezoid`` or ``tangent``), ``scale`` (trapezoid
    half-width or tangent length scale), ``cross_class``.
``analysis``
    ``freqs_mhz`` (non-empty, increasing), ``probe_mhz`` (sweep summaries).
``sweep`` (optional)
    ``axis``, ``values``, ``unit``; makes ``spectrum`` run a sweep.
``oracle`` (required by the ``oracle`` command)
    ``dt_gamma``, ``total_time_gamma``, ``burn_in_gamma``, ``n_trajectories``,
    ``seed``, ``segment_length``, and optionally ``overlap``, ``window``,
    ``sample_every``, ``kappa``, ``detector_noise``, ``probe_mhz``.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import sys
from importlib import resources
from typing import Optional

import numpy as np

from . import __version__
from .doppler import compute_spectra
from .model import (
    RB85_EXCITED_SPLITTING_MHZ,
    RB85_SIGMA_KV_MHZ,
    AnalysisGrid,
    AtomConfig,
    DopplerSpec,
    LaserField,
    Model,
    ModelError,
    mhz_to_rad,
    rad_to_mhz,
    validate,
)
from .results import SpectrumResult
from .stationary import SolverError

log = logging.getLogger("eitnoise")

SWEEP_AXES = ("rabi", "detuning", "linewidth_b", "gamma_ground", "sigma_kv")
UNITS = ("mhz", "gamma", "rad_s")
CSV_COLUMNS = ("omega_mhz", "S11", "S22", "S12", "Ss", "Sd", "C")
SE_COLUMNS = ("se_S11", "se_S22", "se_S12", "se_C")
PRESETS = ("fig3b", "fig4e", "fig4f", "fig4g", "fig4h", "fig5a", "fig5b", "fig6a", "fig6b")

_TOP_KEYS = {"name", "description", "atom", "laser1", "laser2", "doppler", "analysis", "sweep", "oracle"}
_SECTION_FIELDS = {
    "atom": {"n_levels", "gamma_exc", "gamma_ground", "excited_splitting", "dipole_weights",
             "branching", "ground_equilibrium"},
    "laser1": {"rabi", "detuning", "linewidth_b"},
    "laser2": {"rabi", "detuning", "linewidth_b"},
    "doppler": {"enabled", "sigma_kv", "n_classes", "rule", "scale", "cross_class"},
    "analysis": {"freqs_mhz", "probe_mhz"},
    "sweep": {"axis", "values", "unit"},
    "oracle": {"dt_gamma", "total_time_gamma", "burn_in_gamma", "n_trajectories", "seed",
               "segment_length", "overlap", "window", "sample_every", "kappa", "detector_noise",
               "probe_mhz"},
}
_DIMENSIONAL = {"gamma_exc", "gamma_ground", "excited_splitting", "rabi", "detuning",
                "linewidth_b", "sigma_kv", "scale"}


class ConfigError(ValueError):
    """The configuration is malformed; the message names the offending field."""


# ---------------------------------------------------------------- config parsing


def preset_path(name: str):
    return resources.files("eitnoise").joinpath("presets", f"{name}.json")


def load_config(source: str) -> tuple[dict, str]:
    """Parse a config file or preset name. Returns the raw dict and its origin."""
    if os.path.exists(source):
        origin = source
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    elif source in PRESETS:
        origin = f"preset:{source}"
        text = preset_path(source).read_text(encoding="utf-8")
    else:
        raise ConfigError(f"{source}: no such file or preset (presets: {', '.join(PRESETS)})")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{origin} line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{origin}: top level must be a JSON object")
    return cfg, origin


def _check_keys(section: dict, name: str) -> None:
    allowed = _SECTION_FIELDS[name]
    for key in section:
        base = key
        for unit in UNITS:
            if key.endswith("_" + unit) and key[: -len(unit) - 1] in _DIMENSIONAL:
                base = key[: -len(unit) - 1]
        if base not in allowed or (base in _DIMENSIONAL and base == key):
            raise ConfigError(f"{name}.{key}: unknown field" + (
                f" (dimensional fields need a unit suffix: {', '.join(UNITS)})" if key in _DIMENSIONAL else ""))


def _quantity(section: dict, where: str, name: str, gamma: Optional[float], default=None):
    found = [(u, section[f"{name}_{u}"]) for u in UNITS if f"{name}_{u}" in section]
    if len(found) > 1:
        raise ConfigError(f"{where}.{name}: given in more than one unit")
    if not found:
        if default is None:
            raise ConfigError(f"{where}.{name}: missing (give {name}_mhz, {name}_gamma or {name}_rad_s)")
        return default
    unit, value = found[0]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{name}_{unit}: expected a number, got {value!r}")
    return to_rad(float(value), unit, gamma, f"{where}.{name}_{unit}")


def to_rad(value: float, unit: str, gamma: Optional[float], where: str = "value") -> float:
    if unit == "mhz":
        return mhz_to_rad(value)
    if unit == "rad_s":
        return float(value)
    if unit == "gamma":
        if gamma is None:
            raise ConfigError(f"{where}: cannot be given in units of gamma")
        return float(value) * gamma
    raise ConfigError(f"{where}: unknown unit {unit!r}")


def _section(cfg: dict, name: str, required: bool = True) -> dict:
    sec = cfg.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"{name}: missing section")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: must be an object")
    _check_keys(sec, name)
    return sec


def model_from_config(cfg: dict) -> Model:
    """Build and validate a :class:`Model` from a parsed config."""
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level field(s): {', '.join(sorted(unknown))}")
    atom_s = _section(cfg, "atom")
    n_levels = atom_s.get("n_levels")
    if n_levels not in (3, 4):
        raise ConfigError(f"atom.n_levels: must be 3 or 4, got {n_levels!r}")
    if "gamma_exc_gamma" in atom_s:
        raise ConfigError("atom.gamma_exc: cannot be given in units of gamma")
    gamma = _quantity(atom_s, "atom", "gamma_exc", None)
    default_split = mhz_to_rad(RB85_EXCITED_SPLITTING_MHZ) if n_levels == 4 else 0.0
    atom_kw = dict(
        n_levels=n_levels,
        gamma_exc=gamma,
        gamma_ground=_quantity(atom_s, "atom", "gamma_ground", gamma),
        excited_splitting=_quantity(atom_s, "atom", "excited_splitting", gamma, default_split),
    )
    for key in ("dipole_weights", "branching", "ground_equilibrium"):
        if key in atom_s:
            atom_kw[key] = atom_s[key]
    try:
        atom = AtomConfig(**atom_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"atom: {exc}") from None

    lasers = []
    for label in (1, 2):
        name = f"laser{label}"
        sec = _section(cfg, name)
        lasers.append(LaserField(
            label=label,
            rabi=_quantity(sec, name, "rabi", gamma),
            detuning=_quantity(sec, name, "detuning", gamma, 0.0),
            linewidth_b=_quantity(sec, name, "linewidth_b", gamma, 0.0),
        ))

    dop_s = _section(cfg, "doppler", required=False)
    doppler = DopplerSpec(
        enabled=bool(dop_s.get("enabled", False)),
        sigma_kv=_quantity(dop_s, "doppler", "sigma_kv", gamma, mhz_to_rad(RB85_SIGMA_KV_MHZ)),
        n_classes=int(dop_s.get("n_classes", 1)),
        rule=str(dop_s.get("rule", "gauss-hermite")),
        scale=_quantity(dop_s, "doppler", "scale", gamma, 0.0),
        cross_class=bool(dop_s.get("cross_class", True)),
    )

    ana = _section(cfg, "analysis")
    freqs = ana.get("freqs_mhz")
    if not isinstance(freqs, list) or not freqs:
        raise ConfigError("analysis.freqs_mhz: must be a non-empty list of frequencies in MHz")
    if not all(isinstance(f, (int, float)) and not isinstance(f, bool) for f in freqs):
        raise ConfigError("analysis.freqs_mhz: entries must be numbers")
    model = Model(lasers[0], lasers[1], atom, AnalysisGrid(tuple(mhz_to_rad(np.asarray(freqs, float)))), doppler)
    try:
        return validate(model)
    except ModelError as exc:
        raise ConfigError(str(exc)) from None


def oracle_config_from(cfg: dict, gamma: float, seed_override: Optional[int] = None):
    """Build a :class:`TrajectoryConfig` from the ``oracle`` block."""
    from .oracle import TrajectoryConfig

    if "oracle" not in cfg:
        raise ConfigError("oracle: missing section (required by the oracle command)")
    sec = _section(cfg, "oracle")
    required = ("dt_gamma", "total_time_gamma", "burn_in_gamma", "n_trajectories", "seed", "segment_length")
    for key in required:
        if key not in sec:
            raise ConfigError(f"oracle.{key}: missing")
    kw = {k: sec[k] for k in ("overlap", "window", "sample_every", "kappa", "detector_noise") if k in sec}
    return TrajectoryConfig.from_gamma_units(
        gamma,
        dt=float(sec["dt_gamma"]),
        total_time=float(sec["total_time_gamma"]),
        burn_in=float(sec["burn_in_gamma"]),
        n_trajectories=int(sec["n_trajectories"]),
        seed=int(seed_override if seed_override is not None else sec["seed"]),
        segment_length=int(sec["segment_length"]),
        **kw,
    )


# ---------------------------------------------------------------- sweeps


def apply_axis(model: Model, axis: str, value: float) -> Model:
    """Return ``model`` with one sweep parameter set to ``value`` (rad/s).

    ``rabi`` sets laser 1 and rescales laser 2 to keep their ratio;
    ``detuning`` and ``linewidth_b`` set both lasers.
    """
    l1, l2, atom, dop = model.laser1, model.laser2, model.atom, model.doppler
    rep = dataclasses.replace
    if axis == "rabi":
        if l1.rabi == 0.0:
            raise ConfigError("sweep over rabi needs a nonzero laser1 rabi to fix the laser2/laser1 ratio")
        return validate(model.with_updates(laser1=rep(l1, rabi=value), laser2=rep(l2, rabi=l2.rabi * (value / l1.rabi))))
    if axis == "detuning":
        return validate(model.with_updates(laser1=rep(l1, detuning=value), laser2=rep(l2, detuning=value)))
    if axis == "linewidth_b":
        return validate(model.with_updates(laser1=rep(l1, linewidth_b=value), laser2=rep(l2, linewidth_b=value)))
    if axis == "gamma_ground":
        return validate(model.with_updates(atom=rep(atom, gamma_ground=value)))
    if axis == "sigma_kv":
        return validate(model.with_updates(doppler=rep(dop, sigma_kv=value)))
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")


def parse_values(text: str) -> list:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values: cannot parse {text!r} as a comma-separated list of numbers") from None


# ---------------------------------------------------------------- output


def _fmt(x: float) -> str:
    return "" if not math.isfinite(x) else "%.17g" % x


def format_spectrum_csv(res: SpectrumResult, with_se: bool = False) -> str:
    cols = [rad_to_mhz(res.frequencies), res.S11, res.S22, res.S12, res.Ss, res.Sd, res.C]
    header = list(CSV_COLUMNS)
    if with_se:
        cols += [res.stderr[k] for k in ("S11", "S22", "S12", "C")]
        header += list(SE_COLUMNS)
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(_fmt(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def read_spectrum_csv(path: str) -> dict:
    """Columns of an emitted CSV as float arrays (missing entries become NaN)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) if v else np.nan for v in line.strip().split(",")] for line in fh if line.strip()]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


class RunWriter:
    """Writes data files into ``out_dir`` and records them for the manifest."""

    def __init__(self, out_dir: str, name: str, command: str, raw_config: dict, origin: str):
        self.out_dir = out_dir
        self.name = name
        self.files = []
        os.makedirs(out_dir, exist_ok=True)
        self.manifest = {
            "engine": "eitnoise",
            "version": __version__,
            "command": command,
            "config_origin": origin,
            "config": raw_config,
            "started_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }

    def write(self, filename: str, text: str, role: str, **info) -> str:
        path = os.path.join(self.out_dir, filename)
        data = text.encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(data)
        self.files.append({"path": filename, "sha256": hashlib.sha256(data).hexdigest(), "role": role, **info})
        return path

    def finish(self, **extra) -> str:
        self.manifest.update(extra)
        self.manifest["finished_utc"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        self.manifest["files"] = self.files
        path = os.path.join(self.out_dir, f"{self.name}_manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _progress_logger(label: str):
    state = {"last": -1}

    def cb(done: int, total: int) -> None:
        pct = int(100 * done / total)
        if pct // 10 != state["last"] // 10 or done == total:
            state["last"] = pct
            log.info("%s: %d/%d velocity classes", label, done, total)

    return cb


# ---------------------------------------------------------------- commands


def _value_label(axis: str, unit: str) -> str:
    return f"{axis}_{unit}"


def run_spectrum(cfg: dict, origin: str, out_dir: str, workers: int = 1) -> list:
    """Run a config; dispatches to :func:`run_sweep` if it carries a ``sweep`` block."""
    if "sweep" in cfg:
        sw = _section(cfg, "sweep")
        return run_sweep(cfg, origin, out_dir, sw.get("axis"), sw.get("values"), sw.get("unit", "gamma"),
                         workers=workers, command="spectrum")
    model = model_from_config(cfg)
    name = cfg.get("name", "spectrum")
    res = compute_spectra(model, workers=workers, progress=_progress_logger(name))
    writer = RunWriter(out_dir, name, "spectrum", cfg, origin)
    path = writer.write(f"{name}.csv", format_spectrum_csv(res), "spectrum")
    writer.finish(resolved_model=dataclasses.asdict(model), metadata=res.metadata)
    return [path]


def run_sweep(cfg: dict, origin: str, out_dir: str, axis, values, unit: str = "gamma",
              workers: int = 1, command: str = "sweep") -> list:
    """One spectrum per value plus a summary CSV of the probe-frequency values."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis {axis!r} unknown; choose from {', '.join(SWEEP_AXES)}")
    if unit not in UNITS:
        raise ConfigError(f"sweep unit {unit!r} unknown; choose from {', '.join(UNITS)}")
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep values: need a non-empty list")
    base = model_from_config(cfg)
    name = cfg.get("name", "sweep")
    freqs = base.grid.omega
    probe = cfg.get("analysis", {}).get("probe_mhz", rad_to_mhz(freqs[0]))
    ip = int(np.argmin(np.abs(freqs - mhz_to_rad(float(probe)))))
    writer = RunWriter(out_dir, name, command, cfg, origin)
    label = _value_label(axis, unit)
    summary = [f"{label},probe_mhz,S11,S22,S12,Ss,Sd,C"]
    paths = []
    for i, v in enumerate(values):
        model = apply_axis(base, axis, to_rad(float(v), unit, base.atom.gamma_exc, "sweep value"))
        res = compute_spectra(model, workers=workers, progress=_progress_logger(f"{name}[{i}]"))
        fname = f"{name}_{axis}_{i:02d}.csv"
        paths.append(writer.write(fname, format_spectrum_csv(res), "spectrum", axis=axis, value=v, unit=unit))
        row = [float(v), rad_to_mhz(freqs[ip]), res.S11[ip], res.S22[ip], res.S12[ip], res.Ss[ip], res.Sd[ip], res.C[ip]]
        summary.append(",".join(_fmt(float(x)) for x in row))
        log.info("%s %s=%g: C(%.3g MHz) = %s", name, axis, v, rad_to_mhz(freqs[ip]), _fmt(float(res.C[ip])) or "missing")
    paths.append(writer.write(f"{name}_{axis}_summary.csv", "\n".join(summary) + "\n", "summary", axis=axis))
    writer.finish(resolved_model=dataclasses.asdict(base), sweep={"axis": axis, "values": values, "unit": unit})
    return paths


def run_oracle(cfg: dict, origin: str, out_dir: str, workers: int = 1, seed: Optional[int] = None) -> list:
    """Monte Carlo estimate, deterministic result at the same bins, and a z-score table."""
    from .oracle import oracle_correlation

    model = model_from_config(cfg)
    tcfg = oracle_config_from(cfg, model.atom.gamma_exc, seed)
    name = cfg.get("name", "oracle")
    probes = cfg["oracle"].get("probe_mhz")
    freqs = model.grid.omega if probes is None else mhz_to_rad(np.asarray(probes, dtype=float))
    try:
        orc = oracle_correlation(model, tcfg, freqs, workers=workers)
    except ModelError as exc:
        raise ConfigError(f"oracle: {exc}") from None
    det = compute_spectra(model.with_updates(grid=AnalysisGrid(tuple(orc.frequencies))), workers=workers)
    writer = RunWriter(out_dir, name, "oracle", cfg, origin)
    paths = [
        writer.write(f"{name}_oracle.csv", format_spectrum_csv(orc, with_se=True), "oracle"),
        writer.write(f"{name}_deterministic.csv", format_spectrum_csv(det), "deterministic"),
    ]
    lines = ["omega_mhz,C_deterministic,C_oracle,se_C,z,within_tolerance"]
    for f, cd, co, se in zip(rad_to_mhz(orc.frequencies), det.C, orc.C, orc.stderr["C"]):
        z = (co - cd) / se if se > 0 else float("nan")
        ok = abs(co - cd) <= max(3 * se, 0.05)
        lines.append(",".join([_fmt(f), _fmt(cd), _fmt(co), _fmt(se), _fmt(z), str(bool(ok)).lower()]))
        print(f"{f:9.4f} MHz  C_det={cd:+.4f}  C_mc={co:+.4f} +- {se:.4f}  z={z:+.2f}")
    paths.append(writer.write(f"{name}_comparison.csv", "\n".join(lines) + "\n", "comparison"))
    writer.finish(resolved_model=dataclasses.asdict(model), seed=tcfg.seed, rng=orc.metadata["rng"],
                  backend=orc.metadata["backend"])
    return paths


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=1, help="parallel workers (default 1)")
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("--seed", type=int, default=None, help="override the oracle seed")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = argparse.ArgumentParser(
        prog="eitnoise",
        description="Intensity-noise correlation spectra of two phase-diffusing lasers in a Lambda atom.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("spectrum", parents=[common], help="compute spectra for a config or preset")
    p.add_argument("config", help=f"JSON config path or preset ({', '.join(PRESETS)})")
    p = sub.add_parser("sweep", parents=[common], help="sweep one parameter")
    p.add_argument("config")
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--unit", default="gamma", choices=UNITS, help="unit of --values (default gamma)")
    p = sub.add_parser("oracle", parents=[common], help="Monte Carlo cross-check of a config")
    p.add_argument("config")
    sub.add_parser("presets", help="list bundled presets")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    if args.command == "presets":
        for name in PRESETS:
            print(name)
        return 0
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg, origin = load_config(args.config)
        if args.command == "spectrum":
            paths = run_spectrum(cfg, origin, args.out, args.workers)
        elif args.command == "sweep":
            paths = run_sweep(cfg, origin, args.out, args.axis, parse_values(args.values), args.unit,
                              workers=args.workers)
        else:
            paths = run_oracle(cfg, origin, args.out, args.workers, args.seed)
    except (ConfigError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ArithmeticError, RuntimeError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 3
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
