"""Command-line surface and file formats.

Three subcommands: ``synth`` generates a dataset from a JSON config,
``factorize`` runs the factorization on a measurement CSV, ``evaluate``
compares a result directory against a truth directory. Matrices travel as
headered CSV (row-index column, full double precision), configs and
reports as JSON. Exit codes: 0 success, 2 config error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import string
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from .metrics import match_components, report
from .numerics import NumericalError, pinv
from .objective import PenaltyBreakdown, PenaltyWeights
from .optimizer import NmOptions, NmResult, OptimizerError
from .pipeline import Factorization, factorize
from .preprocess import drop_first_row, drop_last_row
from .synth import (DEFAULT_RATE_MATRIX, NoiseSpec, Peak, ReactionSpec,
                    add_noise, compose, interfere, kinetics, random_peaks,
                    spectra)

log = logging.getLogger(__name__)

CONFIG_SCHEMA_VERSION = 1

PRESETS = {
    "paper-4.2": PenaltyWeights(alpha=-0.0001, beta=-1.0, gamma=1.0,
                                delta=0.0, mu=0.0),
    "paper-4.4": PenaltyWeights(alpha=0.00001, beta=100.0, gamma=100.0,
                                delta=1.0, mu=1.0),
}

EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NUMERICAL_ERROR = 4


class ConfigError(Exception):
    """Invalid configuration; the message names the offending key."""


class DataError(Exception):
    """Unreadable or inconsistent data files; the message names file/line."""


@dataclass
class RunConfig:
    """Resolved factorization run parameters."""

    rank: int
    weights: PenaltyWeights
    options: NmOptions
    restarts: int
    seed: int
    project_feasible: bool
    input_path: str
    output_dir: str

    def __post_init__(self):
        if self.rank < 1:
            raise ConfigError(f"rank must be >= 1, got {self.rank}")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")
        if not self.input_path or not self.output_dir:
            raise ConfigError("input path and output directory must be non-empty")


# ----------------------------------------------------------------------
# File formats
# ----------------------------------------------------------------------

def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def write_matrix_csv(path: str, a) -> None:
    """Write a matrix as CSV: header ``index,c0,...``, one row-index column,
    values in full double precision scientific notation."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"can only write 2-D matrices, got ndim={arr.ndim}")
    lines = ["index," + ",".join(f"c{j}" for j in range(arr.shape[1]))]
    for i, row in enumerate(arr):
        lines.append(f"{i}," + ",".join(format(v, ".17e") for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_matrix_csv(path: str) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix_csv`."""
    try:
        with open(path, "r") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: cannot read: {exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty file")
    header = lines[0].split(",")
    if header[0] != "index" or len(header) < 2:
        raise DataError(f"{path}:1: expected header 'index,c0,...', got {lines[0]!r}")
    cols = len(header) - 1
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != cols + 1:
            raise DataError(f"{path}:{lineno}: expected {cols + 1} fields, "
                            f"got {len(fields)}")
        try:
            rows.append([float(v) for v in fields[1:]])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def write_json(path: str, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: str) -> dict:
    try:
        with open(path, "r") as handle:
            return json.load(handle)
    except OSError as exc:
        raise DataError(f"{path}: cannot read: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc


def write_long_csv(path: str, header: tuple[str, str, str],
                   rows: list[tuple[float, str, float]]) -> None:
    lines = [",".join(header)]
    for x, series, value in rows:
        lines.append(f"{format(x, '.17e')},{series},{format(value, '.17e')}")
    _atomic_write(path, "\n".join(lines) + "\n")


# ----------------------------------------------------------------------
# Dataset configuration
# ----------------------------------------------------------------------

def default_config() -> dict:
    """The shipped default dataset: five species on a 1000-channel grid."""
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "seed": 1,
        "output_dir": "dataset",
        "rate_matrix": [list(row) for row in DEFAULT_RATE_MATRIX],
        "initial_concentrations": [1.0, 0.0, 0.0, 0.0, 0.0],
        "time_grid": {"start": 0.0, "stop": 20.0, "points": 200},
        "wavenumber_grid": {"start": 100.0, "stop": 1800.0, "points": 1000},
        "peaks": {
            "count_range": [3, 6],
            "amplitude_range": [40.0, 160.0],
            "width_range": [8.0, 30.0],
        },
        "interference": {"focal_points": [400.0, 900.0, 1400.0], "strength": 0.0},
        "noise_delta": 0.0,
    }


def _require(config: dict, key: str):
    if key not in config:
        raise ConfigError(f"missing config key '{key}'")
    return config[key]


def _grid_from_config(section: dict, key: str) -> np.ndarray:
    for field in ("start", "stop", "points"):
        if field not in section:
            raise ConfigError(f"missing config key '{key}.{field}'")
    points = section["points"]
    if not isinstance(points, int) or points < 2:
        raise ConfigError(f"config key '{key}.points' must be an integer >= 2")
    if not section["stop"] > section["start"]:
        raise ConfigError(f"config key '{key}': stop must exceed start")
    return np.linspace(section["start"], section["stop"], points)


def resolve_dataset(config: dict, rng: np.random.Generator | None = None) -> dict:
    """Validate a dataset config and build all ground-truth arrays.

    Returns a dict with keys ``w``, ``h``, ``p``, ``m`` (noisy), ``clean``
    (noiseless product), ``wavenumber``, ``time``, ``peaks`` and ``spec``.
    """
    version = _require(config, "schema_version")
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"config key 'schema_version' must be "
                          f"{CONFIG_SCHEMA_VERSION}, got {version}")
    seed = _require(config, "seed")
    if not isinstance(seed, int):
        raise ConfigError("config key 'seed' must be an integer")
    if rng is None:
        rng = np.random.default_rng(seed)

    time_grid = _grid_from_config(_require(config, "time_grid"), "time_grid")
    wavenumbers = _grid_from_config(_require(config, "wavenumber_grid"),
                                    "wavenumber_grid")
    try:
        spec = ReactionSpec(k=np.asarray(_require(config, "rate_matrix"), dtype=float),
                            h0=np.asarray(_require(config, "initial_concentrations"),
                                          dtype=float),
                            t_grid=time_grid)
    except ValueError as exc:
        raise ConfigError(f"config key 'rate_matrix'/'initial_concentrations': {exc}") from exc

    peaks_cfg = _require(config, "peaks")
    if isinstance(peaks_cfg, dict):
        for field in ("count_range", "amplitude_range", "width_range"):
            if field not in peaks_cfg:
                raise ConfigError(f"missing config key 'peaks.{field}'")
        peaks = random_peaks(
            rng, spec.species,
            grid_span=(float(wavenumbers[0]), float(wavenumbers[-1])),
            count_range=tuple(peaks_cfg["count_range"]),
            amplitude_range=tuple(peaks_cfg["amplitude_range"]),
            width_range=tuple(peaks_cfg["width_range"]))
    elif isinstance(peaks_cfg, list):
        if len(peaks_cfg) != spec.species:
            raise ConfigError(f"config key 'peaks' lists {len(peaks_cfg)} species, "
                              f"rate matrix has {spec.species}")
        try:
            peaks = [[Peak(center=float(p["center"]), amplitude=float(p["amplitude"]),
                           width=float(p["width"])) for p in species]
                     for species in peaks_cfg]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"config key 'peaks': {exc}") from exc
    else:
        raise ConfigError("config key 'peaks' must be a dict of ranges or an "
                          "explicit per-species list")

    interference = config.get("interference", {"focal_points": [], "strength": 0.0})
    strength = interference.get("strength", 0.0)
    if strength:
        if not interference.get("focal_points"):
            raise ConfigError("config key 'interference.focal_points' must be "
                              "non-empty when strength > 0")
        try:
            peaks = interfere(peaks, interference["focal_points"], strength)
        except ValueError as exc:
            raise ConfigError(f"config key 'interference': {exc}") from exc

    delta = config.get("noise_delta", 0.0)
    try:
        noise = NoiseSpec(delta=float(delta), seed=seed)
    except ValueError as exc:
        raise ConfigError(f"config key 'noise_delta': {exc}") from exc

    w = spectra(peaks, wavenumbers)
    h = kinetics(spec)
    clean = compose(w, h)
    noisy = add_noise(clean, noise)
    p_true = pinv(drop_last_row(h.T)) @ drop_first_row(h.T)
    return {"w": w, "h": h, "p": p_true, "m": noisy, "clean": clean,
            "wavenumber": wavenumbers, "time": time_grid, "peaks": peaks,
            "spec": spec}


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------

def cmd_synth(args) -> int:
    config = read_json(args.config)
    if not isinstance(config, dict):
        raise ConfigError("dataset config must be a JSON object")
    dataset = resolve_dataset(config)
    out_dir = args.output or config.get("output_dir")
    if not out_dir:
        raise ConfigError("missing config key 'output_dir' (or pass -o)")
    os.makedirs(out_dir, exist_ok=True)
    write_matrix_csv(os.path.join(out_dir, "M.csv"), dataset["m"])
    write_matrix_csv(os.path.join(out_dir, "W.csv"), dataset["w"])
    write_matrix_csv(os.path.join(out_dir, "H.csv"), dataset["h"])
    write_matrix_csv(os.path.join(out_dir, "P.csv"), dataset["p"])
    manifest = {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "seed": config["seed"],
        "config": {**config,
                   "peaks": [[{"center": p.center, "amplitude": p.amplitude,
                               "width": p.width} for p in species]
                             for species in dataset["peaks"]]},
        "axes": {"wavenumber": dataset["wavenumber"].tolist(),
                 "time": dataset["time"].tolist()},
    }
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    log.info("wrote dataset (%dx%d) to %s", *dataset["m"].shape, out_dir)
    return 0


def _weights_from_args(args) -> PenaltyWeights:
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset '{args.preset}'; "
                              f"choices: {sorted(PRESETS)}")
        base = PRESETS[args.preset]
    else:
        base = PenaltyWeights(alpha=0.0, beta=0.0, gamma=0.0, delta=0.0, mu=0.0)
    values = {name: getattr(args, name) if getattr(args, name) is not None
              else getattr(base, name)
              for name in ("alpha", "beta", "gamma", "delta", "mu")}
    try:
        return PenaltyWeights(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _options_from_args(args) -> NmOptions:
    kwargs = {}
    if args.max_iter is not None:
        kwargs["max_iter"] = args.max_iter
    if args.max_feval is not None:
        kwargs["max_feval"] = args.max_feval
    if args.tol_x is not None:
        kwargs["tol_x"] = args.tol_x
    if args.tol_f is not None:
        kwargs["tol_f"] = args.tol_f
    try:
        return NmOptions(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_factorize(args) -> int:
    run = RunConfig(rank=args.rank, weights=_weights_from_args(args),
                    options=_options_from_args(args), restarts=args.restarts,
                    seed=args.seed, project_feasible=args.project_feasible,
                    input_path=args.input, output_dir=args.output)
    m = read_matrix_csv(run.input_path)
    fact = factorize(m, run.rank, run.weights, opts=run.options,
                     restarts=run.restarts, seed=run.seed,
                     project_feasible=run.project_feasible)
    os.makedirs(run.output_dir, exist_ok=True)
    write_matrix_csv(os.path.join(run.output_dir, "W_rec.csv"), fact.w_rec)
    write_matrix_csv(os.path.join(run.output_dir, "H_rec.csv"), fact.h_rec)
    write_matrix_csv(os.path.join(run.output_dir, "P_rec.csv"), fact.p_rec)
    write_matrix_csv(os.path.join(run.output_dir, "A_opt.csv"), fact.a_opt)
    diagnostics = {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "penalties": fact.breakdown.to_dict(),
        "optimizer": fact.optimizer.to_dict(),
        "residual": fact.residual,
        "rank": run.rank,
        "weights": {name: getattr(run.weights, name)
                    for name in ("alpha", "beta", "gamma", "delta", "mu")},
        "restarts": run.restarts,
        "seed": run.seed,
        "project_feasible": run.project_feasible,
    }
    write_json(os.path.join(run.output_dir, "diagnostics.json"), diagnostics)
    log.info("factorized %s at rank %d: residual %.3e, psi^2 %.3e",
             run.input_path, run.rank, fact.residual,
             fact.breakdown.psi_squared)
    return 0


def _species_name(index: int) -> str:
    if index < len(string.ascii_uppercase):
        return string.ascii_uppercase[index]
    return f"S{index}"


def _factorization_from_dir(result_dir: str) -> Factorization:
    w_rec = read_matrix_csv(os.path.join(result_dir, "W_rec.csv"))
    h_rec = read_matrix_csv(os.path.join(result_dir, "H_rec.csv"))
    p_rec = read_matrix_csv(os.path.join(result_dir, "P_rec.csv"))
    a_opt = read_matrix_csv(os.path.join(result_dir, "A_opt.csv"))
    diagnostics = read_json(os.path.join(result_dir, "diagnostics.json"))
    try:
        breakdown = PenaltyBreakdown.from_dict(diagnostics["penalties"])
        opt_stats = diagnostics["optimizer"]
        optimizer = NmResult(x_opt=a_opt.reshape(-1), f_opt=opt_stats["f_opt"],
                             iterations=opt_stats["iterations"],
                             fevals=opt_stats["fevals"],
                             converged_on=opt_stats["converged_on"])
        residual = diagnostics["residual"]
    except KeyError as exc:
        raise DataError(f"{result_dir}/diagnostics.json: missing field {exc}") from exc
    return Factorization(w_rec=w_rec, h_rec=h_rec, p_rec=p_rec, a_opt=a_opt,
                         breakdown=breakdown, optimizer=optimizer,
                         residual=residual)


def cmd_evaluate(args) -> int:
    fact = _factorization_from_dir(args.result_dir)
    w_true = read_matrix_csv(os.path.join(args.truth_dir, "W.csv"))
    h_true = read_matrix_csv(os.path.join(args.truth_dir, "H.csv"))
    p_true = read_matrix_csv(os.path.join(args.truth_dir, "P.csv"))
    for name, rec, true in (("W", fact.w_rec, w_true), ("H", fact.h_rec, h_true),
                            ("P", fact.p_rec, p_true)):
        if rec.shape != true.shape:
            raise DataError(f"{name}: recovered shape {rec.shape} does not "
                            f"match truth shape {true.shape}")

    match = report(fact, truth=(w_true, h_true, p_true))
    out_path = args.output
    out_dir = os.path.dirname(os.path.abspath(out_path))
    os.makedirs(out_dir, exist_ok=True)
    write_json(out_path, match.to_dict())

    manifest_path = os.path.join(args.truth_dir, "manifest.json")
    if os.path.exists(manifest_path):
        axes = read_json(manifest_path).get("axes", {})
        wavenumber = np.asarray(axes.get("wavenumber",
                                         range(w_true.shape[0])), dtype=float)
        time = np.asarray(axes.get("time", range(h_true.shape[1])), dtype=float)
    else:
        wavenumber = np.arange(w_true.shape[0], dtype=float)
        time = np.arange(h_true.shape[1], dtype=float)
    if wavenumber.size != w_true.shape[0]:
        raise DataError(f"manifest wavenumber axis length {wavenumber.size} "
                        f"does not match spectra rows {w_true.shape[0]}")
    if time.size != h_true.shape[1]:
        raise DataError(f"manifest time axis length {time.size} does not "
                        f"match kinetics columns {h_true.shape[1]}")

    permutation = list(match.permutation)
    spectra_rows = []
    kinetics_rows = []
    for rec_index, true_index in enumerate(permutation):
        name = _species_name(true_index)
        for x, value in zip(wavenumber, w_true[:, true_index]):
            spectra_rows.append((float(x), f"true_{name}", float(value)))
        for x, value in zip(wavenumber, fact.w_rec[:, rec_index]):
            spectra_rows.append((float(x), f"recovered_{name}", float(value)))
        for t, value in zip(time, h_true[true_index, :]):
            kinetics_rows.append((float(t), f"true_{name}", float(value)))
        for t, value in zip(time, fact.h_rec[rec_index, :]):
            kinetics_rows.append((float(t), f"recovered_{name}", float(value)))
    write_long_csv(os.path.join(out_dir, "spectra_overlay.csv"),
                   ("wavenumber", "series", "value"), spectra_rows)
    write_long_csv(os.path.join(out_dir, "kinetics_overlay.csv"),
                   ("time", "series", "value"), kinetics_rows)
    log.info("wrote report to %s", out_path)
    return 0


# ----------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unmixer",
        description="Factorize time-resolved spectral measurements into "
                    "component spectra, kinetics and a transition matrix.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("-c", "--config", required=True,
                         help="dataset config JSON")
    p_synth.add_argument("-o", "--output", default=None,
                         help="output directory (overrides config)")
    p_synth.set_defaults(func=cmd_synth)

    p_fact = sub.add_parser("factorize", help="factorize a measurement matrix")
    p_fact.add_argument("-i", "--input", required=True, help="M.csv path")
    p_fact.add_argument("-r", "--rank", type=int, required=True)
    p_fact.add_argument("-o", "--output", required=True, help="output directory")
    p_fact.add_argument("--preset", default=None,
                        help=f"weight preset: {sorted(PRESETS)}")
    for name in ("alpha", "beta", "gamma", "delta", "mu"):
        p_fact.add_argument(f"--{name}", type=float, default=None,
                            help=f"override weight {name}")
    p_fact.add_argument("--restarts", type=int, default=1)
    p_fact.add_argument("--seed", type=int, default=0)
    p_fact.add_argument("--project-feasible", action="store_true",
                        help="clamp negative kinetics and renormalize columns")
    p_fact.add_argument("--max-iter", type=int, default=None)
    p_fact.add_argument("--max-feval", type=int, default=None)
    p_fact.add_argument("--tol-x", type=float, default=None)
    p_fact.add_argument("--tol-f", type=float, default=None)
    p_fact.set_defaults(func=cmd_factorize)

    p_eval = sub.add_parser("evaluate", help="compare a result against truth")
    p_eval.add_argument("-r", "--result-dir", required=True)
    p_eval.add_argument("-t", "--truth-dir", required=True)
    p_eval.add_argument("-o", "--output", required=True, help="report.json path")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def _emit_error(exc: Exception, exit_code: int) -> None:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc),
                         "exit_code": exit_code}}
    print(json.dumps(payload), file=sys.stderr)


def main(argv=None) -> int:
    level = os.environ.get("UNMIXER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _emit_error(exc, EXIT_CONFIG_ERROR)
        return EXIT_CONFIG_ERROR
    except DataError as exc:
        _emit_error(exc, EXIT_DATA_ERROR)
        return EXIT_DATA_ERROR
    except (NumericalError, OptimizerError) as exc:
        _emit_error(exc, EXIT_NUMERICAL_ERROR)
        return EXIT_NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
