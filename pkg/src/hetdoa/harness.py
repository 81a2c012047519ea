"""Config-driven Monte Carlo experiments: RMSE sweeps and noise studies.

Every (snr, L, trial) cell draws one dataset from a seed derived
deterministically from the base seed and the cell coordinates; all
requested methods are evaluated on that same realization. Results are
merged in sorted order, so the emitted CSV bytes do not depend on the
worker count.
"""

from __future__ import annotations

import csv
import functools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import plots
from .arrays import build_angular_grid, build_dictionary, build_ula_geometry
from .beamformers import cbf_spectrum, music_spectrum, prewhiten, sample_covariance
from .errors import ConfigError, NumericError
from .metrics import (DoaEstimate, RmseRecord, RmseReport, find_peaks, histogram,
                      match_to_truth)
from .sbl import SblConfig, SolverNoiseModel, sbl_run
from .synthesis import NoiseCase, NoiseSpec, SourceScenario, synthesize_trial

ALL_METHODS = ("CBF", "CBF2", "CBF-Phase", "MUSIC", "SBL", "SBL2", "SBL2-EM", "SBL3")
SBL_METHODS = {"SBL": SolverNoiseModel.CASE_I, "SBL2": SolverNoiseModel.CASE_II,
               "SBL2-EM": SolverNoiseModel.CASE_II_EM, "SBL3": SolverNoiseModel.CASE_III}

CELLS_CSV_SCHEMA = "# hetdoa cell-diagnostics schema v1"
TRIALS_CSV_SCHEMA = "# hetdoa trial-estimates schema v1"
RATIO_TRACE_SCHEMA = "# hetdoa noise-ratio schema v1"
RATIO_HIST_SCHEMA = "# hetdoa noise-ratio-hist schema v1"


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of a Monte Carlo experiment."""

    n_sensors: int = 20
    spacing_wavelengths: float = 0.5
    grid_min_deg: float = -90.0
    grid_max_deg: float = 89.5
    grid_step_deg: float = 0.5
    doas_deg: tuple = (-3.0,)
    powers_db: tuple = (0.0,)
    noise_case: NoiseCase = NoiseCase.III
    decades: float = 1.0
    snr_db: tuple = (0.0,)
    n_snapshots: tuple = (50,)
    methods: tuple = ("CBF", "SBL3")
    n_trials: int = 100
    base_seed: int = 20260810
    sbl_b: float = 0.5
    sbl_eps_min: float = 0.001
    sbl_j_max: int = 100
    sbl_k: int | None = None
    sbl_sigma_floor: float = 1e-10
    ratio_hist_edges: tuple = tuple(np.linspace(0.0, 3.0, 31))
    snapshots_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "noise_case", NoiseCase.parse(self.noise_case))
        object.__setattr__(self, "doas_deg", tuple(float(v) for v in self.doas_deg))
        object.__setattr__(self, "powers_db", tuple(float(v) for v in self.powers_db))
        object.__setattr__(self, "snr_db", tuple(float(v) for v in _aslist(self.snr_db)))
        object.__setattr__(self, "n_snapshots",
                           tuple(int(v) for v in _aslist(self.n_snapshots)))
        object.__setattr__(self, "methods", tuple(str(m) for m in _aslist(self.methods)))
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {ALL_METHODS}")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be at least 1")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be nonnegative")
        k = self.sbl_k if self.sbl_k is not None else len(self.doas_deg)
        if k != len(self.doas_deg):
            raise ConfigError("sbl.k must match the scenario source count")
        if not self.snr_db or not self.n_snapshots:
            raise ConfigError("snr_db and n_snapshots must be nonempty")

    @property
    def n_sources(self) -> int:
        return len(self.doas_deg)

    def scenario(self) -> SourceScenario:
        return SourceScenario(doas_deg=self.doas_deg, powers_db=self.powers_db)

    def dictionary(self):
        return _cached_dictionary(self.n_sensors, self.spacing_wavelengths,
                                  self.grid_min_deg, self.grid_max_deg,
                                  self.grid_step_deg)

    def sbl_config(self, noise_model) -> SblConfig:
        return SblConfig(n_sources=self.n_sources, noise_model=noise_model,
                         b=self.sbl_b, eps_min=self.sbl_eps_min,
                         j_max=self.sbl_j_max, sigma_floor=self.sbl_sigma_floor)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a mapping")
        known = {"geometry", "grid", "scenario", "noise", "n_snapshots", "methods",
                 "n_trials", "base_seed", "sbl", "ratio_hist_edges", "snapshots_path"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        geo = doc.get("geometry", {})
        _take(kwargs, geo, "geometry", {"n_sensors": "n_sensors",
                                        "spacing_wavelengths": "spacing_wavelengths"})
        grid = doc.get("grid", {})
        _take(kwargs, grid, "grid", {"min_deg": "grid_min_deg",
                                     "max_deg": "grid_max_deg",
                                     "step_deg": "grid_step_deg"})
        scen = doc.get("scenario", {})
        _take(kwargs, scen, "scenario", {"doas_deg": "doas_deg",
                                         "powers_db": "powers_db"})
        noise = doc.get("noise", {})
        _take(kwargs, noise, "noise", {"case": "noise_case", "decades": "decades",
                                       "snr_db": "snr_db"})
        sbl = doc.get("sbl", {})
        _take(kwargs, sbl, "sbl", {"b": "sbl_b", "eps_min": "sbl_eps_min",
                                   "j_max": "sbl_j_max", "k": "sbl_k",
                                   "sigma_floor": "sbl_sigma_floor"})
        for key in ("n_snapshots", "methods", "n_trials", "base_seed",
                    "ratio_hist_edges", "snapshots_path"):
            if key in doc:
                kwargs[key] = doc[key]
        try:
            return cls(**kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            if path.suffix.lower() == ".json":
                doc = json.loads(text)
            else:
                doc = yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        return cls.from_dict(doc or {})


def _aslist(value):
    if isinstance(value, (list, tuple, np.ndarray)):
        return list(value)
    return [value]


def _take(kwargs: dict, section, name: str, mapping: dict):
    if not isinstance(section, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    unknown = set(section) - set(mapping)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    for src, dst in mapping.items():
        if src in section:
            kwargs[dst] = section[src]


@functools.lru_cache(maxsize=8)
def _cached_dictionary(n_sensors, spacing, gmin, gmax, gstep):
    geom = build_ula_geometry(n_sensors, spacing)
    grid = build_angular_grid(gmin, gmax, gstep)
    return build_dictionary(geom, grid)


def trial_seed_sequence(base_seed: int, noise_case: NoiseCase, snr_db: float,
                        n_snapshots: int, trial: int) -> np.random.SeedSequence:
    """Deterministic per-trial seed from the cell coordinates."""
    case_key = {"I": 1, "II": 2, "III": 3}[NoiseCase.parse(noise_case).value]
    snr_key = int(round(snr_db * 1000.0)) + 2 ** 31
    return np.random.SeedSequence([int(base_seed), case_key, snr_key,
                                   int(n_snapshots), int(trial)])


def evaluate_methods(snapshots, dictionary, scenario, methods, config) -> dict:
    """Run every requested method on one realization; angles per method."""
    k = scenario.n_sources
    out = {}
    raw_cov = None
    for method in methods:
        if method in SBL_METHODS:
            result = sbl_run(snapshots, dictionary,
                             config.sbl_config(SBL_METHODS[method]))
            angles = tuple(sorted(dictionary.grid.angles[result.active_set]))
            out[method] = angles
            continue
        if method == "CBF":
            if raw_cov is None:
                raw_cov = sample_covariance(snapshots)
            spec = cbf_spectrum(dictionary, raw_cov, method_tag="CBF")
        elif method == "CBF2":
            spec = cbf_spectrum(dictionary, sample_covariance(
                prewhiten(snapshots, NoiseCase.II)), method_tag="CBF2")
        elif method == "CBF-Phase":
            spec = cbf_spectrum(dictionary, sample_covariance(
                prewhiten(snapshots, NoiseCase.III)), method_tag="CBF-Phase")
        elif method == "MUSIC":
            if raw_cov is None:
                raw_cov = sample_covariance(snapshots)
            spec = music_spectrum(dictionary, raw_cov, k)
        else:
            raise ConfigError(f"unknown method {method}")
        out[method] = find_peaks(spec, k).angles_deg
    return out


def _benchmark_task(args):
    """One (snr, L, trial) draw evaluated under all methods. Top level so it pickles."""
    config, snr, L, trial = args
    dictionary = config.dictionary()
    scenario = config.scenario()
    seed_seq = trial_seed_sequence(config.base_seed, config.noise_case, snr, L, trial)
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    spec = NoiseSpec(case=config.noise_case, decades=config.decades, snr_db=snr)
    snapshots = synthesize_trial(dictionary, scenario, spec, L, rng=rng)
    estimates, failures = {}, {}
    for method in config.methods:
        try:
            estimates.update(evaluate_methods(snapshots, dictionary, scenario,
                                              [method], config))
        except (NumericError, np.linalg.LinAlgError) as exc:
            failures[method] = str(exc)
    return (snr, L, trial), estimates, failures


def _run_tasks(tasks, worker, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, tasks, chunksize=max(1, len(tasks) // (8 * threads))))


def run_benchmark(config: ExperimentConfig, out_dir, threads: int = 1) -> RmseReport:
    """Monte Carlo RMSE sweep over (method, snr, L); writes CSVs and figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = config.scenario()
    tasks = [(config, snr, L, trial)
             for L in config.n_snapshots
             for snr in config.snr_db
             for trial in range(config.n_trials)]
    results = _run_tasks(tasks, _benchmark_task, threads)
    results.sort(key=lambda r: r[0])

    by_cell = {}
    for (snr, L, trial), estimates, failures in results:
        for method in config.methods:
            cell = by_cell.setdefault((method, L, snr),
                                      {"errors": [], "estimates": [], "failed": 0})
            if method in estimates:
                err = match_to_truth(estimates[method], scenario.doas_deg)
                cell["errors"].append((trial, err))
                cell["estimates"].append((trial, estimates[method]))
            else:
                cell["failed"] += 1

    report = RmseReport()
    cell_rows = []
    trial_rows = []
    for (method, L, snr) in sorted(by_cell, key=lambda c: (c[0], c[1], c[2])):
        cell = by_cell[(method, L, snr)]
        n_used = len(cell["errors"])
        if cell["failed"] > 0.10 * config.n_trials:
            raise NumericError(f"cell {method} snr={snr} L={L}: "
                               f"{cell['failed']}/{config.n_trials} trials failed")
        if n_used == 0:
            continue
        errors = [e for (_, e) in cell["errors"]]
        rmse = float(np.sqrt(np.mean(np.concatenate(errors) ** 2)))
        record = RmseRecord(method=method, noise_case=config.noise_case.value,
                            snr_db=snr, n_snapshots=L, n_trials=n_used,
                            rmse_deg=rmse,
                            per_trial_errors=tuple(tuple(e) for e in errors))
        report.add(record)
        cell_rows.append([method, config.noise_case.value, repr(snr), L,
                          config.n_trials, n_used, cell["failed"],
                          repr(rmse), repr(record.stderr_deg())])
        for (trial, est), (_, err) in zip(cell["estimates"], cell["errors"]):
            order = np.argsort(scenario.doas_deg)
            for i in order:
                trial_rows.append([method, config.noise_case.value, repr(snr), L,
                                   trial, i, repr(scenario.doas_deg[i]),
                                   repr(scenario.doas_deg[i] + err[i]), repr(err[i])])

    report.write_csv(out_dir / "rmse.csv")
    with open(out_dir / "cells.csv", "w", newline="") as f:
        f.write(CELLS_CSV_SCHEMA + "\n")
        w = csv.writer(f)
        w.writerow(["method", "noise_case", "snr_db", "n_snapshots",
                    "n_trials_requested", "n_trials_used", "n_failed",
                    "rmse_deg", "stderr_deg"])
        w.writerows(cell_rows)
    with open(out_dir / "trials.csv", "w", newline="") as f:
        f.write(TRIALS_CSV_SCHEMA + "\n")
        w = csv.writer(f)
        w.writerow(["method", "noise_case", "snr_db", "n_snapshots", "trial",
                    "source_index", "theta_true_deg", "theta_est_deg", "error_deg"])
        w.writerows(trial_rows)
    _benchmark_figures(config, report, out_dir)
    return report


def _benchmark_figures(config, report, out_dir: Path):
    case = config.noise_case.value
    if len(config.snr_db) > 1:
        for L in config.n_snapshots:
            rows = [r for r in report.records if r.n_snapshots == L]
            if rows:
                plots.save_rmse_vs_snr(rows, out_dir / f"rmse_vs_snr_L{L}.png",
                                       title=f"noise case {case}, L={L}")
    if len(config.n_snapshots) > 1:
        for snr in config.snr_db:
            rows = [r for r in report.records if r.snr_db == snr]
            if rows:
                plots.save_rmse_vs_snapshots(
                    rows, out_dir / f"rmse_vs_snapshots_snr{snr:+g}.png",
                    title=f"noise case {case}, SNR={snr:g} dB")


def _noise_study_task(args):
    """Noise-variance ratio traces for the per-snapshot estimators, one trial."""
    config, snr, L, trial = args
    dictionary = config.dictionary()
    scenario = config.scenario()
    seed_seq = trial_seed_sequence(config.base_seed, config.noise_case, snr, L, trial)
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    spec = NoiseSpec(case=config.noise_case, decades=config.decades, snr_db=snr)
    snapshots = synthesize_trial(dictionary, scenario, spec, L, rng=rng)
    true_var = snapshots.noise_std.values[0, :] ** 2  # column-constant for Case II
    out = {}
    for method in ("SBL2", "SBL2-EM"):
        if method not in config.methods:
            continue
        result = sbl_run(snapshots, dictionary,
                         config.sbl_config(SBL_METHODS[method]),
                         record_noise_trace=True)
        ratios = [np.mean(v, axis=0) / true_var for v in result.noise_trace]
        out[method] = ratios
    return (snr, L, trial), out


def run_noise_study(config: ExperimentConfig, out_dir, threads: int = 1) -> dict:
    """Track estimated/true noise-variance ratios across solver iterations.

    Requires Case II data, both per-snapshot estimators selected, and a
    single finite (snr, L) cell. Shorter traces are padded with their
    converged value so every iteration aggregates the same sample count.
    """
    if config.noise_case != NoiseCase.II:
        raise ConfigError("noise study requires noise case II data")
    if not {"SBL2", "SBL2-EM"} <= set(config.methods):
        raise ConfigError("noise study requires methods SBL2 and SBL2-EM")
    if len(config.snr_db) != 1 or len(config.n_snapshots) != 1:
        raise ConfigError("noise study runs a single (snr, L) cell")
    snr, L = config.snr_db[0], config.n_snapshots[0]
    if not math.isfinite(snr):
        raise ConfigError("noise study requires a finite SNR")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(config, snr, L, trial) for trial in range(config.n_trials)]
    results = _run_tasks(tasks, _noise_study_task, threads)
    results.sort(key=lambda r: r[0])

    edges = np.asarray(config.ratio_hist_edges, dtype=float)
    summary = {}
    trace_rows, hist_rows = [], []
    mean_traces = {}
    for method in ("SBL2", "SBL2-EM"):
        per_trial = [res[1][method] for res in results if method in res[1]]
        if not per_trial:
            continue
        depth = max(len(t) for t in per_trial)
        per_iter = []
        for it in range(depth):
            samples = np.concatenate([t[min(it, len(t) - 1)] for t in per_trial])
            per_iter.append(samples)
        means = [float(np.mean(s)) for s in per_iter]
        mean_traces[method] = means
        for it, samples in enumerate(per_iter, start=1):
            trace_rows.append([method, it, repr(means[it - 1]), samples.size])
            counts = histogram(samples, edges)
            hist_rows.append((method, it, counts))
        converged = np.concatenate([t[-1] for t in per_trial])
        summary[method] = {"mean_converged_ratio": float(np.mean(converged)),
                           "iterations": depth,
                           "n_samples": int(converged.size)}

    with open(out_dir / "ratio_trace.csv", "w", newline="") as f:
        f.write(RATIO_TRACE_SCHEMA + "\n")
        w = csv.writer(f)
        w.writerow(["estimator", "iteration", "mean_ratio", "n_samples"])
        w.writerows(trace_rows)
    with open(out_dir / "ratio_hist.csv", "w", newline="") as f:
        f.write(RATIO_HIST_SCHEMA + "\n")
        w = csv.writer(f)
        w.writerow(["estimator", "iteration", "bin_left", "bin_right", "count"])
        bounds = [(-math.inf, edges[0])] + list(zip(edges[:-1], edges[1:])) \
            + [(edges[-1], math.inf)]
        for method, it, counts in hist_rows:
            for (lo, hi), c in zip(bounds, counts):
                w.writerow([method, it, repr(float(lo)), repr(float(hi)), int(c)])
    plots.save_ratio_evolution(mean_traces, out_dir / "noise_ratio.png",
                               title=f"SNR={snr:g} dB, L={L}")
    hist_map = {(m, it): counts for m, it, counts in hist_rows}
    if hist_map:
        plots.save_ratio_histograms(hist_map, edges, out_dir / "noise_ratio_hist.png",
                                    title="estimated/true noise variance")
    return summary
