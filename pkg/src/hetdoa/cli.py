"""Command-line interface.

Subcommands: simulate, spectrum, benchmark, noise-study. Exit codes:
0 success, 2 configuration or input-file error, 3 numeric failure. The
HETDOA_THREADS environment variable overrides the --threads flag.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import plots
from .beamformers import (cbf_spectrum, music_spectrum, prewhiten,
                          sample_covariance, write_spectrum_csv, Spectrum)
from .dataio import read_snapshots, write_snapshots
from .errors import ConfigError, NumericError, SnapshotFormatError
from .harness import (ALL_METHODS, SBL_METHODS, ExperimentConfig, run_benchmark,
                      run_noise_study)
from .sbl import sbl_run, write_sbl_result_csv
from .synthesis import NoiseCase, NoiseSpec, synthesize_trial


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetdoa",
        description="Grid-based DOA estimation under heteroscedastic noise")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
            ("simulate", "write a snapshot container from a scenario config"),
            ("spectrum", "run one method on a snapshot container"),
            ("benchmark", "Monte Carlo RMSE sweep over SNR and snapshot count"),
            ("noise-study", "track noise-variance estimate ratios per iteration")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, metavar="PATH",
                       help="YAML or JSON experiment config")
        p.add_argument("--seed", type=int, default=None, metavar="U64",
                       help="override the config base seed")
        p.add_argument("--out", required=True, metavar="DIR",
                       help="output directory")
        p.add_argument("--threads", type=int, default=1, metavar="N",
                       help="worker processes (HETDOA_THREADS overrides)")
        if name == "spectrum":
            p.add_argument("--method", required=True, metavar="NAME",
                           choices=ALL_METHODS, help="method to evaluate")
    return parser


def _resolve_threads(flag_value: int) -> int:
    env = os.environ.get("HETDOA_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"HETDOA_THREADS must be an integer, got {env!r}") from None
    return max(1, flag_value)


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        config = dataclasses.replace(config, base_seed=int(args.seed))
    return config


def _single_cell(config: ExperimentConfig) -> tuple[float, int]:
    if len(config.snr_db) != 1 or len(config.n_snapshots) != 1:
        raise ConfigError("this command needs a single snr_db and n_snapshots")
    return config.snr_db[0], config.n_snapshots[0]


def _cmd_simulate(args) -> int:
    config = _load_config(args)
    snr, L = _single_cell(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dictionary = config.dictionary()
    rng = np.random.default_rng(config.base_seed)
    spec = NoiseSpec(case=config.noise_case, decades=config.decades, snr_db=snr)
    snapshots = synthesize_trial(dictionary, config.scenario(), spec, L, rng=rng)
    snapshots = type(snapshots)(data=snapshots.data, amplitudes=snapshots.amplitudes,
                                noise_std=snapshots.noise_std, seed=config.base_seed)
    write_snapshots(out / "snapshots.json", snapshots)
    write_snapshots(out / "snapshots.csv", snapshots)
    plots.save_noise_std_heatmap(snapshots.noise_std.values, out / "noise_std.png",
                                 title=f"true noise std (case {config.noise_case.value})")
    print(f"wrote {out / 'snapshots.json'} (N={snapshots.n_sensors}, L={L}, "
          f"case {config.noise_case.value}, SNR {snr:g} dB)")
    return 0


def _cmd_spectrum(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    container = (Path(config.snapshots_path) if config.snapshots_path
                 else out / "snapshots.json")
    snapshots = read_snapshots(container)
    dictionary = config.dictionary()
    if snapshots.n_sensors != dictionary.n_sensors:
        raise ConfigError(f"container has {snapshots.n_sensors} sensors, "
                          f"config expects {dictionary.n_sensors}")
    method = args.method
    k = config.n_sources
    if method in SBL_METHODS:
        result = sbl_run(snapshots, dictionary, config.sbl_config(SBL_METHODS[method]))
        spectrum = Spectrum(grid=dictionary.grid, values=result.gamma.values,
                            method_tag=method)
        write_sbl_result_csv(out / f"sbl_{method}.csv", result, dictionary.grid,
                             seed=snapshots.seed)
    elif method == "CBF":
        spectrum = cbf_spectrum(dictionary, sample_covariance(snapshots), "CBF")
    elif method == "CBF2":
        spectrum = cbf_spectrum(dictionary, sample_covariance(
            prewhiten(snapshots, NoiseCase.II)), "CBF2")
    elif method == "CBF-Phase":
        spectrum = cbf_spectrum(dictionary, sample_covariance(
            prewhiten(snapshots, NoiseCase.III)), "CBF-Phase")
    else:
        spectrum = music_spectrum(dictionary, sample_covariance(snapshots), k)
    safe = method.replace("-", "_")
    csv_path = out / f"spectrum_{safe}.csv"
    write_spectrum_csv(csv_path, spectrum)
    plots.save_spectra([spectrum], out / f"spectrum_{safe}.png",
                       true_doas=config.doas_deg, title=method)
    print(f"wrote {csv_path}")
    return 0


def _cmd_benchmark(args) -> int:
    config = _load_config(args)
    report = run_benchmark(config, args.out, threads=_resolve_threads(args.threads))
    print(f"wrote {Path(args.out) / 'rmse.csv'} ({len(report.records)} cells)")
    return 0


def _cmd_noise_study(args) -> int:
    config = _load_config(args)
    summary = run_noise_study(config, args.out, threads=_resolve_threads(args.threads))
    for method, info in summary.items():
        print(f"{method}: mean converged ratio "
              f"{info['mean_converged_ratio']:.3f} over {info['n_samples']} samples")
    return 0


_COMMANDS = {"simulate": _cmd_simulate, "spectrum": _cmd_spectrum,
             "benchmark": _cmd_benchmark, "noise-study": _cmd_noise_study}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, SnapshotFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
