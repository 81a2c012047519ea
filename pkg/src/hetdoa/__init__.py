"""Grid-based DOA estimation under heteroscedastic Gaussian noise.

Provides a uniform-linear-array data model, synthetic multi-snapshot data
with structured noise (constant, per-snapshot, or per-entry standard
deviations), classical beamformer baselines (CBF, norm- and phase-whitened
CBF, MUSIC), a sparse Bayesian learning solver with four noise-variance
estimators, and a Monte Carlo benchmark harness with CSV and figure output.
"""

from .arrays import (AngularGrid, ArrayGeometry, SteeringDictionary,
                     build_angular_grid, build_dictionary, build_ula_geometry,
                     steering_vector)
from .beamformers import (CovarianceMatrix, Spectrum, cbf_spectrum, music_spectrum,
                          prewhiten, sample_covariance, write_spectrum_csv)
from .errors import (ConfigError, DegenerateDataWarning, NumericError,
                     SnapshotFormatError)
from .harness import ExperimentConfig, run_benchmark, run_noise_study
from .metrics import (DoaEstimate, RmseRecord, RmseReport, find_peaks, histogram,
                      match_and_rmse, match_to_truth, top_peak_indices)
from .sbl import (GammaSpectrum, NoiseEstimate, PosteriorStats, SblConfig, SblResult,
                  SolverNoiseModel, data_covariance, gamma_update, initialize,
                  log_likelihood, noise_estimate_case1, noise_estimate_case2,
                  noise_estimate_case3, noise_estimate_em, posterior_stats,
                  projection_matrix, sbl_run, select_active_set, write_sbl_result_csv)
from .synthesis import (NoiseCase, NoiseSpec, NoiseStdMatrix, SnapshotMatrix,
                        SourceScenario, complex_gaussian, draw_noise_std,
                        draw_source_amplitudes, expected_signal_power,
                        scale_noise_to_snr, synthesize_snapshots, synthesize_trial)
from .dataio import read_snapshots, write_snapshots

__version__ = "0.1.0"

__all__ = [
    "AngularGrid", "ArrayGeometry", "SteeringDictionary",
    "build_angular_grid", "build_dictionary", "build_ula_geometry",
    "steering_vector",
    "CovarianceMatrix", "Spectrum", "cbf_spectrum", "music_spectrum",
    "prewhiten", "sample_covariance", "write_spectrum_csv",
    "ConfigError", "DegenerateDataWarning", "NumericError", "SnapshotFormatError",
    "ExperimentConfig", "run_benchmark", "run_noise_study",
    "DoaEstimate", "RmseRecord", "RmseReport", "find_peaks", "histogram",
    "match_and_rmse", "match_to_truth", "top_peak_indices",
    "GammaSpectrum", "NoiseEstimate", "PosteriorStats", "SblConfig", "SblResult",
    "SolverNoiseModel", "data_covariance", "gamma_update", "initialize",
    "log_likelihood", "noise_estimate_case1", "noise_estimate_case2",
    "noise_estimate_case3", "noise_estimate_em", "posterior_stats",
    "projection_matrix", "sbl_run", "select_active_set", "write_sbl_result_csv",
    "NoiseCase", "NoiseSpec", "NoiseStdMatrix", "SnapshotMatrix", "SourceScenario",
    "complex_gaussian", "draw_noise_std", "draw_source_amplitudes",
    "expected_signal_power", "scale_noise_to_snr", "synthesize_snapshots",
    "synthesize_trial",
    "read_snapshots", "write_snapshots",
]
