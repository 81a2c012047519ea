"""Peak extraction, estimate-to-truth matching, RMSE, and histograms."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .beamformers import Spectrum
from .synthesis import SourceScenario

RMSE_CSV_SCHEMA = "# hetdoa rmse schema v1"


def top_peak_indices(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest local maxima, ties broken by lower index.

    A point is a local maximum if it is >= both neighbors; boundary points
    compare against their single neighbor. If fewer than k local maxima
    exist, the largest remaining values fill the shortfall.
    """
    v = np.asarray(values, dtype=float)
    m = v.size
    if k > m:
        raise ValueError("cannot select more peaks than grid points")
    ge_left = np.empty(m, dtype=bool)
    ge_right = np.empty(m, dtype=bool)
    ge_left[0] = True
    ge_left[1:] = v[1:] >= v[:-1]
    ge_right[-1] = True
    ge_right[:-1] = v[:-1] >= v[1:]
    peaks = np.nonzero(ge_left & ge_right)[0]
    # lexsort uses the last key as primary: value descending, then index.
    peaks = peaks[np.lexsort((peaks, -v[peaks]))]
    chosen = list(peaks[:k])
    if len(chosen) < k:
        rest = np.setdiff1d(np.arange(m), peaks, assume_unique=False)
        rest = rest[np.lexsort((rest, -v[rest]))]
        chosen.extend(rest[: k - len(chosen)])
    return np.asarray(chosen, dtype=int)


@dataclass(frozen=True)
class DoaEstimate:
    """K estimated DOAs in degrees, sorted ascending."""

    angles_deg: tuple[float, ...]
    method_tag: str = ""

    def __post_init__(self):
        ang = tuple(sorted(float(a) for a in self.angles_deg))
        if len(ang) < 1:
            raise ValueError("estimate needs at least one angle")
        object.__setattr__(self, "angles_deg", ang)

    @property
    def n_sources(self) -> int:
        return len(self.angles_deg)


def find_peaks(spectrum: Spectrum, k: int) -> DoaEstimate:
    """Top-k spectrum peaks mapped to grid angles."""
    idx = top_peak_indices(spectrum.values, k)
    return DoaEstimate(angles_deg=tuple(spectrum.grid.angles[idx]),
                       method_tag=spectrum.method_tag)


def match_to_truth(estimated_deg, true_deg) -> np.ndarray:
    """Signed errors (estimate - truth) under the min-cost pairing.

    Estimates are assigned one-to-one to true DOAs so the total squared
    angular error is minimal; entry i of the result is the error of the
    estimate matched to true DOA i.
    """
    est = np.asarray(estimated_deg, dtype=float)
    tru = np.asarray(true_deg, dtype=float)
    if est.shape != tru.shape:
        raise ValueError("estimate and truth must have the same length")
    cost = (tru[:, None] - est[None, :]) ** 2
    rows, cols = linear_sum_assignment(cost)
    errors = np.empty_like(tru)
    errors[rows] = est[cols] - tru[rows]
    return errors


@dataclass(frozen=True)
class RmseRecord:
    """RMSE for one (method, noise case, SNR, snapshot count) condition."""

    method: str
    noise_case: str
    snr_db: float
    n_snapshots: int
    n_trials: int
    rmse_deg: float
    per_trial_errors: tuple = ()

    def stderr_deg(self) -> float:
        """Delta-method standard error of the RMSE from per-trial MSEs."""
        if len(self.per_trial_errors) < 2 or self.rmse_deg == 0.0:
            return 0.0
        mses = np.array([np.mean(np.asarray(e) ** 2) for e in self.per_trial_errors])
        se_mse = float(np.std(mses, ddof=1)) / np.sqrt(len(mses))
        return se_mse / (2.0 * self.rmse_deg)


@dataclass
class RmseReport:
    """Collection of per-condition RMSE records."""

    records: list = field(default_factory=list)

    def add(self, record: RmseRecord):
        self.records.append(record)

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write(RMSE_CSV_SCHEMA + "\n")
            writer = csv.writer(f)
            writer.writerow(["method", "noise_case", "snr_db", "n_snapshots",
                             "n_trials", "rmse_deg"])
            for r in self.records:
                writer.writerow([r.method, r.noise_case, repr(float(r.snr_db)),
                                 r.n_snapshots, r.n_trials, repr(float(r.rmse_deg))])


def match_and_rmse(estimates, truth: SourceScenario, method: str = "",
                   noise_case: str = "", snr_db: float = float("nan"),
                   n_snapshots: int = 0) -> RmseReport:
    """RMSE over trials with min-cost estimate-to-truth pairing per trial."""
    k = truth.n_sources
    per_trial = []
    total_sq = 0.0
    for est in estimates:
        angles = est.angles_deg if isinstance(est, DoaEstimate) else est
        if len(angles) != k:
            raise ValueError(f"estimate has {len(angles)} angles, truth has {k}")
        errors = match_to_truth(angles, truth.doas_deg)
        per_trial.append(tuple(errors))
        total_sq += float(np.sum(errors ** 2))
    n_trials = len(per_trial)
    if n_trials < 1:
        raise ValueError("need at least one trial")
    rmse = float(np.sqrt(total_sq / (n_trials * k)))
    report = RmseReport()
    report.add(RmseRecord(method=method, noise_case=noise_case, snr_db=snr_db,
                          n_snapshots=n_snapshots, n_trials=n_trials,
                          rmse_deg=rmse, per_trial_errors=tuple(per_trial)))
    return report


def histogram(values, edges) -> np.ndarray:
    """Left-closed counts with sentinel underflow/overflow bins.

    Returns len(edges)+1 counts: [underflow, bins..., overflow]. A value
    equal to an interior edge lands in the bin to its right; a value equal
    to the final edge counts as overflow.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be a 1-D increasing array")
    values = np.asarray(values, dtype=float)
    counts = np.zeros(edges.size + 1, dtype=int)
    idx = np.searchsorted(edges, values, side="right")
    np.add.at(counts, idx, 1)
    return counts
