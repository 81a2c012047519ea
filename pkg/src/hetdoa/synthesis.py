"""Synthetic multi-snapshot array data with heteroscedastic noise.

Data follows Y = A X + N where the K active rows of X hold zero-mean
circular complex Gaussian source amplitudes and every noise entry n_nl is
zero-mean circular complex Gaussian with its own standard deviation
sigma_nl. Three structures of the N x L standard-deviation matrix are
supported:

* Case I   -- one sigma shared by all sensors and snapshots,
* Case II  -- one sigma per snapshot, shared across sensors,
* Case III -- an independent sigma per sensor and snapshot.

The raw sigmas are drawn log10-uniform over +/- `decades`, rescaled to
arithmetic mean exactly 1, then scaled by a single factor that pins the
expected array SNR.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .arrays import SteeringDictionary


class NoiseCase(str, enum.Enum):
    """Structure of the noise standard-deviation matrix."""

    I = "I"       # constant over sensors and snapshots
    II = "II"     # constant over sensors, varies across snapshots
    III = "III"   # varies across sensors and snapshots

    @classmethod
    def parse(cls, value) -> "NoiseCase":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper().strip())
        except ValueError:
            raise ValueError(f"unknown noise case {value!r}; expected I, II, or III") from None


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SourceScenario:
    """K true sources: on-grid DOAs in degrees and powers in dB."""

    doas_deg: tuple[float, ...]
    powers_db: tuple[float, ...]

    def __post_init__(self):
        doas = tuple(float(d) for d in self.doas_deg)
        powers = tuple(float(p) for p in self.powers_db)
        if len(doas) < 1:
            raise ValueError("scenario needs at least one source")
        if len(doas) != len(powers):
            raise ValueError("doas_deg and powers_db must have the same length")
        if len(set(doas)) != len(doas):
            raise ValueError("source DOAs must be distinct")
        object.__setattr__(self, "doas_deg", doas)
        object.__setattr__(self, "powers_db", powers)

    @property
    def n_sources(self) -> int:
        return len(self.doas_deg)

    @property
    def powers_linear(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.powers_db) / 10.0)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise-generation law: case, log10-uniform half-width, target SNR, seed."""

    case: NoiseCase
    decades: float = 1.0
    snr_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "case", NoiseCase.parse(self.case))
        if self.decades < 0.0:
            raise ValueError("decades must be nonnegative")


@dataclass(frozen=True)
class NoiseStdMatrix:
    """N x L matrix of noise standard deviations sigma_nl."""

    values: np.ndarray
    case: NoiseCase = NoiseCase.III

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("noise std matrix must be 2-D")
        if np.any(v < 0.0) or not np.all(np.isfinite(v)):
            raise ValueError("noise std values must be finite and nonnegative")
        case = NoiseCase.parse(self.case)
        if case == NoiseCase.I and not np.all(v == v[0, 0]):
            raise ValueError("Case I requires a constant matrix")
        if case == NoiseCase.II and not np.all(v == v[0:1, :]):
            raise ValueError("Case II requires column-constant values")
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "case", case)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def is_constant(self) -> bool:
        """True if the matrix is a valid Case I member."""
        return bool(np.all(self.values == self.values[0, 0]))

    def is_column_constant(self) -> bool:
        """True if the matrix is a valid Case II member."""
        return bool(np.all(self.values == self.values[0:1, :]))

    def scaled(self, factor: float) -> "NoiseStdMatrix":
        return NoiseStdMatrix(values=self.values * factor, case=self.case)


@dataclass(frozen=True)
class SnapshotMatrix:
    """N x L complex observations, with optional synthesis ground truth."""

    data: np.ndarray
    amplitudes: np.ndarray | None = None      # M x L source matrix X, if synthetic
    noise_std: NoiseStdMatrix | None = None   # true sigma_nl, if synthetic
    seed: int | None = None

    def __post_init__(self):
        d = np.array(self.data, dtype=np.complex128)
        if d.ndim != 2 or d.shape[1] < 1:
            raise ValueError("snapshot matrix must be N x L with L >= 1")
        if not np.all(np.isfinite(d)):
            raise ValueError("snapshot matrix entries must be finite")
        object.__setattr__(self, "data", _readonly(d))
        if self.amplitudes is not None:
            x = np.array(self.amplitudes, dtype=np.complex128)
            if x.shape[1] != d.shape[1]:
                raise ValueError("amplitude matrix snapshot count mismatch")
            object.__setattr__(self, "amplitudes", _readonly(x))

    @property
    def n_sensors(self) -> int:
        return self.data.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.data.shape[1]


def complex_gaussian(rng: np.random.Generator, variance, size) -> np.ndarray:
    """Circular complex Gaussian samples with E|z|^2 = variance.

    Real and imaginary parts are independent N(0, variance/2).
    """
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def draw_source_amplitudes(scenario: SourceScenario, grid, L: int,
                           rng: np.random.Generator) -> np.ndarray:
    """M x L source matrix with Gaussian rows on the scenario's grid indices.

    Row m for an active source has i.i.d. entries with E|x|^2 = gamma_m;
    all other rows are exactly zero.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    X = np.zeros((grid.size, L), dtype=np.complex128)
    for doa, gamma in zip(scenario.doas_deg, scenario.powers_linear):
        m = grid.index_of(doa)  # raises if off-grid
        X[m, :] = complex_gaussian(rng, gamma, L)
    return X


def draw_noise_std(spec: NoiseSpec, n_sensors: int, n_snapshots: int,
                   rng: np.random.Generator) -> NoiseStdMatrix:
    """Draw sigma_nl = 10^u, u ~ U(-decades, decades), then rescale to mean 1.

    Case I draws a single value, Case II one per snapshot, Case III one per
    entry; the rescaling makes the arithmetic mean of the matrix exactly 1.
    """
    d = spec.decades
    if spec.case == NoiseCase.I:
        rng.uniform(-d, d, size=(1, 1))  # consume the draw for stream stability
        # a constant matrix normalized to mean 1 is exactly all-ones
        return NoiseStdMatrix(values=np.ones((n_sensors, n_snapshots)),
                              case=spec.case)
    if spec.case == NoiseCase.II:
        u = rng.uniform(-d, d, size=(1, n_snapshots))
        sig = np.broadcast_to(10.0 ** u, (n_sensors, n_snapshots)).copy()
    else:
        u = rng.uniform(-d, d, size=(n_sensors, n_snapshots))
        sig = 10.0 ** u
    sig /= np.mean(sig)
    return NoiseStdMatrix(values=sig, case=spec.case)


def expected_signal_power(dictionary: SteeringDictionary,
                          scenario: SourceScenario) -> float:
    """E ||A x_l||^2 for the scenario's prior: sum_k gamma_k * ||a_k||^2.

    Unit-modulus steering columns make every column norm N, so this is
    N * sum(gamma_k); the column norms are used explicitly anyway.
    """
    total = 0.0
    for doa, gamma in zip(scenario.doas_deg, scenario.powers_linear):
        m = dictionary.grid.index_of(doa)
        total += gamma * float(np.sum(np.abs(dictionary.matrix[:, m]) ** 2))
    return total


def scale_noise_to_snr(vn: NoiseStdMatrix, scenario: SourceScenario,
                       dictionary: SteeringDictionary, snr_db: float) -> NoiseStdMatrix:
    """Scale sigma values so the expected array SNR equals snr_db.

    After scaling, the per-snapshot expected noise power sum_n sigma_nl^2,
    averaged over snapshots, equals 10^(-snr/10) * E||A x_l||^2.
    """
    mean_noise_power = float(np.mean(np.sum(vn.values ** 2, axis=0)))
    if mean_noise_power == 0.0:
        raise ValueError("cannot scale an all-zero noise std matrix")
    target = 10.0 ** (-snr_db / 10.0) * expected_signal_power(dictionary, scenario)
    return vn.scaled(np.sqrt(target / mean_noise_power))


def synthesize_snapshots(dictionary: SteeringDictionary, X: np.ndarray,
                         vn: NoiseStdMatrix, rng: np.random.Generator,
                         seed: int | None = None) -> SnapshotMatrix:
    """Y = A X + N with entrywise noise standard deviations from vn."""
    A = dictionary.matrix
    X = np.asarray(X, dtype=np.complex128)
    if X.shape[0] != A.shape[1]:
        raise ValueError(f"X has {X.shape[0]} rows, dictionary has {A.shape[1]} columns")
    if vn.values.shape != (A.shape[0], X.shape[1]):
        raise ValueError(f"noise std shape {vn.values.shape} does not match "
                         f"({A.shape[0]}, {X.shape[1]})")
    noise = complex_gaussian(rng, vn.values ** 2, vn.values.shape)
    return SnapshotMatrix(data=A @ X + noise, amplitudes=X, noise_std=vn, seed=seed)


def synthesize_trial(dictionary: SteeringDictionary, scenario: SourceScenario,
                     spec: NoiseSpec, L: int,
                     rng: np.random.Generator | None = None,
                     seed=None) -> SnapshotMatrix:
    """One full draw: amplitudes, noise stds at target SNR, snapshots."""
    if rng is None:
        rng = np.random.default_rng(seed if seed is not None else spec.seed)
    X = draw_source_amplitudes(scenario, dictionary.grid, L, rng)
    vn = draw_noise_std(spec, dictionary.n_sensors, L, rng)
    vn = scale_noise_to_snr(vn, scenario, dictionary, spec.snr_db)
    return synthesize_snapshots(dictionary, X, vn, rng)
