"""Sample covariance, pre-whitening, and the CBF / MUSIC baseline spectra.

CBF scans the raw sample covariance. CBF2 and CBF-Phase are the same scan
applied to pre-whitened data: CBF2 normalizes each snapshot to norm
sqrt(N), CBF-Phase strips magnitudes entirely so only phase remains. The
scanning dictionary itself is never whitened. MUSIC uses the noise
subspace of the raw sample covariance.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .arrays import AngularGrid, SteeringDictionary
from .errors import DegenerateDataWarning, NumericError
from .synthesis import NoiseCase, SnapshotMatrix

_MUSIC_EIG_FLOOR = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Spectrum:
    """Nonnegative angular power values aligned to a grid."""

    grid: AngularGrid
    values: np.ndarray
    method_tag: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError("spectrum length does not match grid")
        floor = -1e-12 * max(1.0, float(np.max(np.abs(v))) if v.size else 1.0)
        if np.any(v < floor) or not np.all(np.isfinite(v)):
            raise ValueError("spectrum values must be finite and nonnegative")
        np.clip(v, 0.0, None, out=v)
        object.__setattr__(self, "values", _readonly(v))

    def values_db(self, floor_db: float = -300.0) -> np.ndarray:
        """10*log10 of the values with an output floor for zeros."""
        with np.errstate(divide="ignore"):
            db = 10.0 * np.log10(self.values)
        return np.maximum(db, floor_db)


@dataclass(frozen=True)
class CovarianceMatrix:
    """N x N Hermitian positive-semidefinite matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("covariance must be square")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.conj().T)) > 1e-10 * scale:
            raise ValueError("covariance must be Hermitian")
        trace = float(np.trace(m).real)
        if float(np.linalg.eigvalsh(m).min()) < -1e-9 * max(trace, 1.0):
            raise ValueError("covariance must be positive semidefinite")
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def sample_covariance(snapshots: SnapshotMatrix) -> CovarianceMatrix:
    """S = Y Y^H / L, Hermitian-symmetrized."""
    Y = snapshots.data
    S = Y @ Y.conj().T / snapshots.n_snapshots
    return CovarianceMatrix(matrix=0.5 * (S + S.conj().T))


def prewhiten(snapshots: SnapshotMatrix, case: NoiseCase | str) -> SnapshotMatrix:
    """Normalize data so residual noise of the given structure is even.

    Case I rescales the whole matrix to Frobenius norm sqrt(N*L), Case II
    rescales each snapshot to norm sqrt(N), Case III divides every entry by
    its magnitude. Zero magnitudes map to 0 with a warning instead of
    failing, so file-loaded data with gaps survives batch runs.
    """
    case = NoiseCase.parse(case)
    Y = snapshots.data
    N, L = Y.shape
    if case == NoiseCase.I:
        norm = np.linalg.norm(Y)
        if norm == 0.0:
            warnings.warn("all-zero snapshot matrix left as zeros",
                          DegenerateDataWarning, stacklevel=2)
            out = np.zeros_like(Y)
        else:
            out = (np.sqrt(N * L) / norm) * Y
    elif case == NoiseCase.II:
        norms = np.linalg.norm(Y, axis=0)
        zero = norms == 0.0
        if np.any(zero):
            warnings.warn(f"{int(zero.sum())} zero-norm snapshots set to zero",
                          DegenerateDataWarning, stacklevel=2)
        safe = np.where(zero, 1.0, norms)
        out = Y * (np.sqrt(N) / safe)[None, :]
        out[:, zero] = 0.0
    else:
        mags = np.abs(Y)
        zero = mags == 0.0
        if np.any(zero):
            warnings.warn(f"{int(zero.sum())} zero entries set to zero",
                          DegenerateDataWarning, stacklevel=2)
        out = Y / np.where(zero, 1.0, mags)
        out[zero] = 0.0
    return SnapshotMatrix(data=out)


def cbf_spectrum(dictionary: SteeringDictionary, cov: CovarianceMatrix,
                 method_tag: str = "CBF") -> Spectrum:
    """Bartlett scan a_m^H S a_m over all grid angles."""
    A = dictionary.matrix
    if cov.size != dictionary.n_sensors:
        raise ValueError("covariance size does not match dictionary")
    quad = np.einsum("nm,nk,km->m", A.conj(), cov.matrix, A, optimize=True)
    scale = max(float(np.max(np.abs(quad.real))), 1e-300)
    resid = float(np.max(np.abs(quad.imag)))
    if resid > 1e-9 * scale:
        raise NumericError(f"CBF quadratic form has imaginary residue {resid:.3e}")
    return Spectrum(grid=dictionary.grid, values=quad.real, method_tag=method_tag)


SPECTRUM_CSV_SCHEMA = "# hetdoa spectrum schema v1"


def write_spectrum_csv(path, spectrum: Spectrum):
    """Spectrum export: angle_deg, power_linear, power_db, method."""
    db = spectrum.values_db()
    with open(path, "w", newline="") as f:
        f.write(SPECTRUM_CSV_SCHEMA + "\n")
        writer = csv.writer(f)
        writer.writerow(["angle_deg", "power_linear", "power_db", "method"])
        for ang, lin, d in zip(spectrum.grid.angles, spectrum.values, db):
            writer.writerow([repr(float(ang)), repr(float(lin)), repr(float(d)),
                             spectrum.method_tag])


def music_spectrum(dictionary: SteeringDictionary, cov: CovarianceMatrix,
                   n_sources: int) -> Spectrum:
    """Noise-subspace pseudospectrum 1 / ||E_n^H a_m||^2 for K sources."""
    N = dictionary.n_sensors
    if not (1 <= n_sources < N):
        raise ValueError("n_sources must satisfy 1 <= K < N")
    try:
        eigvals, eigvecs = np.linalg.eigh(cov.matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    noise_basis = eigvecs[:, : N - n_sources]  # eigh sorts ascending
    proj = np.sum(np.abs(noise_basis.conj().T @ dictionary.matrix) ** 2, axis=0)
    values = 1.0 / np.maximum(proj, _MUSIC_EIG_FLOOR)
    return Spectrum(grid=dictionary.grid, values=values, method_tag="MUSIC")
