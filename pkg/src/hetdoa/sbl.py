"""Sparse Bayesian learning DOA solver with structured noise estimation.

The solver alternates two steps until the source-power spectrum gamma
stops changing:

1. multiplicative fixed-point update of gamma from the per-snapshot data
   covariances Sigma_yl = Sigma_nl + A diag(gamma) A^H,
2. re-estimation of the noise variances from the residual left after
   projecting out the K strongest gamma peaks.

Four noise estimators are available: a single shared variance (Case I), a
per-snapshot variance (Case II), an EM-style per-snapshot variance, and a
per-sensor-per-snapshot variance (Case III). Convergence is measured by
the relative L1 change of gamma.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .arrays import SteeringDictionary
from .beamformers import CovarianceMatrix, sample_covariance
from .errors import NumericError
from .metrics import top_peak_indices
from .synthesis import NoiseCase, SnapshotMatrix

_PROJECTION_COND_LIMIT = 1e12


class SolverNoiseModel(str, enum.Enum):
    """Which noise estimator the solver iterates with."""

    CASE_I = "I"
    CASE_II = "II"
    CASE_III = "III"
    CASE_II_EM = "II-EM"

    @classmethod
    def parse(cls, value) -> "SolverNoiseModel":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper().strip())
        except ValueError:
            raise ValueError(f"unknown noise model {value!r}; "
                             "expected I, II, III, or II-EM") from None

    @property
    def structure(self) -> NoiseCase:
        """Structure of the variance matrix the estimator produces."""
        if self == SolverNoiseModel.CASE_I:
            return NoiseCase.I
        if self == SolverNoiseModel.CASE_III:
            return NoiseCase.III
        return NoiseCase.II


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GammaSpectrum:
    """Nonnegative source powers gamma_m aligned to the search grid."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("gamma must be a vector")
        if np.any(v < 0.0) or not np.all(np.isfinite(v)):
            raise ValueError("gamma values must be finite and nonnegative")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.values > 0.0)[0]


@dataclass(frozen=True)
class SblConfig:
    """Solver knobs.

    n_sources is the assumed source count K used for peak selection and
    noise estimation. b is the fixed-point exponent, eps_min the relative
    L1 convergence threshold, j_max the iteration cap, and sigma_floor a
    relative floor applied to every estimated noise variance.
    """

    n_sources: int
    noise_model: SolverNoiseModel = SolverNoiseModel.CASE_I
    b: float = 0.5
    eps_min: float = 0.001
    j_max: int = 100
    sigma_floor: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "noise_model", SolverNoiseModel.parse(self.noise_model))
        if self.n_sources < 1:
            raise ValueError("n_sources must be at least 1")
        if not (0.0 < self.b <= 1.0):
            raise ValueError("b must lie in (0, 1]")
        if not (self.eps_min > 0.0):
            raise ValueError("eps_min must be positive")
        if self.j_max < 1:
            raise ValueError("j_max must be at least 1")
        if not (self.sigma_floor > 0.0):
            raise ValueError("sigma_floor must be positive")


@dataclass(frozen=True)
class NoiseEstimate:
    """Estimated noise variances sigma^2_nl as an N x L matrix."""

    variances: np.ndarray
    structure: NoiseCase = NoiseCase.III

    def __post_init__(self):
        v = np.array(self.variances, dtype=float)
        if v.ndim != 2:
            raise ValueError("variance matrix must be 2-D")
        if np.any(v < 0.0) or not np.all(np.isfinite(v)):
            raise ValueError("variances must be finite and nonnegative")
        structure = NoiseCase.parse(self.structure)
        if structure == NoiseCase.I and not np.all(v == v[0, 0]):
            raise ValueError("Case I estimate must be constant")
        if structure == NoiseCase.II and not np.all(v == v[0:1, :]):
            raise ValueError("Case II estimate must be column-constant")
        object.__setattr__(self, "variances", _readonly(v))
        object.__setattr__(self, "structure", structure)

    @property
    def per_snapshot(self) -> np.ndarray:
        """Sensor-averaged variance per snapshot (exact for Cases I/II)."""
        return np.mean(self.variances, axis=0)


@dataclass(frozen=True)
class PosteriorStats:
    """Posterior mean of the source amplitudes and its covariance.

    x_map is M x L with rows outside the gamma support exactly zero;
    sigma_x is L x K x K on the support indices (in ascending order).
    """

    x_map: np.ndarray
    sigma_x: np.ndarray
    support: np.ndarray


@dataclass(frozen=True)
class SblResult:
    """Solver output: gamma, active set, noise, and the convergence trace."""

    gamma: GammaSpectrum
    active_set: np.ndarray
    noise: NoiseEstimate
    iterations: int
    eps_trace: np.ndarray
    converged: bool
    noise_trace: tuple = ()

    def __post_init__(self):
        act = np.asarray(self.active_set, dtype=int)
        if len(set(act.tolist())) != act.size:
            raise ValueError("active set indices must be distinct")
        if len(self.eps_trace) != self.iterations:
            raise ValueError("eps trace length must equal the iteration count")
        object.__setattr__(self, "active_set", _readonly(act))
        object.__setattr__(self, "eps_trace",
                           _readonly(np.asarray(self.eps_trace, dtype=float)))


def _variance_floor(Y: np.ndarray, sigma_floor: float) -> float:
    """Relative floor sigma_floor * tr(S_y)/N = sigma_floor * ||Y||_F^2/(N L)."""
    scale = float(np.sum(np.abs(Y) ** 2)) / Y.size
    return sigma_floor * scale if scale > 0.0 else sigma_floor


def _signal_covariance(A: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """A diag(gamma) A^H over the support of gamma, Hermitian-symmetrized."""
    sup = gamma > 0.0
    if not np.any(sup):
        n = A.shape[0]
        return np.zeros((n, n), dtype=np.complex128)
    As = A[:, sup]
    B = (As * gamma[sup][None, :]) @ As.conj().T
    return 0.5 * (B + B.conj().T)


def data_covariance(dictionary: SteeringDictionary, gamma: GammaSpectrum,
                    noise: NoiseEstimate, snapshot: int) -> CovarianceMatrix:
    """Sigma_yl = Sigma_nl + A diag(gamma) A^H for one snapshot."""
    B = _signal_covariance(dictionary.matrix, gamma.values)
    cov = B + np.diag(noise.variances[:, snapshot]).astype(np.complex128)
    return CovarianceMatrix(matrix=0.5 * (cov + cov.conj().T))


def _quadratic_forms(A: np.ndarray, gamma: np.ndarray, var: np.ndarray,
                     Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """num[m] = sum_l |y_l^H Sigma_l^-1 a_m|^2, den[m] = sum_l a_m^H Sigma_l^-1 a_m.

    Column-constant noise shares one eigendecomposition of the signal
    covariance across snapshots; otherwise the per-snapshot covariances are
    inverted in a batch.
    """
    N, L = Y.shape
    B = _signal_covariance(A, gamma)
    if np.all(var == var[0:1, :]):
        # Sigma_l = B + sigma_l^2 I: diagonalize B once.
        lam, U = np.linalg.eigh(B)
        lam = np.clip(lam, 0.0, None)
        G = U.conj().T @ A                      # (N, M)
        W = U.conj().T @ Y                      # (N, L)
        inv = 1.0 / (lam[:, None] + var[0, :][None, :])   # (N, L)
        den = (np.abs(G) ** 2).T @ inv.sum(axis=1)
        T = (W * inv).conj().T @ G              # (L, M): (Sigma_l^-1 y_l)^H a_m
        num = np.sum(np.abs(T) ** 2, axis=0)
    else:
        sig = np.broadcast_to(B, (L, N, N)).copy()
        diag = np.arange(N)
        sig[:, diag, diag] += var.T
        try:
            inv = np.linalg.inv(sig)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"data covariance inversion failed: {exc}") from exc
        ZA = inv @ A                            # (L, N, M)
        den = np.einsum("lnm,nm->m", ZA, A.conj(), optimize=True).real
        Z = np.einsum("lnk,kl->nl", inv, Y, optimize=True)  # Sigma_l^-1 y_l
        T = Z.conj().T @ A                      # (L, M)
        num = np.sum(np.abs(T) ** 2, axis=0)
    return num, den


def gamma_update(snapshots: SnapshotMatrix, dictionary: SteeringDictionary,
                 gamma_old: GammaSpectrum, noise: NoiseEstimate,
                 b: float) -> GammaSpectrum:
    """One multiplicative fixed-point step on all grid points.

    gamma_m <- gamma_m * (num_m / den_m)^b with the quadratic forms above;
    zeros are fixed points of the update.
    """
    num, den = _quadratic_forms(dictionary.matrix, gamma_old.values,
                                noise.variances, snapshots.data)
    old = gamma_old.values
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0.0, num / den, np.inf)
        new = np.where(old > 0.0, old * ratio ** b, 0.0)
    bad = np.nonzero(~np.isfinite(new))[0]
    if bad.size:
        raise NumericError(f"non-finite gamma update at grid index {int(bad[0])}")
    return GammaSpectrum(values=new)


def select_active_set(gamma: GammaSpectrum, n_sources: int) -> np.ndarray:
    """Indices of the K largest gamma peaks (see metrics.top_peak_indices)."""
    if n_sources >= gamma.values.size:
        raise ValueError("n_sources must be below the grid size")
    return top_peak_indices(gamma.values, n_sources)


def projection_matrix(dictionary: SteeringDictionary, active_set) -> np.ndarray:
    """Orthogonal projector onto the span of the active steering columns."""
    act = np.asarray(active_set, dtype=int)
    As = dictionary.matrix[:, act]
    if np.linalg.cond(As) > _PROJECTION_COND_LIMIT:
        raise NumericError("active steering columns are numerically rank deficient")
    G = As.conj().T @ As
    P = As @ np.linalg.solve(G, As.conj().T)
    return 0.5 * (P + P.conj().T)


def _floored(var: np.ndarray, floor: float) -> np.ndarray:
    return np.maximum(var, floor)


def noise_estimate_case1(snapshots: SnapshotMatrix, projector: np.ndarray,
                         n_sources: int, sigma_floor: float = 1e-10) -> NoiseEstimate:
    """Shared variance tr[(I - P) S_y] / (N - K), replicated N x L."""
    Y = snapshots.data
    N, L = Y.shape
    if n_sources >= N:
        raise ValueError("n_sources must be below the sensor count")
    S = Y @ Y.conj().T / L
    sigma2 = float((np.trace(S) - np.trace(projector @ S)).real) / (N - n_sources)
    sigma2 = max(sigma2, _variance_floor(Y, sigma_floor))
    return NoiseEstimate(variances=np.full((N, L), sigma2), structure=NoiseCase.I)


def noise_estimate_case2(snapshots: SnapshotMatrix, projector: np.ndarray,
                         n_sources: int, sigma_floor: float = 1e-10) -> NoiseEstimate:
    """Per-snapshot variance ||(I - P) y_l||^2 / (N - K), column-constant."""
    Y = snapshots.data
    N, L = Y.shape
    if n_sources >= N:
        raise ValueError("n_sources must be below the sensor count")
    resid = Y - projector @ Y
    sigma2 = np.sum(np.abs(resid) ** 2, axis=0) / (N - n_sources)
    sigma2 = _floored(sigma2, _variance_floor(Y, sigma_floor))
    return NoiseEstimate(variances=np.broadcast_to(sigma2, (N, L)).copy(),
                         structure=NoiseCase.II)


def noise_estimate_case3(snapshots: SnapshotMatrix, projector: np.ndarray,
                         sigma_floor: float = 1e-10) -> NoiseEstimate:
    """Entrywise variance |[(I - P) y_l]_n|^2, the diagonal of the rank-1 residual."""
    Y = snapshots.data
    resid = Y - projector @ Y
    var = _floored(np.abs(resid) ** 2, _variance_floor(Y, sigma_floor))
    return NoiseEstimate(variances=var, structure=NoiseCase.III)


def noise_estimate_em(snapshots: SnapshotMatrix, dictionary: SteeringDictionary,
                      gamma: GammaSpectrum, noise_old: NoiseEstimate,
                      sigma_floor: float = 1e-10) -> NoiseEstimate:
    """EM-style per-snapshot variance update.

    sigma_l^2 <- (||y_l - A x_map_l||^2
                  + sigma_l^2_old * (K - sum_i (Sigma_xl)_ii / gamma_i)) / N
    with the sum restricted to the support of gamma (K = support size).
    """
    sup = gamma.support
    if sup.size == 0:
        raise ValueError("gamma support is empty")
    Y = snapshots.data
    N, L = Y.shape
    stats = posterior_stats(snapshots, dictionary, gamma, noise_old)
    resid = Y - dictionary.matrix[:, sup] @ stats.x_map[sup, :]
    ssq = np.sum(np.abs(resid) ** 2, axis=0)                      # (L,)
    diag_sx = np.diagonal(stats.sigma_x, axis1=1, axis2=2).real   # (L, K)
    correction = sup.size - np.sum(diag_sx / gamma.values[sup][None, :], axis=1)
    sigma2_old = noise_old.per_snapshot
    sigma2 = (ssq + sigma2_old * correction) / N
    sigma2 = _floored(sigma2, _variance_floor(Y, sigma_floor))
    return NoiseEstimate(variances=np.broadcast_to(sigma2, (N, L)).copy(),
                         structure=NoiseCase.II)


def posterior_stats(snapshots: SnapshotMatrix, dictionary: SteeringDictionary,
                    gamma: GammaSpectrum, noise: NoiseEstimate) -> PosteriorStats:
    """Posterior mean x_map = Gamma A^H Sigma_yl^-1 y_l and covariance.

    The covariance (A_S^H Sigma_nl^-1 A_S + Gamma_S^-1)^-1 is evaluated on
    the support S of gamma for every snapshot.
    """
    sup = gamma.support
    if sup.size == 0:
        raise ValueError("gamma support is empty")
    A = dictionary.matrix
    Y = snapshots.data
    N, L = Y.shape
    var = noise.variances
    if np.any(var <= 0.0):
        raise ValueError("noise variances must be strictly positive")
    g = gamma.values
    B = _signal_covariance(A, g)
    sig = np.broadcast_to(B, (L, N, N)).copy()
    diag = np.arange(N)
    sig[:, diag, diag] += var.T
    try:
        Z = np.linalg.solve(sig, Y.T[:, :, None])[:, :, 0].T      # Sigma_l^-1 y_l
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"data covariance solve failed: {exc}") from exc
    x_map = np.zeros((A.shape[1], L), dtype=np.complex128)
    As = A[:, sup]
    x_map[sup, :] = g[sup][:, None] * (As.conj().T @ Z)
    # Information-form covariance on the support.
    info = np.einsum("ns,nl,nk->lsk", As.conj(), 1.0 / var, As, optimize=True)
    info[:, np.arange(sup.size), np.arange(sup.size)] += 1.0 / g[sup]
    try:
        sigma_x = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"posterior covariance inversion failed: {exc}") from exc
    return PosteriorStats(x_map=x_map, sigma_x=sigma_x, support=sup)


def log_likelihood(snapshots: SnapshotMatrix, dictionary: SteeringDictionary,
                   gamma: GammaSpectrum, noise: NoiseEstimate) -> float:
    """-sum_l (y_l^H Sigma_yl^-1 y_l + log det Sigma_yl), constants dropped.

    Diagnostic only; the fixed-point iteration is not guaranteed monotone
    in this value.
    """
    A = dictionary.matrix
    Y = snapshots.data
    N, L = Y.shape
    B = _signal_covariance(A, gamma.values)
    sig = np.broadcast_to(B, (L, N, N)).copy()
    diag = np.arange(N)
    sig[:, diag, diag] += noise.variances.T
    try:
        chol = np.linalg.cholesky(sig)
    except np.linalg.LinAlgError as exc:
        raise NumericError("data covariance is not positive definite") from exc
    logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2).real), axis=1)
    Z = np.linalg.solve(sig, Y.T[:, :, None])[:, :, 0]
    quad = np.sum(Y.T.conj() * Z, axis=1).real
    return float(-np.sum(quad + logdet))


def _initial_noise(snapshots: SnapshotMatrix, model: SolverNoiseModel,
                   sigma_floor: float) -> NoiseEstimate:
    """No-source overestimate: the configured estimator with P = 0, K = 0."""
    N = snapshots.n_sensors
    P0 = np.zeros((N, N))
    if model == SolverNoiseModel.CASE_I:
        return noise_estimate_case1(snapshots, P0, 0, sigma_floor)
    if model == SolverNoiseModel.CASE_III:
        return noise_estimate_case3(snapshots, P0, sigma_floor)
    # Both per-snapshot estimators start from ||y_l||^2 / N.
    return noise_estimate_case2(snapshots, P0, 0, sigma_floor)


def initialize(snapshots: SnapshotMatrix, dictionary: SteeringDictionary,
               config: SblConfig) -> tuple[GammaSpectrum, NoiseEstimate]:
    """Beamformer-power gamma and a no-source noise overestimate."""
    S = sample_covariance(snapshots)
    A = dictionary.matrix
    g = np.einsum("nm,nk,km->m", A.conj(), S.matrix, A, optimize=True).real
    np.clip(g, 0.0, None, out=g)
    return (GammaSpectrum(values=g),
            _initial_noise(snapshots, config.noise_model, config.sigma_floor))


def _estimate_noise(snapshots, dictionary, config, gamma, projector, noise_old):
    model = config.noise_model
    if model == SolverNoiseModel.CASE_I:
        return noise_estimate_case1(snapshots, projector, config.n_sources,
                                    config.sigma_floor)
    if model == SolverNoiseModel.CASE_II:
        return noise_estimate_case2(snapshots, projector, config.n_sources,
                                    config.sigma_floor)
    if model == SolverNoiseModel.CASE_III:
        return noise_estimate_case3(snapshots, projector, config.sigma_floor)
    return noise_estimate_em(snapshots, dictionary, gamma, noise_old,
                             config.sigma_floor)


def _masked_gamma(gamma: GammaSpectrum, active_set: np.ndarray) -> GammaSpectrum:
    masked = np.zeros_like(gamma.values)
    masked[active_set] = gamma.values[active_set]
    return GammaSpectrum(values=masked)


SBL_CSV_SCHEMA = "# hetdoa sbl-result schema v1"


def write_sbl_result_csv(path, result: "SblResult", grid, seed=None):
    """Export (angle_deg, gamma) with a run-metadata comment record."""
    final_eps = float(result.eps_trace[-1]) if result.iterations else 0.0
    with open(path, "w", newline="") as f:
        f.write(SBL_CSV_SCHEMA + "\n")
        f.write(f"# iterations={result.iterations} converged={result.converged} "
                f"final_eps={final_eps!r} noise_case={result.noise.structure.value} "
                f"seed={seed}\n")
        writer = csv.writer(f)
        writer.writerow(["angle_deg", "gamma"])
        for ang, g in zip(grid.angles, result.gamma.values):
            writer.writerow([repr(float(ang)), repr(float(g))])


def sbl_run(snapshots: SnapshotMatrix, dictionary: SteeringDictionary,
            config: SblConfig, gamma_init: GammaSpectrum | None = None,
            record_noise_trace: bool = False) -> SblResult:
    """Run the solver loop to convergence or the iteration cap.

    Each iteration updates gamma on all grid points, selects the K largest
    peaks, projects them out, and re-estimates the noise. Stops when the
    relative L1 change of gamma drops to eps_min. Hitting j_max without
    convergence is reported via the `converged` flag, not an error.

    For Cases I and II (and the EM variant) the re-estimated noise feeds
    the next gamma update. For Case III the gamma updates stay weighted by
    the no-source overestimate |y_nl|^2: the per-entry projected-residual
    estimate is only reliable once the sources are strong or located, so
    feeding it back lets an early wrong peak absorb the true source into
    the noise and lock itself in. The projected-residual estimate is still
    computed every iteration and reported as the noise output.
    """
    if config.n_sources >= snapshots.n_sensors:
        raise ValueError("n_sources must be below the sensor count")
    gamma_cbf, noise = initialize(snapshots, dictionary, config)
    gamma = gamma_init if gamma_init is not None else gamma_cbf
    if gamma.values.shape != (dictionary.n_angles,):
        raise ValueError("gamma_init length does not match the grid")
    case3 = config.noise_model == SolverNoiseModel.CASE_III
    weighting = noise  # what the gamma update sees
    active = select_active_set(gamma, config.n_sources)
    eps = 2.0 * config.eps_min
    eps_trace = []
    noise_trace = []
    iteration = 0
    while eps > config.eps_min and iteration < config.j_max:
        try:
            gamma_old = gamma
            gamma = gamma_update(snapshots, dictionary, gamma_old, weighting, config.b)
            active = select_active_set(gamma, config.n_sources)
            projector = projection_matrix(dictionary, active)
            if config.noise_model == SolverNoiseModel.CASE_II_EM:
                noise = noise_estimate_em(snapshots, dictionary,
                                          _masked_gamma(gamma, active), noise,
                                          config.sigma_floor)
            else:
                noise = _estimate_noise(snapshots, dictionary, config,
                                        gamma, projector, noise)
            if not case3:
                weighting = noise
        except NumericError as exc:
            raise NumericError(f"iteration {iteration + 1}: {exc}") from exc
        old_norm = float(np.sum(np.abs(gamma_old.values)))
        new_norm = float(np.sum(np.abs(gamma.values - gamma_old.values)))
        eps = new_norm / old_norm if old_norm > 0.0 else (0.0 if new_norm == 0.0 else np.inf)
        iteration += 1
        eps_trace.append(eps)
        if record_noise_trace:
            noise_trace.append(noise.variances.copy())
    return SblResult(gamma=gamma, active_set=active, noise=noise,
                     iterations=iteration, eps_trace=np.asarray(eps_trace),
                     converged=bool(eps <= config.eps_min),
                     noise_trace=tuple(noise_trace))
