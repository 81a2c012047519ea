"""Sensor-array geometry, angular grids, and steering dictionaries.

A linear array of N sensors observes narrowband plane waves. For a wave
from direction theta (degrees, broadside = 0), sensor n at offset d_n
meters from the reference element sees the phase factor
exp(-1j * (omega * d_n / c) * sin(theta)). Stacking these phase responses
for every angle of a search grid gives the N x M steering dictionary used
by all estimators in this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Reference sound speed used by the wavelength-based constructor. Only the
# product omega * d_n / c enters the steering phase, so any consistent
# (omega, c) pair representing the chosen wavelength is equivalent.
DEFAULT_SOUND_SPEED = 343.0

_UNIT_MODULUS_TOL = 1e-12
_COLUMN_NORM_RTOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ArrayGeometry:
    """Physical description of a linear sensor array.

    Parameters
    ----------
    positions : tuple of float
        Sensor offsets d_n in meters from the reference element.
    frequency : float
        Angular frequency omega in rad/s of the narrowband signal.
    sound_speed : float
        Propagation speed c in m/s.
    """

    positions: tuple[float, ...]
    frequency: float
    sound_speed: float

    def __post_init__(self):
        pos = tuple(float(p) for p in self.positions)
        if len(pos) < 2:
            raise ValueError("array needs at least 2 sensors")
        if not all(math.isfinite(p) for p in pos):
            raise ValueError("sensor positions must be finite")
        if not (self.frequency > 0.0):
            raise ValueError("frequency must be positive")
        if not (self.sound_speed > 0.0):
            raise ValueError("sound_speed must be positive")
        object.__setattr__(self, "positions", pos)

    @property
    def n_sensors(self) -> int:
        return len(self.positions)

    @property
    def wavenumber(self) -> float:
        """omega / c in rad/m."""
        return self.frequency / self.sound_speed


@dataclass(frozen=True)
class AngularGrid:
    """Strictly increasing grid of DOA hypotheses in degrees, within [-90, 90]."""

    angles_deg: tuple[float, ...]

    def __post_init__(self):
        ang = tuple(float(a) for a in self.angles_deg)
        if len(ang) < 2:
            raise ValueError("grid needs at least 2 angles")
        arr = np.asarray(ang)
        if np.any(arr < -90.0) or np.any(arr > 90.0):
            raise ValueError("grid angles must lie in [-90, 90] degrees")
        if np.any(np.diff(arr) <= 0.0):
            raise ValueError("grid angles must be strictly increasing")
        object.__setattr__(self, "angles_deg", ang)

    @property
    def size(self) -> int:
        return len(self.angles_deg)

    @property
    def angles(self) -> np.ndarray:
        return np.asarray(self.angles_deg)

    def index_of(self, angle_deg: float, atol: float = 1e-9) -> int:
        """Index of an on-grid angle; raises if no grid point matches."""
        hits = np.nonzero(np.abs(self.angles - angle_deg) <= atol)[0]
        if hits.size == 0:
            raise ValueError(f"angle {angle_deg} deg is not on the grid")
        return int(hits[0])


@dataclass(frozen=True)
class SteeringDictionary:
    """N x M matrix of steering vectors, one column per grid angle."""

    matrix: np.ndarray
    geometry: ArrayGeometry
    grid: AngularGrid

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        n_sensors = self.geometry.n_sensors
        if m.shape != (n_sensors, self.grid.size):
            raise ValueError(f"dictionary shape {m.shape} does not match "
                             f"({n_sensors}, {self.grid.size})")
        if np.max(np.abs(np.abs(m) - 1.0)) > _UNIT_MODULUS_TOL:
            raise ValueError("dictionary entries must be unit modulus")
        norms = np.sum(np.abs(m) ** 2, axis=0)
        if np.max(np.abs(norms - n_sensors)) > _COLUMN_NORM_RTOL * n_sensors:
            raise ValueError("dictionary column norms must equal sqrt(N)")
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def n_sensors(self) -> int:
        return self.geometry.n_sensors

    @property
    def n_angles(self) -> int:
        return self.grid.size


def build_ula_geometry(n_sensors: int, spacing_wavelengths: float) -> ArrayGeometry:
    """Uniform linear array with the given element spacing in wavelengths.

    The wavelength is fixed at 1 m with the reference sound speed, which
    leaves the steering phase omega * d_n / c = 2*pi*spacing*n unchanged
    relative to any other consistent unit choice.
    """
    if n_sensors < 2:
        raise ValueError("n_sensors must be at least 2")
    if not (spacing_wavelengths > 0.0):
        raise ValueError("spacing_wavelengths must be positive")
    wavelength = 1.0
    omega = 2.0 * math.pi * DEFAULT_SOUND_SPEED / wavelength
    positions = tuple(n * spacing_wavelengths * wavelength for n in range(n_sensors))
    return ArrayGeometry(positions=positions, frequency=omega,
                         sound_speed=DEFAULT_SOUND_SPEED)


def build_angular_grid(min_deg: float, max_deg: float, step_deg: float) -> AngularGrid:
    """Inclusive uniform grid from min_deg to max_deg with the given step.

    The step must divide the span to within 1e-9.
    """
    if not (step_deg > 0.0):
        raise ValueError("step_deg must be positive")
    if not (min_deg < max_deg):
        raise ValueError("min_deg must be below max_deg")
    span = max_deg - min_deg
    n_steps = span / step_deg
    if abs(n_steps - round(n_steps)) > 1e-9:
        raise ValueError(f"step {step_deg} does not divide span [{min_deg}, {max_deg}]")
    n_steps = int(round(n_steps))
    angles = np.linspace(min_deg, max_deg, n_steps + 1)
    return AngularGrid(angles_deg=tuple(angles))


def steering_vector(geom: ArrayGeometry, theta_deg: float) -> np.ndarray:
    """Complex array response for a plane wave from theta_deg degrees."""
    if not (-90.0 <= theta_deg <= 90.0):
        raise ValueError("theta_deg must lie in [-90, 90]")
    phase = geom.wavenumber * np.asarray(geom.positions) * math.sin(math.radians(theta_deg))
    return np.exp(-1j * phase)


def build_dictionary(geom: ArrayGeometry, grid: AngularGrid) -> SteeringDictionary:
    """Steering dictionary whose column m is steering_vector(geom, theta_m)."""
    cols = [steering_vector(geom, theta) for theta in grid.angles_deg]
    return SteeringDictionary(matrix=np.stack(cols, axis=1), geometry=geom, grid=grid)
