"""Array geometry, angular grids, beam masks and radar scenes.

All angles are in radians, measured from broadside, and the transmit and
receive arrays share one geometry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HALF_PI = np.pi / 2
# Allow grids built with linspace to sit a few ulps outside [-pi/2, pi/2].
_ANGLE_SLACK = 1e-12


def _check_angle(angle: float) -> None:
    if not np.isfinite(angle) or abs(angle) > HALF_PI + _ANGLE_SLACK:
        raise ValueError(f"angle {angle!r} outside [-pi/2, pi/2]")


@dataclass(frozen=True)
class UlaArray:
    """Uniform linear array with ``num_elements`` antennas.

    Parameters
    ----------
    num_elements : int
        Number of antennas N.
    element_spacing : float
        Inter-element spacing in wavelengths.
    """

    num_elements: int
    element_spacing: float = 0.5

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ValueError("num_elements must be a positive integer")
        if not self.element_spacing > 0:
            raise ValueError("element_spacing must be positive")

    def steering(self, angles) -> np.ndarray:
        """Steering vectors for one angle (shape (N,)) or many (shape (L, N))."""
        angles = np.asarray(angles, dtype=float)
        n = np.arange(self.num_elements)
        phase = 2j * np.pi * self.element_spacing * np.multiply.outer(np.sin(angles), n)
        return np.exp(phase)


def steering_vector(array: UlaArray, angle: float) -> np.ndarray:
    """Return a(angle) with entries exp(j 2 pi d n sin(angle)), n = 0..N-1."""
    if not np.isfinite(angle):
        raise ValueError("angle must be finite")
    return array.steering(float(angle))


@dataclass(frozen=True)
class AngularGrid:
    """Ordered angular sample points in [-pi/2, pi/2]."""

    angles: np.ndarray

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float).reshape(-1)
        if angles.size == 0:
            raise ValueError("grid must contain at least one angle")
        if np.any(np.diff(angles) <= 0):
            raise ValueError("grid angles must be strictly increasing")
        if np.any(np.abs(angles) > HALF_PI + _ANGLE_SLACK):
            raise ValueError("grid angles must lie in [-pi/2, pi/2]")
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)

    def __len__(self) -> int:
        return self.angles.size


def uniform_grid(num_points: int) -> AngularGrid:
    """``num_points`` equally spaced angles from -pi/2 to pi/2 inclusive."""
    if int(num_points) != num_points or num_points < 2:
        raise ValueError("a uniform grid needs at least 2 points")
    angles = np.linspace(-HALF_PI, HALF_PI, int(num_points))
    return AngularGrid(angles)


@dataclass(frozen=True)
class BeamMask:
    """Desired normalized transmit beam power d(theta) sampled on a grid.

    ``centers`` records the beam directions the mask was built around; the
    solvers use them to seed the radar columns.
    """

    grid: AngularGrid
    values: np.ndarray
    centers: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.size != len(self.grid):
            raise ValueError(
                f"mask has {values.size} values but grid has {len(self.grid)} angles")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("mask values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)


def rect_mask(grid: AngularGrid, centers: Sequence[float], half_width: float) -> BeamMask:
    """Unit plateaus of half-width ``half_width`` around each center, zero elsewhere."""
    if not half_width > 0:
        raise ValueError("half_width must be positive")
    values = np.zeros(len(grid))
    for c in centers:
        values[np.abs(grid.angles - c) <= half_width] = 1.0
    return BeamMask(grid, values, tuple(centers))


@dataclass(frozen=True)
class RadarScene:
    """Known point targets and clutter reflectors.

    Each entry of ``targets`` / ``clutters`` is an ``(angle, coefficient)`` pair.
    """

    targets: tuple = ()
    clutters: tuple = field(default=())

    def __post_init__(self):
        def norm(items):
            out = []
            for angle, coeff in items:
                _check_angle(float(angle))
                out.append((float(angle), complex(coeff)))
            return tuple(out)

        object.__setattr__(self, "targets", norm(self.targets))
        object.__setattr__(self, "clutters", norm(self.clutters))

    @property
    def target_angles(self) -> list:
        return [a for a, _ in self.targets]

    @property
    def clutter_angles(self) -> list:
        return [a for a, _ in self.clutters]

    def require_target(self) -> None:
        if not self.targets:
            raise ValueError("radar scene has no targets")


def _reflector_matrix(items, array: UlaArray) -> np.ndarray:
    n = array.num_elements
    g = np.zeros((n, n), dtype=complex)
    for angle, coeff in items:
        a = array.steering(angle)
        g += coeff * np.outer(a, a.conj())
    return g


def target_matrices(scene: RadarScene, array: UlaArray) -> tuple:
    """Return ``(G_tar, G_cl)``, the coefficient-weighted sums of a_r a_t^H."""
    return _reflector_matrix(scene.targets, array), _reflector_matrix(scene.clutters, array)
