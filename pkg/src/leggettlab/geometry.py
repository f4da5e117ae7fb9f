"""Unit vectors, spherical angles and orthonormal frames.

Vectors are plain ``numpy`` arrays of shape ``(..., 3)``; the dataclasses
below are thin immutable wrappers used where a single named value is
clearer than an array.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-12


def wrap_angle(phi):
    """Wrap angles into ``(-pi, pi]``."""
    phi = np.asarray(phi, dtype=float)
    out = np.pi - np.mod(np.pi - phi, 2.0 * np.pi)
    return out if out.ndim else float(out)


def normalize(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(vec, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise ValueError("cannot normalize the zero vector")
    return vec / norm


@dataclass(frozen=True)
class SphericalAngles:
    theta: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(np.clip(self.theta, 0.0, np.pi)))
        object.__setattr__(self, "phi", wrap_angle(self.phi))


@dataclass(frozen=True)
class UnitVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        v = normalize([self.x, self.y, self.z])
        object.__setattr__(self, "x", float(v[0]))
        object.__setattr__(self, "y", float(v[1]))
        object.__setattr__(self, "z", float(v[2]))

    @classmethod
    def of(cls, vec) -> "UnitVector":
        return cls(*np.asarray(vec, dtype=float))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __array__(self, dtype=None, copy=None):
        return self.array if dtype is None else self.array.astype(dtype)

    def dot(self, other) -> float:
        return float(self.array @ np.asarray(other, dtype=float))


def from_spherical(theta, phi) -> np.ndarray:
    """``(sin t cos p, sin t sin p, cos t)``; broadcasts over array inputs."""
    theta = np.clip(np.asarray(theta, dtype=float), 0.0, np.pi)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def unit_from_angles(angles: SphericalAngles) -> UnitVector:
    return UnitVector.of(from_spherical(angles.theta, angles.phi))


def to_spherical(vec) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`from_spherical` for (arrays of) unit vectors."""
    vec = np.asarray(vec, dtype=float)
    theta = np.arccos(np.clip(vec[..., 2], -1.0, 1.0))
    phi = wrap_angle(np.arctan2(vec[..., 1], vec[..., 0]))
    return theta, phi


@dataclass(frozen=True)
class Frame:
    """Right-handed orthonormal triple; ``n`` is the pole, ``e1, e2`` span the detector plane."""

    e1: np.ndarray
    e2: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        for name in ("e1", "e2", "n"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def matrix(self) -> np.ndarray:
        """Rows are ``e1, e2, n``: maps canonical components to frame components."""
        return np.stack([self.e1, self.e2, self.n])

    def coordinates(self, vec) -> np.ndarray:
        return np.asarray(vec, dtype=float) @ self.matrix.T

    def angles(self, vec) -> tuple[np.ndarray, np.ndarray]:
        """Polar angle from ``n`` and azimuth from ``e1`` towards ``e2``."""
        return to_spherical(self.coordinates(vec))

    def from_local(self, local) -> np.ndarray:
        return np.asarray(local, dtype=float) @ self.matrix


CANONICAL = Frame(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))


def orthonormal_frame(n) -> Frame:
    """Deterministic frame with pole ``n``.

    ``e1`` is the normalized rejection of the canonical axis along which
    ``n`` has the smallest component (ties go to the lower axis index), so
    ``n = z`` gives the canonical frame.
    """
    n = normalize(n)
    axis = int(np.argmin(np.abs(n)))
    ref = np.zeros(3)
    ref[axis] = 1.0
    e1 = normalize(ref - (ref @ n) * n)
    e2 = np.cross(n, e1)
    return Frame(e1, e2, n)


def detector_in_plane(frame: Frame, azimuth) -> np.ndarray:
    """``cos(azimuth) e1 + sin(azimuth) e2``; broadcasts over ``azimuth``."""
    az = np.asarray(azimuth, dtype=float)[..., None]
    return np.cos(az) * frame.e1 + np.sin(az) * frame.e2


def plane_normal(a, b) -> np.ndarray:
    """Unit normal to the plane spanned by ``a`` and ``b``; any perpendicular if they are parallel."""
    a = np.asarray(a, dtype=float)
    c = np.cross(a, np.asarray(b, dtype=float))
    norm = np.linalg.norm(c)
    if norm < 1e-12:
        return orthonormal_frame(a).e1
    return c / norm


def random_unit_vectors(rng: np.random.Generator, size) -> np.ndarray:
    return normalize(rng.standard_normal((*np.atleast_1d(size), 3)))
