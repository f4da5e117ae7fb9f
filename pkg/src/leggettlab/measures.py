"""Measures dF over pairs of hidden unit vectors (u, v).

Three kinds are built in:

* :class:`ProductUniform` -- u and v independent and uniform on the sphere;
* :class:`AlignedUniform` -- u uniform and ``v = sign * u``;
* :class:`GridMeasure` -- a finite set of weighted atoms.

None of the measure methods accept detector settings: the distribution of
the hidden vectors is local by construction.  Angles are always expressed
in a frame (default: canonical) whose pole plays the role of the fixed Z
axis ``p`` of the inequality chain.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

import numpy as np

from .geometry import CANONICAL, Frame, from_spherical, plane_normal, orthonormal_frame, random_unit_vectors, wrap_angle
from .quad import DEFAULT_RESOLUTION, QuadratureGrid, Resolution, composite_gauss_legendre, gauss_legendre, uniform_periodic

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class PairAngleGrid:
    """Quadrature over ``(theta_u, phi_u, theta_v, phi_v)`` whose weights already include dF.

    Product measures are kept factorized (``u_nodes`` x ``v_nodes``) and only
    expanded block by block; paired measures hold explicit node arrays.
    """

    u_nodes: np.ndarray  # (m, 2) or (m, 4) when paired
    u_weights: np.ndarray
    v_nodes: np.ndarray | None = None
    v_weights: np.ndarray | None = None

    @property
    def factorized(self) -> bool:
        return self.v_nodes is not None

    @property
    def size(self) -> int:
        return len(self.u_weights) * (len(self.v_weights) if self.factorized else 1)

    @property
    def total_weight(self) -> float:
        if self.factorized:
            return float(np.sum(self.u_weights) * np.sum(self.v_weights))
        return float(np.sum(self.u_weights))

    def blocks(self, max_nodes: int = 1 << 22) -> Iterator[tuple[np.ndarray, ...]]:
        """Yield ``(theta_u, phi_u, theta_v, phi_v, weight)`` arrays of bounded size."""
        if not self.factorized:
            n = self.u_nodes
            yield n[:, 0], n[:, 1], n[:, 2], n[:, 3], self.u_weights
            return
        nv = len(self.v_weights)
        step = max(1, max_nodes // nv)
        for start in range(0, len(self.u_weights), step):
            un = self.u_nodes[start:start + step]
            uw = self.u_weights[start:start + step]
            yield (
                un[:, 0, None], un[:, 1, None],
                self.v_nodes[None, :, 0], self.v_nodes[None, :, 1],
                uw[:, None] * self.v_weights[None, :],
            )

    def materialize(self) -> QuadratureGrid:
        cols, weights = [], []
        for tu, pu, tv, pv, w in self.blocks():
            arrays = np.broadcast_arrays(tu, pu, tv, pv, w)
            cols.append(np.stack([a.reshape(-1) for a in arrays[:4]], axis=1))
            weights.append(arrays[4].reshape(-1))
        return QuadratureGrid(np.concatenate(cols), np.concatenate(weights))


def sphere_grid(resolution: Resolution) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(theta, phi, weight)`` for the uniform probability measure on S^2."""
    # split at the equator: |cos theta| integrands are then exact
    gt = composite_gauss_legendre(max(resolution.theta // 2, 1), [0.0, np.pi / 2, np.pi])
    gp = uniform_periodic(resolution.azimuth)
    nt = len(gt)
    theta = np.repeat(gt.points[:, 0], resolution.azimuth)
    phi = np.tile(gp.points[:, 0], nt)
    w = np.repeat(gt.weights * np.sin(gt.points[:, 0]), resolution.azimuth) * np.tile(gp.weights, nt)
    return theta, phi, w / FOUR_PI


@dataclass(frozen=True)
class Projection:
    """Push-forward of dF under ``(u, v) -> (u.a, v.b)`` as weighted points."""

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray


@lru_cache(maxsize=8)
def _product_projection(n_theta: int) -> Projection:
    # Pole along the setting: the azimuth integrates out exactly and the
    # polar rule in cos(theta) carries the whole arm integral.
    g = gauss_legendre(4 * n_theta, -1.0, 1.0)
    x = g.points[:, 0]
    w = g.weights / 2.0
    return Projection(np.repeat(x, len(x)), np.tile(x, len(x)), np.repeat(w, len(w)) * np.tile(w, len(w)))


class VectorPairMeasure:
    kind: str = "abstract"
    rotation_invariant: bool = False
    singular: bool = True

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def quadrature_view(self, resolution: Resolution = DEFAULT_RESOLUTION, frame: Frame = CANONICAL) -> PairAngleGrid:
        raise NotImplementedError

    def project(self, a, b, resolution: Resolution = DEFAULT_RESOLUTION) -> Projection:
        raise NotImplementedError

    def rho_nodes(self, resolution: Resolution = DEFAULT_RESOLUTION, frame: Frame = CANONICAL, breaks=()):
        """Discrete ``rho dtheta_u dtheta_v dchi`` as ``(theta_u, theta_v, chi, weight)``."""
        raise NotImplementedError

    def mu_nodes(self, resolution: Resolution = DEFAULT_RESOLUTION, frame: Frame = CANONICAL):
        """Discrete ``mu dtheta_u dtheta_v`` as ``(theta_u, theta_v, weight)``."""
        raise NotImplementedError

    def expect_many(self, g, a, b, resolution: Resolution = DEFAULT_RESOLUTION) -> np.ndarray:
        """``int dF g(u.a_k, v.b_k)`` for each row ``k`` of the setting arrays ``a, b`` of shape ``(k, 3)``."""
        a = np.atleast_2d(np.asarray(a, float))
        b = np.atleast_2d(np.asarray(b, float))
        out = np.empty(len(a))
        for k in range(len(a)):
            pr = self.project(a[k], b[k], resolution)
            out[k] = np.sum(pr.w * g(pr.x, pr.y))
        return out

    def expectation(self, f, resolution: Resolution = DEFAULT_RESOLUTION) -> float:
        """``int dF f(u, v)`` for ``f`` vectorized over ``(m, 3)`` arrays (small grids only)."""
        total = 0.0
        for tu, pu, tv, pv, w in self.quadrature_view(resolution).blocks(1 << 20):
            tu, pu, tv, pv, w = (a.reshape(-1) for a in np.broadcast_arrays(tu, pu, tv, pv, w))
            total += float(np.sum(w * f(from_spherical(tu, pu), from_spherical(tv, pv))))
        return total


class ProductUniform(VectorPairMeasure):
    """Independent uniform u and v; ``F_S = sin(theta_u) sin(theta_v) / (16 pi^2)``."""

    kind = "product_uniform"
    rotation_invariant = True
    singular = False

    def __eq__(self, other):
        return isinstance(other, ProductUniform)

    def __hash__(self):
        return hash(self.kind)

    def __repr__(self):
        return "ProductUniform()"

    def sample(self, rng, n):
        return random_unit_vectors(rng, n), random_unit_vectors(rng, n)

    def density(self, theta_u, phi_u, theta_v, phi_v):
        return np.sin(theta_u) * np.sin(theta_v) / FOUR_PI**2 + 0.0 * (phi_u + phi_v)

    def quadrature_view(self, resolution=DEFAULT_RESOLUTION, frame=CANONICAL):
        theta, phi, w = sphere_grid(resolution)
        nodes = np.stack([theta, phi], axis=1)
        return PairAngleGrid(nodes, w, nodes, w)

    def project(self, a, b, resolution=DEFAULT_RESOLUTION):
        return _product_projection(resolution.theta)

    def expect_many(self, g, a, b, resolution=DEFAULT_RESOLUTION):
        # The push-forward is the same for every setting pair.
        pr = self.project(None, None, resolution)
        return np.full(len(np.atleast_2d(a)), float(np.sum(pr.w * g(pr.x, pr.y))))

    def rho(self, theta_u, theta_v, chi):
        chi = np.asarray(chi, dtype=float)
        width = np.clip(2.0 * np.pi - np.abs(chi), 0.0, None)
        return width * np.sin(theta_u) * np.sin(theta_v) / FOUR_PI**2

    def mu(self, theta_u, theta_v):
        return np.sin(theta_u) * np.sin(theta_v) / 4.0

    def rho_nodes(self, resolution=DEFAULT_RESOLUTION, frame=CANONICAL, breaks=()):
        gt = gauss_legendre(resolution.theta, 0.0, np.pi)
        cuts = [-2 * np.pi, 0.0, 2 * np.pi, *[c for c in breaks if -2 * np.pi < c < 2 * np.pi]]
        gc = composite_gauss_legendre(resolution.theta, cuts)
        t = gt.points[:, 0]
        c = gc.points[:, 0]
        tu, tv, ch = np.meshgrid(t, t, c, indexing="ij")
        w = gt.weights[:, None, None] * gt.weights[None, :, None] * gc.weights[None, None, :]
        return tu.ravel(), tv.ravel(), ch.ravel(), (w * self.rho(tu, tv, ch)).ravel()

    def mu_nodes(self, resolution=DEFAULT_RESOLUTION, frame=CANONICAL):
        gt = gauss_legendre(resolution.theta, 0.0, np.pi)
        t = gt.points[:, 0]
        tu, tv = np.meshgrid(t, t, indexing="ij")
        w = np.outer(gt.weights, gt.weights) * self.mu(tu, tv)
        return tu.ravel(), tv.ravel(), w.ravel()


@dataclass(frozen=True)
class AlignedUniform(VectorPairMeasure):
    """u uniform on the sphere, ``v = sign * u`` (sign = -1 is the singlet-like case)."""

    sign: int = -1
    kind = "aligned_uniform"
    rotation_invariant = True

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def sample(self, rng, n):
        u = random_unit_vectors(rng, n)
        return u, self.sign * u

    def _partner(self, theta, phi):
        if self.sign > 0:
            return theta, phi
        return np.pi - theta, wrap_angle(phi + np.pi)

    def quadrature_view(self, resolution=DEFAULT_RESOLUTION, frame=CANONICAL):
        theta, phi, w = sphere_grid(resolution)
        tv, pv = self._partner(theta, phi)
        return PairAngleGrid(np.stack([theta, phi, tv, pv], axis=1), w)

    def project(self, a, b, resolution=DEFAULT_RESOLUTION):
        # Pole along a when a and b are parallel (integrand depends on theta
        # only), otherwise normal to their plane (smooth in theta).
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        parallel = np.linalg.norm(np.cross(a, b)) < 1e-12
        frame = orthonormal_frame(a if parallel else plane_normal(a, b))
        theta, phi, w = sphere_grid(resolution)
        u = frame.from_local(from_spherical(theta, phi))
        return Projection(u @ np.asarray(a, float), self.sign * (u @ np.asarray(b, float)), w)

    def expect_many(self, g, a, b, resolution=DEFAULT_RESOLUTION):
        a = np.atleast_2d(np.asarray(a, float))
        b = np.atleast_2d(np.asarray(b, float))
        out = np.empty(len(a))
        parallel = np.linalg.norm(np.cross(a, b), axis=-1) < 1e-12
        if parallel.any():
            out[parallel] = super().expect_many(g, a[parallel], b[parallel], resolution)
        rest = np.flatnonzero(~parallel)
        if len(rest) == 0:
            return out
        n = plane_normal(a[rest[0]], b[rest[0]])
        if np.max(np.abs(a[rest] @ n)) > 1e-12 or np.max(np.abs(b[rest] @ n)) > 1e-12:
            out[rest] = super().expect_many(g, a[rest], b[rest], resolution)
            return out
        # all remaining settings share one plane: one grid serves every row
        frame = orthonormal_frame(n)
        theta, phi, w = sphere_grid(resolution)
        u = frame.from_local(from_spherical(theta, phi))
        step = max(1, (1 << 22) // len(w))
        for k in range(0, len(rest), step):
            idx = rest[k:k + step]
            x = u @ a[idx].T
            y = self.sign * (u @ b[idx].T)
            out[idx] = w @ g(x, y)
        return out

    def mu_nodes(self, resolution=DEFAULT_RESOLUTION, frame=CANONICAL):
        gt = gauss_legendre(resolution.theta, 0.0, np.pi)
        t = gt.points[:, 0]
        tv, _ = self._partner(t, 0.0)
        return t, np.broadcast_to(tv, t.shape).copy(), gt.weights * np.sin(t) / 2.0

    def rho_nodes(self, resolution=DEFAULT_RESOLUTION, frame=CANONICAL, breaks=()):
        tu, tv, w = self.mu_nodes(resolution, frame)
        if self.sign > 0:
            return tu, tv, np.zeros_like(tu), w
        # phi_v = phi_u + pi wrapped: chi = -pi on half the circle, +pi on the other
        ch = np.concatenate([np.full_like(tu, -np.pi), np.full_like(tu, np.pi)])
        return np.tile(tu, 2), np.tile(tv, 2), ch, np.tile(w / 2.0, 2)


@dataclass(frozen=True, eq=False)
class GridMeasure(VectorPairMeasure):
    """Finite measure; ``atoms`` rows are ``(theta_u, phi_u, theta_v, phi_v, weight)`` in the canonical frame."""

    atoms: np.ndarray
    renormalized: bool = field(default=False, compare=False)
    kind = "grid"

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        if atoms.size == 0 or atoms.shape[0] == 0:
            raise ValueError("grid measure needs at least one atom")
        if atoms.shape[1] != 5:
            raise ValueError("grid atoms need 5 columns: theta_u phi_u theta_v phi_v weight")
        if np.any(atoms[:, 4] < 0):
            raise ValueError("grid atom weights must be nonnegative")
        total = atoms[:, 4].sum()
        if total <= 0:
            raise ValueError("grid atom weights sum to zero")
        atoms = atoms.copy()
        renorm = abs(total - 1.0) > 1e-10
        atoms[:, 4] /= total
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "renormalized", renorm or self.renormalized)

    def __eq__(self, other):
        return isinstance(other, GridMeasure) and np.array_equal(self.atoms, other.atoms)

    def __hash__(self):
        return hash(self.atoms.tobytes())

    @property
    def u(self) -> np.ndarray:
        return from_spherical(self.atoms[:, 0], self.atoms[:, 1])

    @property
    def v(self) -> np.ndarray:
        return from_spherical(self.atoms[:, 2], self.atoms[:, 3])

    @property
    def weights(self) -> np.ndarray:
        return self.atoms[:, 4]

    def sample(self, rng, n):
        idx = rng.choice(len(self.weights), size=n, p=self.weights)
        return self.u[idx], self.v[idx]

    def _frame_angles(self, frame):
        tu, pu = frame.angles(self.u)
        tv, pv = frame.angles(self.v)
        return tu, pu, tv, pv

    def quadrature_view(self, resolution=DEFAULT_RESOLUTION, frame=CANONICAL):
        return PairAngleGrid(np.stack(self._frame_angles(frame), axis=1), self.weights.copy())

    def project(self, a, b, resolution=DEFAULT_RESOLUTION):
        return Projection(self.u @ np.asarray(a, float), self.v @ np.asarray(b, float), self.weights.copy())

    def expect_many(self, g, a, b, resolution=DEFAULT_RESOLUTION):
        x = self.u @ np.atleast_2d(np.asarray(a, float)).T
        y = self.v @ np.atleast_2d(np.asarray(b, float)).T
        return self.weights @ g(x, y)

    def rho_nodes(self, resolution=DEFAULT_RESOLUTION, frame=CANONICAL, breaks=()):
        tu, pu, tv, pv = self._frame_angles(frame)
        return tu, tv, pu - pv, self.weights.copy()

    def mu_nodes(self, resolution=DEFAULT_RESOLUTION, frame=CANONICAL):
        tu, _, tv, _ = self._frame_angles(frame)
        return tu, tv, self.weights.copy()


def sample_pair(measure: VectorPairMeasure, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    u, v = measure.sample(rng, 1)
    return u[0], v[0]


def quadrature_view(measure: VectorPairMeasure, resolution: Resolution = DEFAULT_RESOLUTION, frame: Frame = CANONICAL):
    return measure.quadrature_view(resolution, frame)


def marginal_rho(measure: VectorPairMeasure, theta_u, theta_v, chi):
    """Density of ``(theta_u, theta_v, chi = phi_u - phi_v)`` for continuous measures."""
    if measure.singular:
        raise ValueError(f"{measure.kind} has no rho density; use marginal_rho_binned")
    return measure.rho(theta_u, theta_v, chi)


def marginal_mu(measure: VectorPairMeasure, theta_u, theta_v):
    if measure.singular:
        raise ValueError(f"{measure.kind} has no mu density; use marginal_mu_binned")
    return measure.mu(theta_u, theta_v)


def marginal_rho_binned(measure, theta_edges, chi_edges, resolution=DEFAULT_RESOLUTION, frame=CANONICAL):
    """Mass of rho in each ``(theta_u, theta_v, chi)`` cell, shape ``(nt, nt, nc)``."""
    tu, tv, ch, w = measure.rho_nodes(resolution, frame)
    hist, _ = np.histogramdd(np.stack([tu, tv, ch], axis=1), bins=[theta_edges, theta_edges, chi_edges], weights=w)
    return hist


def marginal_mu_binned(measure, theta_edges, resolution=DEFAULT_RESOLUTION, frame=CANONICAL):
    tu, tv, w = measure.mu_nodes(resolution, frame)
    hist, _, _ = np.histogram2d(tu, tv, bins=[theta_edges, theta_edges], weights=w)
    return hist
