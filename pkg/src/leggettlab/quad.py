"""Integration backends: tensor-product quadrature and seeded Monte Carlo."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; ``seed`` may be an int, a sequence of ints or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class QuadratureGrid:
    points: np.ndarray  # (m, d)
    weights: np.ndarray  # (m,)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] == 1 and np.ndim(self.points) == 1:
            pts = pts.T
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights disagree in length")
        if np.any(w < 0):
            raise ValueError("quadrature weights must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self) -> int:
        return self.weights.shape[0]

    def integrate(self, f: Callable[..., np.ndarray]) -> float:
        """Apply the rule to ``f(x0, x1, ...)`` evaluated on the node columns."""
        vals = f(*self.points.T)
        return float(np.sum(self.weights * vals))


def gauss_legendre(n: int, lo: float = -1.0, hi: float = 1.0) -> QuadratureGrid:
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    if not lo < hi:
        raise ValueError(f"invalid interval [{lo}, {hi}]")
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return QuadratureGrid((lo + hi) / 2 + half * x, half * w)


def uniform_periodic(n: int, lo: float = -np.pi, hi: float = np.pi) -> QuadratureGrid:
    """Midpoint rule; spectrally accurate for smooth periodic integrands."""
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    if not lo < hi:
        raise ValueError(f"invalid interval [{lo}, {hi}]")
    h = (hi - lo) / n
    return QuadratureGrid(lo + h * (np.arange(n) + 0.5), np.full(n, h))


def composite_gauss_legendre(n: int, breaks: Sequence[float]) -> QuadratureGrid:
    """``n``-point Gauss-Legendre on each sub-interval between sorted distinct ``breaks``."""
    edges = np.unique(np.asarray(breaks, dtype=float))
    parts = [gauss_legendre(n, lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi - lo > 1e-14]
    return QuadratureGrid(
        np.concatenate([p.points for p in parts]), np.concatenate([p.weights for p in parts])
    )


def product_grid(grids: Sequence[QuadratureGrid]) -> QuadratureGrid:
    if not grids:
        raise ValueError("product_grid needs at least one grid")
    points, weights = grids[0].points, grids[0].weights
    for g in grids[1:]:
        m, k = len(weights), len(g)
        points = np.hstack([np.repeat(points, k, axis=0), np.tile(g.points, (m, 1))])
        weights = np.repeat(weights, k) * np.tile(g.weights, m)
    return QuadratureGrid(points, weights)


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int
    seed: object = None

    @property
    def value(self) -> float:
        return self.mean

    @property
    def error(self) -> float:
        return self.stderr


def monte_carlo_mean(
    f: Callable[[np.ndarray], np.ndarray],
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    seed=0,
) -> MCEstimate:
    """Sample mean of ``f(sampler(rng, n))`` with its standard error."""
    if n < 2:
        raise ValueError("Monte Carlo needs n >= 2 for a standard error")
    rng = make_rng(seed)
    vals = np.asarray(f(sampler(rng, n)), dtype=float)
    mean = float(np.sum(vals) / n)
    std = float(np.sqrt(np.sum((vals - mean) ** 2) / (n - 1)))
    return MCEstimate(mean, std / np.sqrt(n), n, seed if not isinstance(seed, np.random.Generator) else None)


@dataclass(frozen=True)
class Resolution:
    """Node counts: Gauss-Legendre points per polar axis, uniform azimuthal points, xi points."""

    theta: int = 64
    azimuth: int = 256
    xi: int = 128

    def __post_init__(self):
        if self.theta < 2 or self.azimuth < 2:
            raise ValueError("resolution must be >= 2 per axis")
        if self.xi < 8:
            raise ValueError("xi-average needs at least 8 points")

    def halved(self) -> "Resolution":
        return Resolution(max(self.theta // 2, 2), max(self.azimuth // 2, 2), max(self.xi // 2, 8))


DEFAULT_RESOLUTION = Resolution()
