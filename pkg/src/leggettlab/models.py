"""Conditional outcome models P(sigma, tau | u, v; a, b).

Every hidden-variable model here depends on the hidden vectors and the
settings only through ``x = u.a`` and ``y = v.b``.  Their marginals are the
Malus probabilities ``(1 + sigma x) / 2`` and ``(1 + tau y) / 2``; they differ
in how the two marginals are coupled:

* independent coupling (:class:`ProductMalus`),
* upper Frechet coupling through one shared uniform latent (:class:`ComonotoneMalus`),
* lower Frechet coupling (:class:`AntitoneMalus`),
* two independent latents with deterministic outcomes (:class:`DeterministicMalus`).
"""
from __future__ import annotations

from typing import Callable

import numpy as np

OUTCOMES = (1, -1)
OUTCOME_PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def _dot(u, a):
    return np.sum(np.asarray(u, dtype=float) * np.asarray(a, dtype=float), axis=-1)


def malus(sigma, x):
    """Probability of outcome ``sigma`` given ``x = u.a``."""
    return 0.5 * (1.0 + sigma * np.asarray(x, dtype=float))


class OutcomeModel:
    name = "abstract"
    hidden_variable = True
    malus_compliant = True

    def joint_xy(self, sigma, tau, x, y):
        raise NotImplementedError

    def joint(self, sigma, tau, u, v, a, b):
        return self.joint_xy(sigma, tau, _dot(u, a), _dot(v, b))

    def correlator_xy(self, x, y):
        return sum(s * t * self.joint_xy(s, t, x, y) for s, t in OUTCOME_PAIRS)

    def correlator(self, u, v, a, b):
        return self.correlator_xy(_dot(u, a), _dot(v, b))

    def table_xy(self, x, y) -> np.ndarray:
        """Joint probabilities in the order (+,+), (+,-), (-,+), (-,-); shape ``(4, ...)``."""
        return np.stack([np.broadcast_to(self.joint_xy(s, t, x, y), np.broadcast(x, y).shape) for s, t in OUTCOME_PAIRS])

    def __eq__(self, other):
        return type(self) is type(other)

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return f"{type(self).__name__}()"


class ProductMalus(OutcomeModel):
    name = "product_malus"

    def joint_xy(self, sigma, tau, x, y):
        return malus(sigma, x) * malus(tau, y)

    def correlator_xy(self, x, y):
        return np.asarray(x, dtype=float) * np.asarray(y, dtype=float)


class ComonotoneMalus(OutcomeModel):
    """sigma = +1 iff lam <= p_a and tau = +1 iff lam <= p_b for one shared uniform lam."""

    name = "comonotone_malus"

    def joint_xy(self, sigma, tau, x, y):
        pa, pb = malus(1, x), malus(1, y)
        if sigma == 1 and tau == 1:
            return np.minimum(pa, pb)
        if sigma == 1:
            return np.maximum(pa - pb, 0.0)
        if tau == 1:
            return np.maximum(pb - pa, 0.0)
        return 1.0 - np.maximum(pa, pb)

    def correlator_xy(self, x, y):
        return 1.0 - np.abs(np.asarray(x, float) - np.asarray(y, float))


class AntitoneMalus(OutcomeModel):
    """sigma = +1 iff lam <= p_a and tau = +1 iff lam >= 1 - p_b."""

    name = "antitone_malus"

    def joint_xy(self, sigma, tau, x, y):
        pa, pb = malus(1, x), malus(1, y)
        if sigma == 1 and tau == 1:
            return np.maximum(pa + pb - 1.0, 0.0)
        if sigma == 1:
            return np.minimum(pa, 1.0 - pb)
        if tau == 1:
            return np.minimum(1.0 - pa, pb)
        return np.maximum(1.0 - pa - pb, 0.0)

    def correlator_xy(self, x, y):
        return -1.0 + np.abs(np.asarray(x, float) + np.asarray(y, float))


class DeterministicMalus(ProductMalus):
    """Outcomes fixed by two extra uniform latents; averaging them gives :class:`ProductMalus`."""

    name = "deterministic_malus"

    def latent(self, sigma, tau, u, v, lam1, lam2, a, b):
        return deterministic_malus_joint(sigma, tau, u, v, lam1, lam2, a, b)


class CorrelatorModel(OutcomeModel):
    """Malus marginals with a user-supplied correlator ``C(x, y)``.

    The joint is ``(1 + sigma x + tau y + sigma tau C) / 4``; it is a valid
    distribution only where all four entries are nonnegative, which callers
    check with :func:`validate_correlator`.
    """

    name = "correlator"

    def __init__(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], source: str = "<callable>"):
        self.fn = fn
        self.source = source

    def correlator_xy(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.broadcast_to(np.asarray(self.fn(x, y), dtype=float), x.shape)

    def joint_xy(self, sigma, tau, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return 0.25 * (1.0 + sigma * x + tau * y + sigma * tau * self.correlator_xy(x, y))

    def __eq__(self, other):
        return isinstance(other, CorrelatorModel) and self.source == other.source

    def __hash__(self):
        return hash(self.source)

    def __repr__(self):
        return f"CorrelatorModel({self.source!r})"


class QMSinglet(OutcomeModel):
    """Quantum singlet reference; not a hidden-variable model, ignores (u, v)."""

    name = "qm_singlet"
    hidden_variable = False
    malus_compliant = False

    def joint(self, sigma, tau, u, v, a, b):
        return qm_singlet_joint(sigma, tau, a, b)

    def joint_xy(self, sigma, tau, x, y):
        raise TypeError("the singlet joint depends on a.b, not on hidden projections")

    def correlator(self, u, v, a, b):
        return self.settings_correlator(a, b)

    def settings_correlator(self, a, b):
        return -_dot(a, b)


def product_malus_joint(sigma, tau, u, v, a, b):
    return ProductMalus().joint(sigma, tau, u, v, a, b)


def comonotone_malus_joint(sigma, tau, u, v, a, b):
    return ComonotoneMalus().joint(sigma, tau, u, v, a, b)


def antitone_malus_joint(sigma, tau, u, v, a, b):
    return AntitoneMalus().joint(sigma, tau, u, v, a, b)


def deterministic_malus_joint(sigma, tau, u, v, lam1, lam2, a, b):
    """1 where both outcomes equal the thresholded latents, else 0."""
    s = np.where(np.asarray(lam1) < malus(1, _dot(u, a)), 1, -1)
    t = np.where(np.asarray(lam2) < malus(1, _dot(v, b)), 1, -1)
    return ((s == sigma) & (t == tau)).astype(int)


def qm_singlet_joint(sigma, tau, a, b):
    return 0.25 * (1.0 - sigma * tau * _dot(a, b))


BUILTIN_MODELS: dict[str, Callable[[], OutcomeModel]] = {
    m.name: m for m in (ProductMalus, ComonotoneMalus, AntitoneMalus, DeterministicMalus, QMSinglet)
}
HIDDEN_VARIABLE_BUILTINS = ("product_malus", "comonotone_malus", "antitone_malus", "deterministic_malus")


def builtin_model(name: str) -> OutcomeModel:
    try:
        return BUILTIN_MODELS[name]()
    except KeyError:
        raise ValueError(f"unknown builtin model {name!r}; expected one of {sorted(BUILTIN_MODELS)}") from None


def validate_correlator(fn, n: int = 64) -> tuple[float, tuple[float, float, int, int] | None]:
    """Minimum joint probability of the correlator form over an ``n x n`` grid of (x, y).

    Returns ``(min_prob, worst)`` where ``worst`` is ``(x, y, sigma, tau)`` at the
    minimum if it is negative, else ``None``.
    """
    g = np.linspace(-1.0, 1.0, n)
    x, y = np.meshgrid(g, g, indexing="ij")
    model = CorrelatorModel(fn)
    table = model.table_xy(x, y)
    k = int(np.argmin(table))
    pair, i, j = np.unravel_index(k, table.shape)
    pmin = float(table.flat[k])
    if not np.isfinite(table).all():
        return float("nan"), None
    if pmin < -1e-12:
        s, t = OUTCOME_PAIRS[pair]
        return pmin, (float(x[i, j]), float(y[i, j]), s, t)
    return pmin, None
