"""Finite-sample EPR-Bohm runs: outcome streams and coincidence tables."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import VectorPairMeasure
from .models import OUTCOME_PAIRS, OutcomeModel
from .quad import make_rng


@dataclass(frozen=True)
class CoincidenceTable:
    """``counts[k]`` is a 2x2 array indexed ``[sigma, tau]`` with row/column 0 for +1, 1 for -1."""

    counts: np.ndarray  # (n_settings, 2, 2)
    settings: tuple  # ((a, b), ...)
    seed: int
    n: int

    def __post_init__(self):
        if np.any(self.counts.sum(axis=(1, 2)) != self.n):
            raise ValueError("each setting must hold exactly n trials")


def _index(outcome: int) -> int:
    return 0 if outcome == 1 else 1


def run_experiment(model: OutcomeModel, measure: VectorPairMeasure | None, settings, n: int, seed: int = 0) -> CoincidenceTable:
    """Simulate ``n`` trials per setting pair.

    Each setting pair ``k`` draws from its own stream seeded by ``(seed, k)``,
    so appending settings leaves earlier columns unchanged.  Outcomes are
    drawn by inverse CDF over (+,+), (+,-), (-,+), (-,-).
    """
    settings = [(np.asarray(a, float), np.asarray(b, float)) for a, b in settings]
    if not settings:
        raise ValueError("no settings given")
    if n < 1:
        raise ValueError("n must be >= 1")
    if model.hidden_variable and measure is None:
        raise ValueError(f"{model.name} needs a measure to sample hidden vectors from")
    counts = np.zeros((len(settings), 2, 2), dtype=np.int64)
    for k, (a, b) in enumerate(settings):
        rng = make_rng([seed, k])
        if model.hidden_variable:
            u, v = measure.sample(rng, n)
        else:
            u = v = np.zeros((n, 3))
        probs = np.stack([np.broadcast_to(model.joint(s, t, u, v, a, b), (n,)) for s, t in OUTCOME_PAIRS], axis=1)
        cdf = np.cumsum(probs, axis=1)
        r = rng.random(n)[:, None]
        cat = np.minimum(np.sum(r >= cdf[:, :3], axis=1), 3)
        flat = np.bincount(cat, minlength=4)
        counts[k] = flat.reshape(2, 2)
    return CoincidenceTable(counts, tuple((tuple(a), tuple(b)) for a, b in settings), seed, n)


def estimate_correlator(table: CoincidenceTable, setting_index: int) -> tuple[float, float]:
    """Empirical ``sum sigma tau counts / n`` and its binomial standard error."""
    if table.n < 2:
        raise ValueError("need n >= 2 trials for a standard error")
    c = table.counts[setting_index]
    n = table.n
    corr = float(c[0, 0] + c[1, 1] - c[0, 1] - c[1, 0]) / n
    return corr, float(np.sqrt(max(1.0 - corr * corr, 0.0) / n))


def singles_average(table: CoincidenceTable, setting_index: int, arm: str = "left") -> tuple[float, float]:
    """Mean outcome on one arm (``left`` = sigma, ``right`` = tau) with its standard error."""
    c = table.counts[setting_index]
    if arm == "left":
        plus, minus = c[0].sum(), c[1].sum()
    elif arm == "right":
        plus, minus = c[:, 0].sum(), c[:, 1].sum()
    else:
        raise ValueError("arm must be 'left' or 'right'")
    n = table.n
    mean = float(plus - minus) / n
    return mean, float(np.sqrt(max(1.0 - mean * mean, 0.0) / n))
