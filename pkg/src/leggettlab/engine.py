"""The inequality chain: correlators, xi-averages, the R/L/J terms, bounds, CHSH.

Relative detector angles are written ``phi``; within the plane orthogonal to
``p`` the settings are ``a = plane(xi + phi/2)`` and ``b = plane(xi - phi/2)``.
Quadrature results come with an error estimate taken as the change on
halving the resolution, and inequality verdicts are one-sided:
``satisfied`` iff ``slack >= -tolerance``.
"""
from __future__ import annotations

import inspect
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .geometry import Frame, detector_in_plane, orthonormal_frame, random_unit_vectors, normalize
from .measures import VectorPairMeasure
from .models import OUTCOME_PAIRS, OUTCOMES, OutcomeModel, malus
from .quad import DEFAULT_RESOLUTION, MCEstimate, Resolution, make_rng

IDENTITY_TOL = 1e-12
SQRT2 = np.sqrt(2.0)
ROUNDOFF = 1e-12


class SinglesBiasWarning(UserWarning):
    """Nonzero single-arm average: the product average is then not a correlator."""


@dataclass(frozen=True)
class Estimate:
    value: float
    error: float = 0.0
    method: str = "analytic"

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    tolerance: float = IDENTITY_TOL
    terms: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return float(self.rhs - self.lhs)

    @property
    def satisfied(self) -> bool:
        return self.slack >= -self.tolerance


@dataclass(frozen=True)
class EnvelopeReport:
    """Two-sided bound ``lower <= value <= upper``."""

    lower: BoundReport  # lhs = lower bound, rhs = value
    upper: BoundReport  # lhs = value, rhs = upper bound

    @property
    def satisfied(self) -> bool:
        return self.lower.satisfied and self.upper.satisfied


def _bound(lhs, rhs, tolerance=IDENTITY_TOL, **terms) -> BoundReport:
    """Report the worst element when ``lhs``/``rhs`` are arrays."""
    lhs, rhs = np.broadcast_arrays(np.asarray(lhs, float), np.asarray(rhs, float))
    k = int(np.argmin(rhs - lhs)) if lhs.ndim else 0
    return BoundReport(float(lhs.flat[k]), float(rhs.flat[k]), float(tolerance), terms)


# -- integration methods ------------------------------------------------------


@dataclass(frozen=True)
class Quadrature:
    resolution: Resolution = DEFAULT_RESOLUTION


@dataclass(frozen=True)
class MonteCarlo:
    n: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("Monte Carlo needs n >= 2")


# -- correlators ----------------------------------------------------------------


class Correlator:
    """Settings -> correlator value, with per-setting error estimates."""

    provenance = "abstract"
    measure: VectorPairMeasure | None = None

    def evaluate(self, a, b) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def __call__(self, a, b):
        vals, _ = self.evaluate(a, b)
        return vals


class AnalyticCorrelator(Correlator):
    def __init__(self, fn: Callable, provenance: str = "analytic"):
        self.fn = fn
        self.provenance = provenance

    def evaluate(self, a, b):
        vals = np.asarray(self.fn(np.asarray(a, float), np.asarray(b, float)), dtype=float)
        return vals, np.zeros_like(vals)


def qm_correlator() -> AnalyticCorrelator:
    """Singlet correlator ``-a.b``."""
    return AnalyticCorrelator(lambda a, b: -np.sum(a * b, axis=-1), "analytic(qm_singlet)")


class QuadratureCorrelator(Correlator):
    def __init__(self, model: OutcomeModel, measure: VectorPairMeasure, resolution: Resolution = DEFAULT_RESOLUTION):
        if not model.hidden_variable:
            raise ValueError("quadrature over dF needs a hidden-variable model")
        self.model = model
        self.measure = measure
        self.resolution = resolution
        self.provenance = f"quadrature({resolution.theta}x{resolution.azimuth})"

    def evaluate(self, a, b):
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        shape = np.broadcast_shapes(a.shape, b.shape)[:-1]
        a2 = np.broadcast_to(a, (*shape, 3)).reshape(-1, 3)
        b2 = np.broadcast_to(b, (*shape, 3)).reshape(-1, 3)
        fine = self.measure.expect_many(self.model.correlator_xy, a2, b2, self.resolution)
        coarse = self.measure.expect_many(self.model.correlator_xy, a2, b2, self.resolution.halved())
        err = np.abs(fine - coarse) + ROUNDOFF
        return fine.reshape(shape), err.reshape(shape)


class MonteCarloCorrelator(Correlator):
    """Sample mean over one fixed seeded batch of (u, v) pairs (shared by all settings)."""

    def __init__(self, model: OutcomeModel, measure: VectorPairMeasure, n: int = 100_000, seed: int = 0):
        if n < 2:
            raise ValueError("Monte Carlo needs n >= 2")
        self.model = model
        self.measure = measure
        self.n = n
        self.seed = seed
        self.u, self.v = measure.sample(make_rng(seed), n)
        self.provenance = f"montecarlo(n={n}, seed={seed})"

    def estimate(self, a, b) -> MCEstimate:
        vals = self.model.correlator(self.u, self.v, a, b)
        mean = float(np.mean(vals))
        std = float(np.std(vals, ddof=1))
        return MCEstimate(mean, std / np.sqrt(self.n), self.n, self.seed)

    def evaluate(self, a, b):
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        shape = np.broadcast_shapes(a.shape, b.shape)[:-1]
        a2 = np.broadcast_to(a, (*shape, 3)).reshape(-1, 3)
        b2 = np.broadcast_to(b, (*shape, 3)).reshape(-1, 3)
        est = [self.estimate(x, y) for x, y in zip(a2, b2)]
        return (np.array([e.mean for e in est]).reshape(shape), np.array([e.stderr for e in est]).reshape(shape))


def model_correlator(model: OutcomeModel, measure: VectorPairMeasure | None = None, method=None) -> Correlator:
    if not model.hidden_variable:
        return qm_correlator()
    if measure is None:
        raise ValueError(f"{model.name} needs a measure")
    method = method or Quadrature()
    if isinstance(method, MonteCarlo):
        return MonteCarloCorrelator(model, measure, method.n, method.seed)
    return QuadratureCorrelator(model, measure, method.resolution)


def correlator_given_uv(model: OutcomeModel, u, v, a, b):
    return sum(s * t * model.joint(s, t, u, v, a, b) for s, t in OUTCOME_PAIRS)


def observed_correlator(model: OutcomeModel, measure: VectorPairMeasure, a, b, method=None):
    """``int dF C(u, v; a, b)`` as an :class:`Estimate` (quadrature) or :class:`MCEstimate`."""
    method = method or Quadrature()
    if isinstance(method, MonteCarlo):
        return MonteCarloCorrelator(model, measure, method.n, method.seed).estimate(a, b)
    val, err = QuadratureCorrelator(model, measure, method.resolution).evaluate(a, b)
    return Estimate(float(val), float(err), f"quadrature({method.resolution.theta}x{method.resolution.azimuth})")


def singles_averages(model: OutcomeModel, measure: VectorPairMeasure, a, b, resolution=DEFAULT_RESOLUTION, tol=1e-9):
    """``(<sigma>, <tau>)`` under dF; warns when either is nonzero beyond ``tol``."""
    a2 = np.atleast_2d(np.asarray(a, float))
    b2 = np.atleast_2d(np.asarray(b, float))
    ms = float(measure.expect_many(lambda x, y: malus(1, x) - malus(-1, x) + 0 * y, a2, b2, resolution)[0])
    mt = float(measure.expect_many(lambda x, y: malus(1, y) - malus(-1, y) + 0 * x, a2, b2, resolution)[0])
    if max(abs(ms), abs(mt)) > tol:
        warnings.warn(
            f"single-arm averages <sigma>={ms:.3g}, <tau>={mt:.3g} are nonzero; "
            "the product average is not a correlator here",
            SinglesBiasWarning,
            stacklevel=2,
        )
    return ms, mt


def envelope_check(model: OutcomeModel, u, v, a, b) -> EnvelopeReport:
    """``-1 + |u.a + v.b| <= C(u, v; a, b) <= 1 - |u.a - v.b|`` (worst case over array inputs)."""
    x = np.sum(np.asarray(u, float) * np.asarray(a, float), axis=-1)
    y = np.sum(np.asarray(v, float) * np.asarray(b, float), axis=-1)
    c = correlator_given_uv(model, u, v, a, b)
    lo = -1.0 + np.abs(x + y)
    hi = 1.0 - np.abs(x - y)
    return EnvelopeReport(_bound(lo, c), _bound(c, hi))


def corner_identity() -> bool:
    """``-1 + |s + t| == s t == 1 - |s - t|`` on all four outcome corners."""
    return all(-1 + abs(s + t) == s * t == 1 - abs(s - t) for s in OUTCOMES for t in OUTCOMES)


# -- xi-average -----------------------------------------------------------------


def plane_settings(p, phi, xi, frame: Frame | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Settings ``a, b`` in the plane orthogonal to ``p`` at relative angle ``phi`` and mean azimuth ``xi``."""
    frame = frame or orthonormal_frame(p)
    phi = np.asarray(phi, float)
    xi = np.asarray(xi, float)
    return detector_in_plane(frame, xi + phi / 2.0), detector_in_plane(frame, xi - phi / 2.0)


def xi_grid(n_xi: int) -> np.ndarray:
    if n_xi < 8:
        raise ValueError("xi-average needs n_xi >= 8")
    return 2.0 * np.pi * np.arange(n_xi) / n_xi


def azimuthal_avg_correlator(corr: Correlator, p, phi, n_xi: int = DEFAULT_RESOLUTION.xi) -> Estimate:
    """``(1/2pi) int dxi C(a(xi + phi/2), b(xi - phi/2))``; ``phi`` may be an array."""
    p = normalize(p)
    xi = xi_grid(n_xi)
    phi_arr = np.asarray(phi, float)
    a, b = plane_settings(p, phi_arr[..., None], xi)
    vals, errs = corr.evaluate(a, b)
    value = vals.mean(axis=-1)
    error = errs.mean(axis=-1)
    if phi_arr.ndim == 0:
        return Estimate(float(value), float(error), corr.provenance)
    return Estimate(value, error, corr.provenance)


# -- kernel and R/L/J terms --------------------------------------------------------


def kernel_n(theta_u, theta_v, alpha):
    """``N >= 0`` with ``N^2 = (s_u + s_v)^2 sin^2(alpha/2) + (s_u - s_v)^2 cos^2(alpha/2)``."""
    su, sv = np.sin(theta_u), np.sin(theta_v)
    half = np.asarray(alpha, float) / 2.0
    return np.sqrt((su + sv) ** 2 * np.sin(half) ** 2 + (su - sv) ** 2 * np.cos(half) ** 2)


def decompose_n_delta(theta_u, theta_v, beta):
    """Amplitude/phase ``(N, delta, degenerate)`` of ``(s_u - s_v) cos(beta), (s_u + s_v) sin(beta)``.

    ``delta`` is set to 0 where ``N`` vanishes; it never enters a xi-averaged result.
    """
    su, sv = np.sin(theta_u), np.sin(theta_v)
    c = (su - sv) * np.cos(beta)
    s = (su + sv) * np.sin(beta)
    n = np.hypot(c, s)
    degenerate = n < 1e-15
    delta = np.where(degenerate, 0.0, np.arctan2(s, c))
    if np.ndim(n) == 0:
        return float(n), float(delta), bool(degenerate)
    return n, delta, degenerate


def _kernel_n_cos(theta_u, phase_u, theta_v, phase_v):
    """:func:`kernel_n` at ``alpha = phase_u - phase_v`` via ``N^2 = s_u^2 + s_v^2 - 2 s_u s_v cos(alpha)``."""
    su, sv = np.sin(theta_u), np.sin(theta_v)
    cos_alpha = np.cos(phase_u) * np.cos(phase_v) + np.sin(phase_u) * np.sin(phase_v)
    n2 = su * su + sv * sv - 2.0 * (su * sv) * cos_alpha
    return np.sqrt(np.clip(n2, 0.0, None))


_R_METHODS = ("quad4d", "rho", "direct")


def _rl_term(measure, p, phi, method, resolution, sign) -> float:
    frame = orthonormal_frame(p)
    if method == "quad4d":
        total = 0.0
        for tu, pu, tv, pv, w in measure.quadrature_view(resolution, frame).blocks():
            total += float(np.sum(w * _kernel_n_cos(tu, pu - phi, sign * tv, pv)))
        return 2.0 / np.pi * total
    if method == "rho":
        # N can vanish where chi - phi is a multiple of pi
        breaks = tuple(phi + k * np.pi for k in range(-3, 4))
        tu, tv, ch, w = measure.rho_nodes(resolution, frame, breaks=breaks)
        return 2.0 / np.pi * float(np.sum(w * kernel_n(tu, sign * tv, ch - phi)))
    if method == "direct":
        a, b = plane_settings(p, phi, xi_grid(resolution.xi), frame)
        vals = measure.expect_many(lambda x, y: np.abs(x - sign * y), a, b, resolution)
        return float(vals.mean())
    raise ValueError(f"unknown method {method!r}; expected one of {_R_METHODS}")


def _with_error(fn, resolution, method) -> Estimate:
    fine = fn(resolution)
    coarse = fn(resolution.halved())
    return Estimate(fine, abs(fine - coarse) + ROUNDOFF, method)


def compute_r(measure: VectorPairMeasure, p, phi: float, method: str = "rho", resolution: Resolution = DEFAULT_RESOLUTION) -> Estimate:
    """xi-averaged ``int dF |u.a - v.b|`` via the N kernel (``quad4d``, ``rho``) or directly (``direct``)."""
    p = normalize(p)
    return _with_error(lambda r: _rl_term(measure, p, phi, method, r, 1.0), resolution, method)


def compute_l(measure: VectorPairMeasure, p, phi: float, method: str = "rho", resolution: Resolution = DEFAULT_RESOLUTION) -> Estimate:
    """As :func:`compute_r` with ``theta_v -> -theta_v``, i.e. ``|u.a + v.b|``."""
    p = normalize(p)
    return _with_error(lambda r: _rl_term(measure, p, phi, method, r, -1.0), resolution, method)


def compute_j(measure: VectorPairMeasure, p, form: str = "marginal", resolution: Resolution = DEFAULT_RESOLUTION) -> Estimate:
    """``int mu sqrt(sin^2 theta_u + sin^2 theta_v)`` (``marginal``) or ``int dF sqrt(2 - (p.u)^2 - (p.v)^2)`` (``invariant``)."""
    p = normalize(p)

    def marginal(r):
        tu, tv, w = measure.mu_nodes(r, orthonormal_frame(p))
        return float(np.sum(w * np.sqrt(np.sin(tu) ** 2 + np.sin(tv) ** 2)))

    def invariant(r):
        g = lambda x, y: np.sqrt(np.clip(2.0 - x**2 - y**2, 0.0, None))
        return float(measure.expect_many(g, p[None], p[None], r)[0])

    fns = {"marginal": marginal, "invariant": invariant}
    if form not in fns:
        raise ValueError(f"unknown J form {form!r}")
    return _with_error(fns[form], resolution, form)


def sqrt_lemma_check(u, v, p, p_prime) -> BoundReport:
    """``sqrt(2 - (p.u)^2 - (p.v)^2) + sqrt(2 - (p'.u)^2 - (p'.v)^2) >= sqrt(2)`` for orthogonal p, p'."""
    p = np.asarray(p, float)
    p_prime = np.asarray(p_prime, float)
    if abs(p @ p_prime) > 1e-10:
        raise ValueError("p and p' must be orthogonal")
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    total = (
        np.sqrt(np.clip(2.0 - (u @ p) ** 2 - (v @ p) ** 2, 0.0, None))
        + np.sqrt(np.clip(2.0 - (u @ p_prime) ** 2 - (v @ p_prime) ** 2, 0.0, None))
    )
    return _bound(SQRT2, total, tolerance=1e-10)


# -- bounds ---------------------------------------------------------------------


def _half_sep(phi, phi_prime):
    return np.abs(np.asarray(phi, float) - np.asarray(phi_prime, float)) / 2.0


def intermediate_bound(corr: Correlator, measure: VectorPairMeasure, p, phi: float,
                       resolution: Resolution = DEFAULT_RESOLUTION, method: str = "rho") -> EnvelopeReport:
    """``-1 + L_p(phi) <= C_p(phi) <= 1 - R_p(phi)``."""
    c = azimuthal_avg_correlator(corr, p, phi, resolution.xi)
    r = compute_r(measure, p, phi, method, resolution)
    l = compute_l(measure, p, phi, method, resolution)
    terms = {"C_p": c.value, "R_p": r.value, "L_p": l.value}
    return EnvelopeReport(
        _bound(-1.0 + l.value, c.value, 3 * (c.error + l.error), **terms),
        _bound(c.value, 1.0 - r.value, 3 * (c.error + r.error), **terms),
    )


def xy_plane_inequality(corr: Correlator, measure: VectorPairMeasure, p, phi: float, phi_prime: float,
                        resolution: Resolution = DEFAULT_RESOLUTION) -> BoundReport:
    """``|C_p(phi) + C_p(phi')| <= 2 - (2 sqrt2/pi) sin(|phi - phi'|/2) J``."""
    c = azimuthal_avg_correlator(corr, p, np.array([phi, phi_prime]), resolution.xi)
    j = compute_j(measure, p, "marginal", resolution)
    coeff = 2.0 * SQRT2 / np.pi * np.sin(_half_sep(phi, phi_prime))
    lhs = abs(c.value[0] + c.value[1])
    rhs = 2.0 - coeff * j.value
    tol = 3 * (c.error.sum() + coeff * j.error)
    return _bound(lhs, rhs, tol, C_phi=float(c.value[0]), C_phi_prime=float(c.value[1]), J=j.value)


def leggett_bound(phi, phi_prime):
    """``4 - (4/pi) sin(|phi - phi'|/2)``."""
    return 4.0 - 4.0 / np.pi * np.sin(_half_sep(phi, phi_prime))


def _check_orthogonal(p, p_prime):
    if abs(np.dot(p, p_prime)) > 1e-10:
        raise ValueError("the two planes must have orthogonal normals (p.p' = 0)")


def _leggett_terms(corr, p, p_prime, phi, phi_prime, n_xi):
    p = normalize(p)
    p_prime = normalize(p_prime)
    _check_orthogonal(p, p_prime)
    phi = np.asarray(phi, float)
    phi_prime = np.asarray(phi_prime, float)
    angles = np.stack([phi, phi_prime], axis=-1)
    cp = azimuthal_avg_correlator(corr, p, angles, n_xi)
    cq = azimuthal_avg_correlator(corr, p_prime, angles, n_xi)
    sum_p = np.abs(cp.value[..., 0] + cp.value[..., 1])
    sum_q = np.abs(cq.value[..., 0] + cq.value[..., 1])
    err = cp.error.sum(axis=-1) + cq.error.sum(axis=-1)
    return sum_p, sum_q, err


def leggett_lhs(corr: Correlator, p, p_prime, phi, phi_prime, n_xi: int = DEFAULT_RESOLUTION.xi):
    """``|C_p(phi) + C_p(phi')| + |C_p'(phi) + C_p'(phi')|``; broadcasts over angle arrays."""
    sum_p, sum_q, _ = _leggett_terms(corr, p, p_prime, phi, phi_prime, n_xi)
    out = sum_p + sum_q
    return float(out) if np.ndim(out) == 0 else out


def leggett_check(corr: Correlator, p, p_prime, phi: float, phi_prime: float,
                  n_xi: int = DEFAULT_RESOLUTION.xi) -> BoundReport:
    sum_p, sum_q, err = _leggett_terms(corr, p, p_prime, phi, phi_prime, n_xi)
    return _bound(sum_p + sum_q, leggett_bound(phi, phi_prime), 3 * err,
                  plane_p=float(sum_p), plane_p_prime=float(sum_q))


def leggett_grid(corr: Correlator, p, p_prime, phis, n_xi: int = DEFAULT_RESOLUTION.xi):
    """LHS, RHS and tolerance on the full ``phis x phis`` grid (correlators evaluated once per angle)."""
    p = normalize(p)
    p_prime = normalize(p_prime)
    _check_orthogonal(p, p_prime)
    phis = np.asarray(phis, float)
    cp = azimuthal_avg_correlator(corr, p, phis, n_xi)
    cq = azimuthal_avg_correlator(corr, p_prime, phis, n_xi)
    lhs = np.abs(cp.value[:, None] + cp.value[None, :]) + np.abs(cq.value[:, None] + cq.value[None, :])
    err = cp.error[:, None] + cp.error[None, :] + cq.error[:, None] + cq.error[None, :]
    rhs = leggett_bound(phis[:, None], phis[None, :])
    return lhs, rhs, 3 * err


_Z = np.array([0.0, 0.0, 1.0])
_X = np.array([1.0, 0.0, 0.0])


def _qm_violation(phi, n_xi=8):
    phi = np.asarray(phi, float)
    return leggett_lhs(qm_correlator(), _Z, _X, phi, -phi, n_xi) - leggett_bound(phi, -phi)


def max_qm_violation(scan_resolution: int = 10_000) -> tuple[float, float]:
    """``(phi*, violation)`` maximizing the singlet's excess over the bound at ``phi' = -phi``.

    Dense scan over ``[0, pi]`` followed by golden-section refinement.
    """
    if scan_resolution < 1000:
        raise ValueError("scan resolution must be >= 1000")
    grid = np.linspace(0.0, np.pi, scan_resolution)
    vals = _qm_violation(grid)
    k = int(np.clip(np.argmax(vals), 1, scan_resolution - 2))
    res = minimize_scalar(lambda t: -float(_qm_violation(t)), bracket=(grid[k - 1], grid[k], grid[k + 1]),
                          method="golden", tol=1e-12)
    return float(res.x), float(-res.fun)


def qm_violation_window(scan_resolution: int = 10_000) -> tuple[float, float]:
    """Interval of ``phi > 0`` (with ``phi' = -phi``) where the singlet exceeds the bound."""
    phi_star, _ = max_qm_violation(scan_resolution)
    grid = np.linspace(phi_star, np.pi, scan_resolution)
    vals = _qm_violation(grid)
    k = int(np.argmax(vals <= 0.0))
    upper = brentq(lambda t: float(_qm_violation(t)), grid[k - 1], grid[k], xtol=1e-14)
    return 0.0, float(upper)


def chsh_value(corr: Correlator, a, a_prime, b, b_prime) -> float:
    """``|C(a,b) + C(a,b') + C(a',b) - C(a',b')|``."""
    A = np.stack([a, a, a_prime, a_prime])
    B = np.stack([b, b_prime, b, b_prime])
    c = corr(A, B)
    return float(abs(c[0] + c[1] + c[2] - c[3]))


def standard_chsh_settings(p=_Z):
    """In-plane settings at azimuths 0, pi/2 (left) and pi/4, -pi/4 (right)."""
    frame = orthonormal_frame(p)
    az = np.array([0.0, np.pi / 2, np.pi / 4, -np.pi / 4])
    a, a_prime, b, b_prime = detector_in_plane(frame, az)
    return a, a_prime, b, b_prime


# -- hypothesis checks --------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_deviation: float
    required: bool = True
    note: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    model: str
    measure: str
    checks: tuple[CheckResult, ...]

    @property
    def required_pass(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _measure_is_setting_free(measure: VectorPairMeasure) -> bool:
    setting_words = {"a", "b", "setting", "settings", "detector"}
    for meth in (measure.sample, measure.quadrature_view, measure.rho_nodes, measure.mu_nodes):
        if setting_words & set(inspect.signature(meth).parameters):
            return False
    return True


def check_hypotheses(model: OutcomeModel, measure: VectorPairMeasure, n_samples: int = 2000,
                     n_remote: int = 32, seed: int = 0, tol: float = IDENTITY_TOL) -> HypothesisReport:
    """Pointwise checks of normalization, locality, Malus compliance and (diagnostic) outcome independence."""
    if not model.hidden_variable:
        raise ValueError(f"{model.name} is not a hidden-variable model")
    rng = make_rng(seed)
    u, v = measure.sample(rng, n_samples)
    a = random_unit_vectors(rng, n_samples)
    b = random_unit_vectors(rng, n_samples)
    # probes orthogonal to the hidden vectors hit x = y = 0, where couplings differ most
    a_perp = normalize(np.cross(u, random_unit_vectors(rng, n_samples)))
    b_perp = normalize(np.cross(v, random_unit_vectors(rng, n_samples)))
    U = np.concatenate([u, u])
    V = np.concatenate([v, v])
    A = np.concatenate([a, a_perp])
    B = np.concatenate([b, b_perp])

    P = {(s, t): np.asarray(model.joint(s, t, U, V, A, B), float) for s, t in OUTCOME_PAIRS}
    total = sum(P.values())
    norm_dev = max(float(np.max(np.abs(total - 1.0))), float(max(np.max(-q) for q in P.values())), 0.0)
    checks = [CheckResult("normalization", norm_dev <= tol, norm_dev)]

    checks.append(CheckResult(
        "measure_locality", _measure_is_setting_free(measure), 0.0,
        note="measure interface takes no detector settings",
    ))

    # remote-setting scan: left marginal vs 32 right settings and vice versa
    remote = random_unit_vectors(rng, n_remote)
    loc_dev = 0.0
    k = min(n_samples, 200)
    for s in OUTCOMES:
        ref_l = sum(model.joint(s, t, u[:k], v[:k], a[:k], b[:k]) for t in OUTCOMES)
        ref_r = sum(model.joint(t, s, u[:k], v[:k], a[:k], b[:k]) for t in OUTCOMES)
        for r in remote:
            m_l = sum(model.joint(s, t, u[:k], v[:k], a[:k], r) for t in OUTCOMES)
            m_r = sum(model.joint(t, s, u[:k], v[:k], r, b[:k]) for t in OUTCOMES)
            loc_dev = max(loc_dev, float(np.max(np.abs(m_l - ref_l))), float(np.max(np.abs(m_r - ref_r))))
    checks.append(CheckResult("marginal_locality", loc_dev <= tol, loc_dev))

    x = np.sum(U * A, axis=-1)
    y = np.sum(V * B, axis=-1)
    mal_dev = 0.0
    marg_l, marg_r = {}, {}
    for s in OUTCOMES:
        marg_l[s] = P[(s, 1)] + P[(s, -1)]
        marg_r[s] = P[(1, s)] + P[(-1, s)]
        mal_dev = max(mal_dev, float(np.max(np.abs(marg_l[s] - malus(s, x)))),
                      float(np.max(np.abs(marg_r[s] - malus(s, y)))))
    checks.append(CheckResult("malus_marginals", mal_dev <= tol, mal_dev))

    oi_dev = max(float(np.max(np.abs(P[(s, t)] - marg_l[s] * marg_r[t]))) for s, t in OUTCOME_PAIRS)
    checks.append(CheckResult(
        "outcome_independence", oi_dev <= tol, oi_dev, required=False,
        note="diagnostic only: not required for the Leggett inequality",
    ))

    latent = getattr(model, "latent", None)
    if latent is not None:
        lam = rng.random((2, n_samples))
        outs = np.stack([latent(s, t, u, v, lam[0], lam[1], a, b) for s, t in OUTCOME_PAIRS])
        binary = bool(np.all((outs == 0) | (outs == 1)) and np.all(outs.sum(axis=0) == 1))
        checks.append(CheckResult("determinism", binary, 0.0 if binary else 1.0, required=False,
                                  note="latent outputs are indicator functions"))

    return HypothesisReport(model.name, getattr(measure, "kind", type(measure).__name__), tuple(checks))
