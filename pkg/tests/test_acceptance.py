"""Acceptance suite: one test per criterion, one PASS/FAIL summary line each.

Run ``pytest tests/test_acceptance.py -v``; the summary appears under
"acceptance criteria" at the end of the pytest report.
"""
import time

import numpy as np
import pytest
from scipy import integrate

from leggettlab.engine import (
    Quadrature,
    check_hypotheses,
    chsh_value,
    compute_j,
    compute_l,
    compute_r,
    corner_identity,
    correlator_given_uv,
    leggett_grid,
    max_qm_violation,
    model_correlator,
    observed_correlator,
    qm_correlator,
    qm_violation_window,
    sqrt_lemma_check,
    standard_chsh_settings,
)
from leggettlab.eventsim import estimate_correlator, run_experiment
from leggettlab.geometry import from_spherical, random_unit_vectors
from leggettlab.measures import AlignedUniform, GridMeasure, ProductUniform
from leggettlab.models import (
    HIDDEN_VARIABLE_BUILTINS,
    OUTCOME_PAIRS,
    AntitoneMalus,
    ComonotoneMalus,
    ProductMalus,
    builtin_model,
    malus,
)
from leggettlab.modelspec import ModelSpecError, expression_model, parse, serialize
from leggettlab.quad import DEFAULT_RESOLUTION, make_rng

criterion = pytest.mark.criterion
PAULI = [np.array([[0, 1], [1, 0]], complex), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]], complex)]


def note(record, text):
    record("detail", text)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def random_grid_measure(seed=123, k=7):
    rng = make_rng(seed)
    atoms = np.column_stack([rng.uniform(0, np.pi, k), rng.uniform(-np.pi, np.pi, k),
                             rng.uniform(0, np.pi, k), rng.uniform(-np.pi, np.pi, k), rng.random(k)])
    return GridMeasure(atoms)


MEASURES = {
    "product_uniform": ProductUniform(),
    "aligned_uniform(-1)": AlignedUniform(-1),
    "aligned_uniform(+1)": AlignedUniform(1),
    "grid": random_grid_measure(),
}


def plane_pairs():
    q, _ = np.linalg.qr(make_rng(2024).normal(size=(3, 3)))
    z, x, y = np.eye(3)[2], np.eye(3)[0], np.eye(3)[1]
    return {"z/x": (z, x), "x/y": (x, y), "random": (q[:, 0], q[:, 1])}


@criterion("1", "corner identity on all four outcome corners")
def test_c01_corner_identity(record_property):
    with Timer() as t:
        ok = corner_identity()
    note(record_property, f"{t.seconds * 1e3:.3f} ms")
    assert ok
    assert t.seconds < 1e-3


@criterion("2", "Malus marginals of every hidden-variable builtin")
def test_c02_malus_compliance(record_property):
    rng = make_rng(2)
    u, v, a, b = random_unit_vectors(rng, (4, 10_000))
    x, y = np.sum(u * a, axis=1), np.sum(v * b, axis=1)
    worst = 0.0
    with Timer() as t:
        for name in HIDDEN_VARIABLE_BUILTINS:
            m = builtin_model(name)
            for s in (1, -1):
                left = m.joint(s, 1, u, v, a, b) + m.joint(s, -1, u, v, a, b)
                right = m.joint(1, s, u, v, a, b) + m.joint(-1, s, u, v, a, b)
                worst = max(worst, np.max(np.abs(left - malus(s, x))), np.max(np.abs(right - malus(s, y))))
    note(record_property, f"max dev {worst:.2e}, {t.seconds:.3f} s")
    assert worst <= 1e-12
    assert t.seconds < 1.0


@criterion("3", "Frechet couplings saturate the correlator envelope")
def test_c03_envelope_saturation(record_property):
    rng = make_rng(3)
    u, v, a, b = random_unit_vectors(rng, (4, 10_000))
    x, y = np.sum(u * a, axis=1), np.sum(v * b, axis=1)
    with Timer() as t:
        upper = np.max(np.abs((1 - np.abs(x - y)) - correlator_given_uv(ComonotoneMalus(), u, v, a, b)))
        lower = np.max(np.abs(correlator_given_uv(AntitoneMalus(), u, v, a, b) - (-1 + np.abs(x + y))))
    note(record_property, f"upper slack {upper:.1e}, lower slack {lower:.1e}, {t.seconds:.3f} s")
    assert upper < 1e-12 and lower < 1e-12
    assert t.seconds < 1.0


@criterion("4", "R and L agree across 4D, marginal-rho and direct routes")
def test_c04_oracle_equivalences(record_property):
    p = np.array([0.0, 0.0, 1.0])
    phis = [0.0, 0.9, 2.0, np.pi]
    worst = 0.0
    with Timer() as t:
        for measure in (ProductUniform(), AlignedUniform(-1)):
            for phi in phis:
                for fn in (compute_r, compute_l):
                    vals = [fn(measure, p, phi, method, DEFAULT_RESOLUTION).value
                            for method in ("quad4d", "rho", "direct")]
                    worst = max(worst, max(vals) - min(vals))
    note(record_property, f"max pairwise gap {worst:.2e}, {t.seconds:.1f} s")
    assert worst <= 1e-4
    assert t.seconds < 120


@criterion("5", "J marginal and invariant forms agree; singlet-like J = sqrt(2) pi/4")
def test_c05_j_dual_form(record_property):
    # 1D oracle for v = -u: mu concentrates on theta_v = pi - theta_u
    oracle = integrate.quad(lambda th: np.sin(th) / 2 * np.sqrt(2 * np.sin(th) ** 2), 0, np.pi, epsabs=1e-14)[0]
    p = np.array([0.0, 0.0, 1.0])
    with Timer() as t:
        gaps = []
        for measure in (ProductUniform(), AlignedUniform(-1), AlignedUniform(1)):
            gaps.append(abs(compute_j(measure, p, "marginal").value - compute_j(measure, p, "invariant").value))
        aligned = compute_j(AlignedUniform(-1), p, "marginal").value
    note(record_property, f"max form gap {max(gaps):.1e}, J={aligned:.7f}, oracle={oracle:.7f}, {t.seconds:.2f} s")
    assert max(gaps) <= 1e-5
    assert abs(aligned - oracle) <= 1e-5 and abs(oracle - np.sqrt(2) * np.pi / 4) < 1e-12
    assert t.seconds < 10


@criterion("6", "sqrt(2) lemma for orthogonal plane normals")
def test_c06_sqrt_lemma(record_property):
    rng = make_rng(6)
    worst = np.inf
    with Timer() as t:
        for _ in range(100):
            q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            u, v = random_unit_vectors(rng, (2, 1000))
            rep = sqrt_lemma_check(u, v, q[:, 0], q[:, 1])
            worst = min(worst, rep.slack)
        eq = sqrt_lemma_check(np.eye(3)[2], np.eye(3)[2], np.eye(3)[2], np.eye(3)[0])
    note(record_property, f"min slack {worst:.3e}, equality slack {eq.slack:.1e}, {t.seconds:.3f} s")
    assert worst >= -1e-10
    assert abs(eq.slack) < 1e-12
    assert t.seconds < 1.0


@pytest.fixture(scope="module")
def leggett_sweep():
    """Minimum of slack + tolerance over the 16x16 grid, per (model, measure, plane pair)."""
    phis = np.linspace(-np.pi, np.pi, 16)
    out = {}
    t0 = time.perf_counter()
    for name in HIDDEN_VARIABLE_BUILTINS:
        for mname, measure in MEASURES.items():
            corr = model_correlator(builtin_model(name), measure, Quadrature(DEFAULT_RESOLUTION))
            for pname, (p, pp) in plane_pairs().items():
                lhs, rhs, tol = leggett_grid(corr, p, pp, phis)
                out[(name, mname, pname)] = float(np.min(rhs - lhs + tol))
    return out, time.perf_counter() - t0


@criterion("7", "Leggett inequality holds for every builtin model x measure x plane pair")
def test_c07_leggett_holds(record_property, leggett_sweep):
    results, seconds = leggett_sweep
    worst = min(results, key=results.get)
    note(record_property, f"{len(results)} cases, min slack+tol {results[worst]:.2e} at {worst}, {seconds:.0f} s")
    assert all(v >= 0 for v in results.values())
    assert seconds < 300


@criterion("8a", "singlet excess maximal at arctan(1/pi) with size 0.19770")
def test_c08_qm_violation_maximum(record_property):
    # dense scan oracle of the closed-form excess at phi' = -phi
    grid = np.linspace(0, np.pi, 4_000_001)
    excess = 4 * np.cos(grid) + 4 / np.pi * np.sin(grid) - 4
    k = int(np.argmax(excess))
    with Timer() as t:
        phi_star, violation = max_qm_violation()
    note(record_property, f"phi*={phi_star:.6f}, violation={violation:.6f}, {t.seconds:.2f} s")
    assert abs(phi_star - np.arctan(1 / np.pi)) <= 1e-4 and abs(phi_star - grid[k]) <= 1e-6
    assert abs(violation - 0.19770) <= 1e-4 and abs(violation - excess[k]) <= 1e-9
    assert t.seconds < 30


@criterion("8b", "singlet violation window upper edge at 2/pi")
def test_c08_qm_violation_window_edge(record_property):
    with Timer() as t:
        lo, hi = qm_violation_window()
    note(record_property, f"window ({lo:.6f}, {hi:.6f}) vs target 2/pi = {2 / np.pi:.6f}, {t.seconds:.2f} s")
    assert t.seconds < 30
    assert abs(hi - 2 / np.pi) <= 1e-3


@criterion("9", "comonotone coupling breaks outcome independence yet obeys the Leggett bound")
def test_c09_outcome_independence_unnecessary(record_property, leggett_sweep):
    with Timer() as t:
        rep = check_hypotheses(ComonotoneMalus(), ProductUniform())
    results, _ = leggett_sweep
    como = {k: v for k, v in results.items() if k[0] == "comonotone_malus"}
    oi = rep["outcome_independence"]
    note(record_property, f"factorization dev {oi.max_deviation:.4f}, min slack+tol {min(como.values()):.2e}, "
                          f"{t.seconds:.2f} s")
    assert rep.required_pass
    assert not oi.passed and oi.max_deviation >= 0.25
    assert all(v >= 0 for v in como.values())
    assert t.seconds < 60


def singlet_density_matrix_correlator(a, b):
    psi = np.array([0, 1, -1, 0], complex) / np.sqrt(2)
    sa = sum(c * p for c, p in zip(a, PAULI))
    sb = sum(c * p for c, p in zip(b, PAULI))
    return float(np.real(psi.conj() @ np.kron(sa, sb) @ psi))


@criterion("10", "CHSH: product coupling at most 2, singlet reaches 2 sqrt(2)")
def test_c10_chsh(record_property):
    rng = make_rng(10)
    with Timer() as t:
        worst = 0.0
        for measure in (AlignedUniform(1), random_grid_measure()):
            corr = model_correlator(ProductMalus(), measure, Quadrature(DEFAULT_RESOLUTION))
            quads = random_unit_vectors(rng, (1000, 4))
            c = corr(np.repeat(quads[:, :2], 2, axis=1).reshape(-1, 3),
                     np.tile(quads[:, 2:], (1, 2, 1)).reshape(-1, 3)).reshape(1000, 4)
            s = np.abs(c[:, 0] + c[:, 1] + c[:, 2] - c[:, 3])
            worst = max(worst, float(s.max()))
        settings = standard_chsh_settings()
        qm = chsh_value(qm_correlator(), *settings)
        a, ap, b, bp = settings
        oracle = abs(singlet_density_matrix_correlator(a, b) + singlet_density_matrix_correlator(a, bp)
                     + singlet_density_matrix_correlator(ap, b) - singlet_density_matrix_correlator(ap, bp))
    note(record_property, f"product max {worst:.6f}, singlet {qm:.12f}, {t.seconds:.1f} s")
    assert worst <= 2 + 1e-9
    assert abs(qm - 2 * np.sqrt(2)) <= 1e-9 and abs(oracle - 2 * np.sqrt(2)) <= 1e-9
    assert t.seconds < 30


@criterion("11", "event simulation converges to quadrature and reruns bit-identically")
def test_c11_eventsim(record_property):
    rng = make_rng(11)
    names = list(MEASURES)
    worst = 0.0
    with Timer() as t:
        for cfg in range(20):
            model = builtin_model(HIDDEN_VARIABLE_BUILTINS[cfg % 4])
            measure = MEASURES[names[int(rng.integers(len(names)))]]
            a, b = random_unit_vectors(rng, 2)
            table = run_experiment(model, measure, [(a, b)], 10 ** 6, seed=cfg)
            c, se = estimate_correlator(table, 0)
            expected = observed_correlator(model, measure, a, b).value
            worst = max(worst, abs(c - expected) / se)
            again = run_experiment(model, measure, [(a, b)], 10 ** 6, seed=cfg)
            assert np.array_equal(table.counts, again.counts)
    note(record_property, f"max |C - C_quad| = {worst:.2f} stderr, {t.seconds:.1f} s")
    assert worst <= 4
    assert t.seconds < 120


PARSER_ROUND_TRIP = [
    "[model]\nbuiltin = product_malus\n",
    "[measure]\nkind = aligned_uniform\nsign = 1\n[model]\ncorrelator = 1 - abs(ua - vb)\n"
    "[job]\ntype = bounds\np = 0 0 1\np_prime = 0 1 0\nphi_steps = 9\n",
    "[measure.grid]\n0.1 0.2 0.3 0.4 1\n1 2 3 -1 3\n[model]\ncorrelator = (ua*vb + 1 - abs(ua - vb)) / 2\n"
    "[job]\ntype = simulate\ndegrees = true\nxi = 30\nn = 5000\nseed = 3\noutput = x.csv\n",
]
PARSER_ERRORS = [
    ("[modle]\n", 1), ("[model]\nbuiltin = nope\n", 2), ("[job]\n\nphi_steps = 1.5\n", 3),
    ("[measure.grid]\n0 0 0 0 1\n0 0 0 0 -2\n", 3), ("[model]\ncorrelator = 2\n", 2),
    ("[model]\n\n\ncorrelator = ua +* vb\n", 4), ("[job]\ncolour = red\n", 2),
]


@criterion("12", "parser round trip, error locations, comonotone expression")
def test_c12_parser(record_property):
    with Timer() as t:
        for text in PARSER_ROUND_TRIP:
            cfg = parse(text)
            assert parse(serialize(cfg)) == cfg
        for text, line in PARSER_ERRORS:
            with pytest.raises(ModelSpecError) as info:
                parse(text)
            assert info.value.line == line
        m = expression_model(parse("[model]\ncorrelator = 1 - abs(ua - vb)\n").model.correlator)
        g = np.linspace(0, np.pi, 32)
        tu, tv, psi = np.meshgrid(g, g, 2 * g, indexing="ij")
        u = from_spherical(tu, 0.0)
        v = from_spherical(tv, 0.0)
        a = np.array([0.0, 0.0, 1.0])
        b = from_spherical(np.full_like(psi, np.pi / 3), psi)
        dev = max(float(np.max(np.abs(m.joint(s, t_, u, v, a, b) - ComonotoneMalus().joint(s, t_, u, v, a, b))))
                  for s, t_ in OUTCOME_PAIRS)
    note(record_property, f"{len(PARSER_ROUND_TRIP)} round trips, {len(PARSER_ERRORS)} error cases, "
                          f"expression dev {dev:.1e}, {t.seconds:.2f} s")
    assert dev <= 1e-12
    assert t.seconds < 10


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
