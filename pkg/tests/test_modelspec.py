import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leggettlab.measures import AlignedUniform, GridMeasure
from leggettlab.models import ComonotoneMalus, ProductMalus
from leggettlab.modelspec import (
    BinOp,
    Call,
    ExperimentConfig,
    ModelSpecError,
    Num,
    Var,
    evaluate,
    expression_model,
    parse,
    parse_expression,
    serialize,
    to_source,
    validate_expression,
)

FULL = """\
# every section
[measure]
kind = aligned_uniform
sign = 1

[model]
correlator = 1 - abs(ua - vb)   # comonotone form

[job]
type = bounds
p = 0 0 1
p_prime = 0 1 0
phi_min = -1.5
phi_max = 1.5
phi_steps = 9
theta_resolution = 16
azimuth_resolution = 64
xi_resolution = 32
seed = 7
output = out.csv
"""

GRID = """\
[measure]
kind = grid
[measure.grid]
0.1 0.2 0.3 0.4 2.0
1.0 2.0 3.0 -1.0 2.0
[model]
builtin = antitone_malus
[job]
type = simulate
degrees = true
xi = 45
"""


def test_builtin_model_config():
    cfg = parse("[model]\nbuiltin = product_malus\n")
    assert isinstance(cfg.build_model(), ProductMalus)
    assert cfg == ExperimentConfig()


def test_full_config():
    cfg = parse(FULL)
    assert cfg.build_measure() == AlignedUniform(1)
    assert cfg.job.p_prime == (0.0, 1.0, 0.0) and cfg.job.phi_steps == 9 and cfg.job.output == "out.csv"
    assert cfg.job.resolution.theta == 16


def test_grid_weights_normalized_with_notice():
    cfg = parse(GRID)
    m = cfg.build_measure()
    assert isinstance(m, GridMeasure)
    np.testing.assert_allclose(m.weights, [0.5, 0.5])
    assert any("normalized" in n for n in cfg.notices)
    assert cfg.job.xi_radians() == pytest.approx(np.pi / 4)


@pytest.mark.parametrize("text", [FULL, GRID, "[model]\nbuiltin = qm_singlet\n[job]\ntype = max-violation\n", ""])
def test_round_trip(text):
    cfg = parse(text)
    again = parse(serialize(cfg))
    assert again == cfg
    assert serialize(again) == serialize(cfg)


def test_comonotone_expression_matches_builtin_on_grid():
    m = expression_model("1 - abs(ua - vb)")
    g = np.linspace(-1, 1, 32)
    x, y = np.meshgrid(g, g, indexing="ij")
    for s in (1, -1):
        for t in (1, -1):
            np.testing.assert_allclose(m.joint_xy(s, t, x, y), ComonotoneMalus().joint_xy(s, t, x, y), atol=1e-12)


@pytest.mark.parametrize("expr,valid", [("ua * vb", True), ("2", False), ("-1 + abs(ua + vb)", True),
                                        ("min(ua, vb) - 0.5", False), ("max(0, ua*vb)", False),
                                        ("ua / vb", False)])
def test_validate_expression(expr, valid):
    rep = validate_expression(expr)
    assert rep.valid is valid
    if not valid and rep.offending is not None:
        assert rep.min_probability < 0


def test_expression_precedence_and_calls():
    e = parse_expression("1 - 2 * -ua + max(ua, vb, 0.5) / 4")
    assert float(evaluate(e, 0.25, 0.0)) == pytest.approx(1 + 0.5 + 0.5 / 4)
    assert parse_expression("abs(ua)") == Call("abs", (Var("ua"),))
    assert parse_expression("ua - vb - 1") == BinOp("-", BinOp("-", Var("ua"), Var("vb")), Num(1.0))


exprs = st.recursive(
    st.one_of(st.sampled_from([Var("ua"), Var("vb")]), st.floats(0, 10, allow_nan=False).map(Num)),
    lambda inner: st.one_of(
        st.tuples(st.sampled_from("+-*"), inner, inner).map(lambda t: BinOp(*t)),
        inner.map(lambda e: Call("abs", (e,))),
        st.lists(inner, min_size=2, max_size=3).map(lambda xs: Call("max", tuple(xs))),
    ),
    max_leaves=12,
)


@settings(max_examples=200)
@given(exprs)
def test_expression_source_round_trip(e):
    assert parse_expression(to_source(e)) == e


@pytest.mark.parametrize("text,line,column", [
    ("[modle]\n", 1, 1),
    ("[model]\nbuiltin = nope\n", 2, 11),
    ("[job]\nphi_steps = x\n", 2, 13),
    ("[job]\n\n  colour = red\n", 3, 3),
    ("[measure.grid]\n0 0 0 0 1\n0 0 0 0 -1\n", 3, 9),
    ("[model]\ncorrelator = 1 - abs(ua - wb)\n", 2, 27),
    ("[model]\ncorrelator = 2\n", 2, 14),
    ("[model]\ncorrelator = (ua\n", 2, 17),
    ("[measure]\nkind = grid\n[measure.grid]\n0 0 0\n", 4, 1),
    ("key = 1\n", 1, 1),
    ("[job]\nn = 0\n", 2, 5),
    ("[model]\n[model]\n", 2, 1),
])
def test_error_locations(text, line, column):
    with pytest.raises(ModelSpecError) as info:
        parse(text)
    assert info.value.line == line
    assert info.value.column == column
    assert str(info.value).startswith(f"line {line}")


@pytest.mark.parametrize("text", [
    "[model]\nbuiltin = product_malus\ncorrelator = ua*vb\n",
    "[job]\ntype = bounds\np = 0 0 1\np_prime = 0 1 1\n",
    "[measure]\nkind = product_uniform\n[measure.grid]\n0 0 0 0 1\n",
    "[job]\np = 0 0 0\n",
])
def test_semantic_errors_carry_a_line(text):
    with pytest.raises(ModelSpecError) as info:
        parse(text)
    assert info.value.line is not None
