"""Line-oriented experiment files.

Example::

    # singlet-like hidden vectors, shared-latent coupling
    [measure]
    kind = aligned_uniform
    sign = -1

    [model]
    correlator = 1 - abs(ua - vb)

    [job]
    type = bounds
    p = 0 0 1
    p_prime = 1 0 0
    phi_min = -3.14159
    phi_max = 3.14159
    phi_steps = 16

Sections are ``[measure]``, ``[measure.grid]``, ``[model]`` and ``[job]``.
Lines in ``[measure.grid]`` are atoms ``theta_u phi_u theta_v phi_v weight``
(radians, canonical frame).  Correlator expressions use ``ua`` and ``vb``
(the projections u.a and v.b), numbers, ``+ - * /``, parentheses and
``abs()``, ``min()``, ``max()``.  Job angles are radians unless
``degrees = true``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Union

import numpy as np

from .measures import AlignedUniform, GridMeasure, ProductUniform, VectorPairMeasure
from .models import BUILTIN_MODELS, CorrelatorModel, OutcomeModel, builtin_model, validate_correlator
from .quad import Resolution


class ModelSpecError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}" + (f", column {column}" if column else "") + ": " if line else ""
        super().__init__(where + message)


# -- expressions ------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]

VARIABLES = ("ua", "vb")
FUNCTIONS = {"abs": (1, 1), "min": (2, None), "max": (2, None)}
_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/(),]))")


def _tokenize(text: str, line: int, col0: int):
    pos, toks = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ModelSpecError(f"unexpected character {text[bad]!r} in expression", line, col0 + bad)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), col0 + start))
        pos = m.end()
    toks.append(("end", "", col0 + len(text)))
    return toks


class _ExprParser:
    """LL(1) recursive descent with the usual precedence."""

    def __init__(self, text: str, line: int = 1, col0: int = 1):
        self.toks = _tokenize(text, line, col0)
        self.i = 0
        self.line = line

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, col = self.take()
        if text != value:
            raise ModelSpecError(f"expected {value!r}, found {text or 'end of expression'!r}", self.line, col)

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, col = self.peek()
        if kind != "end":
            raise ModelSpecError(f"unexpected {text!r} after expression", self.line, col)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.primary()

    def primary(self):
        kind, text, col = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in VARIABLES:
                return Var(text)
            if text in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                lo, hi = FUNCTIONS[text]
                if len(args) < lo or (hi is not None and len(args) > hi):
                    raise ModelSpecError(f"{text}() takes {lo}{'' if hi == lo else '+'} argument(s), got {len(args)}", self.line, col)
                return Call(text, tuple(args))
            raise ModelSpecError(f"unknown name {text!r}; expected ua, vb, abs, min or max", self.line, col)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ModelSpecError(f"unexpected {text or 'end of expression'!r}", self.line, col)


def parse_expression(text: str, line: int = 1, column: int = 1) -> Expr:
    return _ExprParser(text, line, column).parse()


def evaluate(node: Expr, ua, vb):
    if isinstance(node, Num):
        return np.full(np.broadcast(ua, vb).shape, node.value)
    if isinstance(node, Var):
        return np.asarray(ua if node.name == "ua" else vb, dtype=float)
    if isinstance(node, Neg):
        return -evaluate(node.operand, ua, vb)
    if isinstance(node, BinOp):
        left, right = evaluate(node.left, ua, vb), evaluate(node.right, ua, vb)
        with np.errstate(divide="ignore", invalid="ignore"):
            return {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}[node.op](left, right)
    if isinstance(node, Call):
        args = [evaluate(a, ua, vb) for a in node.args]
        if node.func == "abs":
            return np.abs(args[0])
        reduce = np.minimum if node.func == "min" else np.maximum
        out = args[0]
        for a in args[1:]:
            out = reduce(out, a)
        return out
    raise TypeError(f"not an expression node: {node!r}")


def to_source(node: Expr) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"-{to_source(node.operand)}"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    return f"{node.func}({', '.join(to_source(a) for a in node.args)})"


@dataclass(frozen=True)
class ExpressionReport:
    valid: bool
    min_probability: float
    offending: tuple | None  # (ua, vb, sigma, tau)


def validate_expression(expr: Expr | str, n: int = 64) -> ExpressionReport:
    """Check that ``(1 + s ua + t vb + s t C) / 4 >= 0`` on an ``n x n`` grid of (ua, vb)."""
    if isinstance(expr, str):
        expr = parse_expression(expr)
    pmin, worst = validate_correlator(lambda x, y: evaluate(expr, x, y), n)
    valid = bool(np.isfinite(pmin) and worst is None)
    return ExpressionReport(valid, pmin, worst)


def expression_model(expr: Expr | str) -> CorrelatorModel:
    if isinstance(expr, str):
        expr = parse_expression(expr)
    return CorrelatorModel(lambda x, y: evaluate(expr, x, y), to_source(expr))


# -- configuration -----------------------------------------------------------------

MEASURE_KINDS = ("product_uniform", "aligned_uniform", "grid")
JOB_TYPES = ("check", "scan", "curve", "max-violation", "simulate", "bounds")


@dataclass(frozen=True)
class MeasureSpec:
    kind: str = "product_uniform"
    sign: int = -1
    atoms: tuple = ()

    def build(self) -> VectorPairMeasure:
        if self.kind == "product_uniform":
            return ProductUniform()
        if self.kind == "aligned_uniform":
            return AlignedUniform(self.sign)
        return GridMeasure(np.array(self.atoms, dtype=float))


@dataclass(frozen=True)
class ModelSpec:
    builtin: str | None = "product_malus"
    correlator: Expr | None = None

    def build(self) -> OutcomeModel:
        if self.correlator is not None:
            return expression_model(self.correlator)
        return builtin_model(self.builtin)

    @property
    def label(self) -> str:
        return self.builtin if self.correlator is None else f"correlator:{to_source(self.correlator)}"


@dataclass(frozen=True)
class JobSpec:
    type: str = "check"
    p: tuple = (0.0, 0.0, 1.0)
    p_prime: tuple = (1.0, 0.0, 0.0)
    phi_min: float = -math.pi
    phi_max: float = math.pi
    phi_steps: int = 16
    xi: float = 0.0
    degrees: bool = False
    theta_resolution: int = 64
    azimuth_resolution: int = 256
    xi_resolution: int = 128
    method: str = "quadrature"
    n: int = 100_000
    seed: int = 0
    scan_resolution: int = 10_000
    output: str | None = None

    def _rad(self, x):
        return np.deg2rad(x) if self.degrees else np.asarray(x, float)

    def phis(self) -> np.ndarray:
        return self._rad(np.linspace(self.phi_min, self.phi_max, self.phi_steps))

    def xi_radians(self) -> float:
        return float(self._rad(self.xi))

    @property
    def resolution(self) -> Resolution:
        return Resolution(self.theta_resolution, self.azimuth_resolution, self.xi_resolution)


@dataclass(frozen=True)
class ExperimentConfig:
    measure: MeasureSpec = MeasureSpec()
    model: ModelSpec = ModelSpec()
    job: JobSpec = JobSpec()
    notices: tuple = field(default=(), compare=False)

    def build_measure(self) -> VectorPairMeasure:
        return self.measure.build()

    def build_model(self) -> OutcomeModel:
        return self.model.build()


_INT_KEYS = {"phi_steps": 1, "theta_resolution": 2, "azimuth_resolution": 2, "xi_resolution": 8,
             "n": 1, "seed": 0, "scan_resolution": 1000}
_FLOAT_KEYS = ("phi_min", "phi_max", "xi")
_VECTOR_KEYS = ("p", "p_prime")
_SECTIONS = ("measure", "measure.grid", "model", "job")


def _strip_comment(raw: str) -> str:
    k = raw.find("#")
    return raw if k < 0 else raw[:k]


def _number(text: str, line: int, col: int) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ModelSpecError(f"cannot parse number {text!r}", line, col) from None
    if not math.isfinite(val):
        raise ModelSpecError(f"number {text!r} is not finite", line, col)
    return val


def _integer(text: str, line: int, col: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ModelSpecError(f"cannot parse integer {text!r}", line, col) from None


def _fields_of(line_text: str, start: int):
    """Whitespace-separated fields of ``line_text[start:]`` with 1-based columns."""
    return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line_text) if m.start() >= start]


def parse(text: str) -> ExperimentConfig:
    section = None
    measure: dict = {}
    model: dict = {}
    job: dict = {}
    atoms: list = []
    seen: dict = {}
    notices: list = []
    model_line = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = _strip_comment(raw)
        if not body.strip():
            continue
        stripped = body.strip()
        col = body.index(stripped[0]) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ModelSpecError("unterminated section header", lineno, col)
            name = stripped[1:-1].strip()
            if name not in _SECTIONS:
                raise ModelSpecError(f"unknown section [{name}]", lineno, col)
            if name in seen:
                raise ModelSpecError(f"duplicate section [{name}]", lineno, col)
            seen[name] = lineno
            section = name
            continue
        if section is None:
            raise ModelSpecError("content before any section header", lineno, col)

        if section == "measure.grid":
            parts = _fields_of(body, 0)
            if len(parts) != 5:
                raise ModelSpecError(f"grid atom needs 5 numbers (theta_u phi_u theta_v phi_v weight), got {len(parts)}", lineno, col)
            vals = [_number(t, lineno, c) for t, c in parts]
            if vals[4] < 0:
                raise ModelSpecError("negative atom weight", lineno, parts[4][1])
            atoms.append(tuple(vals))
            continue

        if "=" not in body:
            raise ModelSpecError("expected 'key = value'", lineno, col)
        eq = body.index("=")
        key = body[:eq].strip()
        value = body[eq + 1:].strip()
        vcol = eq + 2 + (len(body[eq + 1:]) - len(body[eq + 1:].lstrip()))
        if not value:
            raise ModelSpecError(f"missing value for {key!r}", lineno, vcol)
        target = {"measure": measure, "model": model, "job": job}[section]
        if key in target:
            raise ModelSpecError(f"duplicate key {key!r}", lineno, col)

        if section == "measure":
            if key == "kind":
                if value not in MEASURE_KINDS:
                    raise ModelSpecError(f"unknown measure kind {value!r}; expected one of {MEASURE_KINDS}", lineno, vcol)
                measure[key] = value
            elif key == "sign":
                sign = _integer(value, lineno, vcol)
                if sign not in (1, -1):
                    raise ModelSpecError("sign must be +1 or -1", lineno, vcol)
                measure[key] = sign
            else:
                raise ModelSpecError(f"unknown key {key!r} in [measure]", lineno, col)
        elif section == "model":
            if key == "builtin":
                if value not in BUILTIN_MODELS:
                    raise ModelSpecError(f"unknown builtin model {value!r}; expected one of {sorted(BUILTIN_MODELS)}", lineno, vcol)
                model[key] = value
            elif key == "correlator":
                expr = parse_expression(value, lineno, vcol)
                report = validate_expression(expr)
                if not report.valid:
                    where = ""
                    if report.offending:
                        x, y, s, t = report.offending
                        where = f" (P({s:+d},{t:+d}) = {report.min_probability:.3g} at ua={x:.3g}, vb={y:.3g})"
                    raise ModelSpecError(f"correlator yields an invalid joint distribution{where}", lineno, vcol)
                model[key] = expr
            else:
                raise ModelSpecError(f"unknown key {key!r} in [model]", lineno, col)
            model_line[key] = lineno
        else:
            job[key] = _job_value(key, value, lineno, vcol, col)

    if "builtin" in model and "correlator" in model:
        raise ModelSpecError("give either builtin or correlator, not both", model_line["correlator"])

    kind = measure.get("kind", "grid" if atoms else "product_uniform")
    if kind == "grid":
        if not atoms:
            raise ModelSpecError("grid measure needs atoms in [measure.grid]", seen.get("measure.grid") or seen.get("measure"))
        total = sum(a[4] for a in atoms)
        if total <= 0:
            raise ModelSpecError("grid atom weights sum to zero", seen["measure.grid"])
        if abs(total - 1.0) > 1e-10:
            notices.append(f"grid weights summed to {total:.12g}; normalized to 1")
            atoms = [(*a[:4], a[4] / total) for a in atoms]
    elif atoms:
        raise ModelSpecError(f"[measure.grid] given but measure kind is {kind!r}", seen["measure.grid"])

    measure_spec = MeasureSpec(kind, measure.get("sign", -1), tuple(atoms))
    model_spec = ModelSpec(None, model["correlator"]) if "correlator" in model else ModelSpec(model.get("builtin", "product_malus"))
    job_spec = JobSpec(**job)
    if abs(np.dot(job_spec.p, job_spec.p_prime)) > 1e-10 * np.linalg.norm(job_spec.p) * np.linalg.norm(job_spec.p_prime):
        if job_spec.type in ("bounds", "scan", "max-violation"):
            raise ModelSpecError("p and p_prime must be orthogonal", seen.get("job"))
    return ExperimentConfig(measure_spec, model_spec, job_spec, tuple(notices))


def _job_value(key, value, line, vcol, kcol):
    if key == "type":
        if value not in JOB_TYPES:
            raise ModelSpecError(f"unknown job type {value!r}; expected one of {JOB_TYPES}", line, vcol)
        return value
    if key == "method":
        if value not in ("quadrature", "montecarlo"):
            raise ModelSpecError("method must be quadrature or montecarlo", line, vcol)
        return value
    if key == "degrees":
        if value.lower() not in ("true", "false"):
            raise ModelSpecError("degrees must be true or false", line, vcol)
        return value.lower() == "true"
    if key == "output":
        return value
    if key in _INT_KEYS:
        val = _integer(value, line, vcol)
        if val < _INT_KEYS[key]:
            raise ModelSpecError(f"{key} must be >= {_INT_KEYS[key]}", line, vcol)
        return val
    if key in _FLOAT_KEYS:
        return _number(value, line, vcol)
    if key in _VECTOR_KEYS:
        parts = _fields_of(value, 0)
        if len(parts) != 3:
            raise ModelSpecError(f"{key} needs three components", line, vcol)
        vec = tuple(_number(t, line, vcol + c - 1) for t, c in parts)
        if np.linalg.norm(vec) == 0:
            raise ModelSpecError(f"{key} must be nonzero", line, vcol)
        return vec
    raise ModelSpecError(f"unknown key {key!r} in [job]", line, kcol)


def serialize(config: ExperimentConfig) -> str:
    out = ["[measure]", f"kind = {config.measure.kind}"]
    if config.measure.kind == "aligned_uniform":
        out.append(f"sign = {config.measure.sign}")
    if config.measure.kind == "grid":
        out.append("")
        out.append("[measure.grid]")
        out.extend(" ".join(repr(float(x)) for x in atom) for atom in config.measure.atoms)
    out += ["", "[model]"]
    if config.model.correlator is not None:
        out.append(f"correlator = {to_source(config.model.correlator)}")
    else:
        out.append(f"builtin = {config.model.builtin}")
    out += ["", "[job]"]
    for f in fields(JobSpec):
        val = getattr(config.job, f.name)
        if val is None:
            continue
        if isinstance(val, tuple):
            val = " ".join(repr(float(x)) for x in val)
        elif isinstance(val, bool):
            val = "true" if val else "false"
        elif isinstance(val, float):
            val = repr(val)
        out.append(f"{f.name} = {val}")
    return "\n".join(out) + "\n"


def with_overrides(config: ExperimentConfig, **job_overrides) -> ExperimentConfig:
    clean = {k: v for k, v in job_overrides.items() if v is not None}
    return replace(config, job=replace(config.job, **clean)) if clean else config
