"""Command-line driver: ``leggettlab <command> --config FILE``.

Every command writes a CSV whose leading ``#`` lines record the tool
version, seed, resolutions and a SHA-256 of the configuration, which is
enough to rerun it bit-identically.  Exit codes: 0 success, 1 hypothesis
check failed, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .engine import (
    MonteCarlo,
    Quadrature,
    azimuthal_avg_correlator,
    chsh_value,
    check_hypotheses,
    compute_l,
    compute_r,
    leggett_grid,
    max_qm_violation,
    model_correlator,
    observed_correlator,
    plane_settings,
    qm_correlator,
    standard_chsh_settings,
)
from .eventsim import estimate_correlator, run_experiment, singles_average
from .geometry import normalize
from .models import HIDDEN_VARIABLE_BUILTINS, builtin_model
from .modelspec import ExperimentConfig, ModelSpecError, parse, serialize, with_overrides

OUT_DIR_ENV = "LEGGETTLAB_OUT_DIR"
COMMANDS = ("check", "curve", "bounds", "max-violation", "simulate", "scan")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


class CsvArtifact:
    def __init__(self, header, metadata):
        self.header = list(header)
        self.metadata = dict(metadata)
        self.rows = []

    def add(self, *row):
        if len(row) != len(self.header):
            raise ValueError(f"row has {len(row)} columns, header has {len(self.header)}")
        self.rows.append([fmt(x) for x in row])

    def render(self) -> str:
        buf = io.StringIO()
        for k, v in self.metadata.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


def _metadata(command: str, config: ExperimentConfig, text: str) -> dict:
    job = config.job
    return {
        "tool": f"leggettlab {__version__}",
        "command": command,
        "config_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
        "model": config.model.label,
        "measure": config.measure.kind + (f"({config.measure.sign:+d})" if config.measure.kind == "aligned_uniform" else ""),
        "seed": job.seed,
        "resolution": f"theta={job.theta_resolution},azimuth={job.azimuth_resolution},xi={job.xi_resolution}",
        "method": job.method,
    }


def _correlator(config: ExperimentConfig):
    model = config.build_model()
    if not model.hidden_variable:
        return qm_correlator()
    job = config.job
    method = MonteCarlo(job.n, job.seed) if job.method == "montecarlo" else Quadrature(job.resolution)
    return model_correlator(model, config.build_measure(), method)


def cmd_check(config, meta, out):
    model = config.build_model()
    if not model.hidden_variable:
        raise UsageError(f"{model.name} is not a hidden-variable model")
    report = check_hypotheses(model, config.build_measure(), seed=config.job.seed)
    art = CsvArtifact(["check", "passed", "max_deviation", "required", "note"], meta)
    for c in report.checks:
        art.add(c.name, c.passed, c.max_deviation, c.required, c.note)
        flag = "PASS" if c.passed else "FAIL"
        extra = " (not required for Leggett inequality)" if not c.required else ""
        print(f"{c.name:28s} {flag}  max_dev={c.max_deviation:.3g}{extra}", file=sys.stderr)
    return art, 0 if report.required_pass else 1


def cmd_curve(config, meta, out):
    job = config.job
    corr = _correlator(config)
    measure = config.build_measure()
    p = normalize(job.p)
    art = CsvArtifact(["phi", "C", "R", "L", "lower", "upper"], meta)
    for phi in job.phis():
        c = azimuthal_avg_correlator(corr, p, phi, job.xi_resolution).value
        r = compute_r(measure, p, phi, "rho", job.resolution).value
        l = compute_l(measure, p, phi, "rho", job.resolution).value
        art.add(phi, c, r, l, -1.0 + l, 1.0 - r)
    return art, 0


def cmd_bounds(config, meta, out):
    job = config.job
    corr = _correlator(config)
    phis = job.phis()
    lhs, rhs, tol = leggett_grid(corr, job.p, job.p_prime, phis, job.xi_resolution)
    art = CsvArtifact(["phi", "phi_prime", "lhs", "rhs", "slack", "tolerance"], meta)
    for i, phi in enumerate(phis):
        for k, phi_prime in enumerate(phis):
            art.add(phi, phi_prime, lhs[i, k], rhs[i, k], rhs[i, k] - lhs[i, k], tol[i, k])
    return art, 0


def cmd_max_violation(config, meta, out):
    job = config.job
    model = config.build_model()
    art = CsvArtifact(["phi_star", "violation"], meta)
    if not model.hidden_variable:
        phi_star, violation = max_qm_violation(job.scan_resolution)
        print(f"maximum violation {violation:.6f} at phi = -phi' = {phi_star:.6f}", file=sys.stderr)
    else:
        corr = _correlator(config)
        phis = np.linspace(0.0, np.pi, max(job.phi_steps, 64))
        lhs, rhs, _ = leggett_grid(corr, job.p, job.p_prime, np.concatenate([phis, -phis]), job.xi_resolution)
        n = len(phis)
        excess = np.diagonal(lhs[:n, n:] - rhs[:n, n:])
        k = int(np.argmax(excess))
        phi_star, violation = float(phis[k]), float(excess[k])
        if violation <= 0:
            art.metadata["note"] = "no violation"
            print("no violation", file=sys.stderr)
            violation = 0.0
    art.add(phi_star, violation)
    return art, 0


def cmd_simulate(config, meta, out):
    job = config.job
    model = config.build_model()
    measure = config.build_measure() if model.hidden_variable else None
    phis = job.phis()
    a, b = plane_settings(job.p, phis, job.xi_radians())
    settings = list(zip(a, b))
    table = run_experiment(model, measure, settings, job.n, job.seed)
    art = CsvArtifact(
        ["phi", "n_pp", "n_pm", "n_mp", "n_mm", "C", "stderr", "C_expected", "sigma_mean", "tau_mean"], meta
    )
    for k, phi in enumerate(phis):
        c, se = estimate_correlator(table, k)
        if model.hidden_variable:
            expected = observed_correlator(model, measure, a[k], b[k], Quadrature(job.resolution)).value
        else:
            expected = float(qm_correlator()(a[k], b[k]))
        ms, mse = singles_average(table, k, "left")
        mt, mte = singles_average(table, k, "right")
        for arm, m, s in (("left", ms, mse), ("right", mt, mte)):
            if abs(m) > 4 * s:
                print(f"warning: phi={phi:.4g} {arm} singles average {m:.4g} exceeds 4 stderr", file=sys.stderr)
        cnt = table.counts[k]
        art.add(phi, cnt[0, 0], cnt[0, 1], cnt[1, 0], cnt[1, 1], c, se, expected, ms, mt)
    return art, 0


def cmd_scan(config, meta, out):
    job = config.job
    measure = config.build_measure()
    phis = job.phis()
    chsh_set = standard_chsh_settings(job.p)
    candidates = [(name, builtin_model(name)) for name in HIDDEN_VARIABLE_BUILTINS]
    if config.model.correlator is not None:
        candidates.append((config.model.label, config.build_model()))
    candidates.append(("qm_singlet", builtin_model("qm_singlet")))
    art = CsvArtifact(
        ["model", "chsh", "chsh_pass", "leggett_min_slack", "leggett_pass", "outcome_independence"], meta
    )
    for name, model in candidates:
        corr = model_correlator(model, measure, Quadrature(job.resolution))
        chsh = chsh_value(corr, *chsh_set)
        lhs, rhs, tol = leggett_grid(corr, job.p, job.p_prime, phis, job.xi_resolution)
        slack = (rhs - lhs).ravel()
        leggett_pass = bool(np.all(slack >= -tol.ravel()))
        # the phi' = -phi line, where the singlet's excess is largest
        line = np.linspace(0.0, np.pi, 65)
        lhs2, rhs2, tol2 = leggett_grid(corr, job.p, job.p_prime, np.concatenate([line, -line]), job.xi_resolution)
        n = len(line)
        slack2 = np.diagonal(rhs2[:n, n:] - lhs2[:n, n:])
        slack = np.concatenate([slack, slack2])
        leggett_pass = leggett_pass and bool(np.all(slack2 >= -np.diagonal(tol2[:n, n:])))
        if model.hidden_variable:
            oi = "pass" if check_hypotheses(model, measure, seed=job.seed)["outcome_independence"].passed else "fail"
        else:
            oi = "n/a"
        art.add(name, chsh, chsh <= 2.0 + 1e-9, float(slack.min()), leggett_pass, oi)
    return art, 0


HANDLERS = {
    "check": cmd_check,
    "curve": cmd_curve,
    "bounds": cmd_bounds,
    "max-violation": cmd_max_violation,
    "simulate": cmd_simulate,
    "scan": cmd_scan,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="leggettlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"leggettlab {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="experiment file")
    ap.add_argument("--out", help=f"output CSV (default: config 'output', then ${OUT_DIR_ENV}/<command>.csv, then stdout)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--resolution", type=int, help="Gauss-Legendre points per polar axis; azimuthal points = 4x")
    return ap


def _destination(args, config: ExperimentConfig):
    if args.out:
        return Path(args.out)
    if config.job.output:
        return Path(config.job.output)
    if os.environ.get(OUT_DIR_ENV):
        return Path(os.environ[OUT_DIR_ENV]) / f"{args.command}.csv"
    return None


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        config = parse(text)
        res = args.resolution
        if res is not None and res < 2:
            raise UsageError("--resolution must be >= 2")
        config = with_overrides(
            config, seed=args.seed,
            theta_resolution=res, azimuth_resolution=4 * res if res else None,
        )
    except (OSError, ModelSpecError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for note in config.notices:
        print(f"notice: {note}", file=sys.stderr)

    meta = _metadata(args.command, config, serialize(config))
    try:
        art, code = HANDLERS[args.command](config, meta, None)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    dest = _destination(args, config)
    rendered = art.render()
    if dest is None:
        sys.stdout.write(rendered)
    else:
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(rendered, encoding="utf-8")
    return code


if __name__ == "__main__":
    sys.exit(main())
