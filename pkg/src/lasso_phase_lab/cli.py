"""``lasso-phase-lab`` command line front end.

Config files are JSON objects whose top-level keys mirror
:class:`~lasso_phase_lab.experiment.ExperimentConfig`, plus one optional
section per subcommand (``instance``, ``constants``, ``validate``). Unknown
keys anywhere are rejected.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import theory
from .conditions import design_report, lemma1_check, population_constants
from .ensemble import CovarianceKind, CovarianceSpec, build_covariance, make_signal, observe, sample_design
from .errors import ConfigError, LabError, NumericalError
from .experiment import (
    ExperimentConfig,
    StatConfig,
    SweepCell,
    SweepResult,
    run_sweep,
    validate_statistics,
)
from .solver import sign_pattern, solve_lasso

log = logging.getLogger("lasso_phase_lab")

CSV_COLUMNS = (
    "p", "regime", "theta", "s", "n", "lambda",
    "trials", "successes", "p_hat", "ci_lo", "ci_hi", "ambiguous",
)

# Toeplitz rho = 0.10 threshold annotations reported alongside published curves
PUBLISHED_TOEPLITZ = {"rho": 0.10, "theta_u": 1.84, "theta_l": 0.46}

EXPERIMENT_KEYS = {
    "p_list", "regime", "alpha", "gamma", "ensemble", "sigma2", "signal_magnitude",
    "theta_grid", "trials", "base_seed", "success_mode", "crosscheck_every",
}
SECTION_KEYS = {
    "instance": {"p", "s", "n", "theta", "lambda", "seed"},
    "constants": {"c_min", "c_max", "epsilon"},
    "validate": {"n", "s", "p", "sigma2", "lambda", "reps", "seed", "v_columns"},
}
ENSEMBLE_KEYS = {"kind", "rho", "matrix"}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Six significant digits, '.' decimal separator, integers untouched."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".6g")


def _row(cell: SweepCell) -> dict:
    return {
        "p": cell.p,
        "regime": cell.regime,
        "theta": cell.theta,
        "s": cell.s,
        "n": cell.n,
        "lambda": cell.lambda_n,
        "trials": cell.trials,
        "successes": cell.successes,
        "p_hat": cell.p_hat,
        "ci_lo": cell.ci_lo,
        "ci_hi": cell.ci_hi,
        "ambiguous": cell.ambiguous,
    }


def _sorted_cells(result: SweepResult):
    return sorted(result.cells, key=lambda c: (c.p, c.theta))


def emit_results(result: SweepResult, fmt_name: str = "csv") -> bytes:
    if fmt_name == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for cell in _sorted_cells(result):
            row = _row(cell)
            writer.writerow([row[k] if k == "regime" else fmt(row[k]) for k in CSV_COLUMNS])
        return buf.getvalue().encode("utf-8")
    if fmt_name == "jsonl":
        lines = []
        for cell in _sorted_cells(result):
            row = _row(cell)
            obj = {k: row[k] if k == "regime" else json.loads(fmt(row[k])) for k in CSV_COLUMNS}
            lines.append(json.dumps(obj, separators=(",", ":")) + "\n")
        return "".join(lines).encode("utf-8")
    raise ValueError(f"unknown format {fmt_name!r}")


def read_jsonl(data: bytes) -> SweepResult:
    cells = []
    for line in data.decode("utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        cells.append(
            SweepCell(
                p=obj["p"], regime=obj["regime"], theta=obj["theta"], s=obj["s"], n=obj["n"],
                lambda_n=obj["lambda"], trials=obj["trials"], successes=obj["successes"],
                p_hat=obj["p_hat"], ci_lo=obj["ci_lo"], ci_hi=obj["ci_hi"], ambiguous=obj["ambiguous"],
            )
        )
    return SweepResult(tuple(cells))


def write_output(data: bytes, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(data.decode("utf-8"))
        sys.stdout.flush()
        return
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


# ---------------------------------------------------------------------------
# config parsing


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _ensemble(obj: dict) -> CovarianceSpec:
    if not isinstance(obj, dict):
        raise ConfigError("ensemble must be an object")
    _reject_unknown(obj, ENSEMBLE_KEYS, "ensemble")
    try:
        kind = CovarianceKind(obj.get("kind", "identity"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    matrix = obj.get("matrix")
    if kind is CovarianceKind.CUSTOM:
        if matrix is None:
            raise ConfigError("custom ensemble needs 'matrix'")
        matrix = np.asarray(matrix, dtype=float)
        return CovarianceSpec(kind, matrix.shape[0], 0.0, matrix)
    if matrix is not None:
        raise ConfigError("'matrix' is only valid for the custom ensemble")
    return CovarianceSpec(kind, 0, float(obj.get("rho", 0.0)))


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(raw, EXPERIMENT_KEYS | set(SECTION_KEYS), "config")
    for name, keys in SECTION_KEYS.items():
        if name in raw:
            if not isinstance(raw[name], dict):
                raise ConfigError(f"'{name}' must be an object")
            _reject_unknown(raw[name], keys, name)
    return raw


def experiment_config(raw: dict, seed=None, trials=None) -> ExperimentConfig:
    kwargs = {k: v for k, v in raw.items() if k in EXPERIMENT_KEYS}
    if "ensemble" in kwargs:
        kwargs["ensemble"] = _ensemble(kwargs["ensemble"])
    if seed is not None:
        kwargs["base_seed"] = seed
    if trials is not None:
        kwargs["trials"] = trials
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# subcommands


def _lines(pairs) -> bytes:
    return "".join(f"{k}={v}\n" for k, v in pairs).encode("utf-8")


def _vec(a) -> str:
    return "[" + ",".join(fmt(x) for x in np.asarray(a).tolist()) + "]"


def _instance(raw: dict, cfg: ExperimentConfig, seed):
    inst = raw.get("instance", {})
    p = int(inst.get("p", cfg.p_list[0]))
    s = int(inst["s"]) if "s" in inst else cfg.sparsity(p)
    theta = float(inst.get("theta", 1.0))
    n = int(inst["n"]) if "n" in inst else theory.sample_size(theta, s, p)
    lam = inst.get("lambda")
    lam = float(lam) if lam is not None else theory.lambda_schedule(n, p, s)
    seed = seed if seed is not None else int(inst.get("seed", cfg.base_seed))
    rng = np.random.default_rng(np.random.SeedSequence([seed, p, s, n]))
    cov = build_covariance(cfg.ensemble.with_dimension(p))
    X = sample_design(cov, n, rng)
    signal = make_signal(p, s, cfg.signal_magnitude, rng)
    return cov, observe(X, signal, cfg.sigma2, rng, cov.spec), lam


def cmd_solve(args, raw):
    cfg = experiment_config(raw, trials=args.trials)
    _, inst, lam = _instance(raw, cfg, args.seed)
    sol = solve_lasso(inst.X, inst.Y, lam)
    if not sol.converged:
        raise NumericalError(f"solver did not converge (KKT residual {sol.kkt_residual:.3e})")
    pattern = sign_pattern(sol.beta_hat)
    return _lines([
        ("n", inst.n), ("p", inst.signal.p), ("s", inst.signal.s), ("lambda", fmt(lam)),
        ("iterations", sol.iterations), ("objective", fmt(sol.objective)),
        ("kkt_residual", f"{sol.kkt_residual:.3e}"),
        ("support", _vec(inst.signal.support)),
        ("beta_hat", _vec(sol.beta_hat)),
        ("sign_pattern", _vec(pattern)),
        ("recovered", int(np.array_equal(pattern, sign_pattern(inst.signal.beta_star)))),
    ])


def cmd_check(args, raw):
    cfg = experiment_config(raw, trials=args.trials)
    cov, inst, lam = _instance(raw, cfg, args.seed)
    cert = lemma1_check(inst.X, inst.signal, inst.W, lam)
    rep = design_report(inst.X, cov, inst.signal.support)
    return _lines([
        ("n", inst.n), ("p", inst.signal.p), ("s", inst.signal.s), ("lambda", fmt(lam)),
        ("cond_a", int(cert.cond_a)), ("cond_b", int(cert.cond_b)),
        ("margin_a", fmt(cert.margin_a)), ("margin_b", fmt(cert.margin_b)),
        ("margin_sign", fmt(cert.margin_sign)),
        ("event_MV", int(cert.event_MV)), ("event_MU", int(cert.event_MU)),
        ("recovery", int(cert.success)),
        ("epsilon_sample", fmt(rep.epsilon_sample)), ("lambda_min_sample", fmt(rep.lambda_min_sample)),
        ("epsilon_pop", fmt(rep.epsilon_pop)), ("c_min", fmt(rep.c_min)),
        ("c_max", fmt(rep.c_max)), ("d_max", fmt(rep.d_max)),
    ])


def ensemble_constants(cfg: ExperimentConfig, p: int, s: int):
    """(c_min, c_max, epsilon) for the configured ensemble.

    Toeplitz: spectral-density extremes and the population incoherence of a
    contiguous support of size ``s``.
    """
    spec = cfg.ensemble
    if spec.kind is CovarianceKind.IDENTITY:
        return 1.0, 1.0, 1.0
    cov = build_covariance(spec.with_dimension(p))
    eps, c_min, c_max, _ = population_constants(cov, np.arange(s))
    if spec.kind is CovarianceKind.TOEPLITZ:
        c_min, c_max = theory.toeplitz_eigen_extremes(spec.rho)
    return c_min, c_max, eps


def cmd_thresholds(args, raw):
    cfg = experiment_config(raw, trials=args.trials)
    p = cfg.p_list[0]
    s = cfg.sparsity(p)
    consts = raw.get("constants", {})
    if consts and set(consts) != SECTION_KEYS["constants"]:
        raise ConfigError("'constants' needs all of c_min, c_max, epsilon")
    if consts:
        c_min, c_max, eps = (float(consts[k]) for k in ("c_min", "c_max", "epsilon"))
    else:
        c_min, c_max, eps = ensemble_constants(cfg, p, s)
    pair = theory.thresholds(c_min, c_max, eps)
    out = [
        f"theta_l={pair.theta_l!r} theta_u={pair.theta_u!r}",
        f"c_min={fmt(c_min)} c_max={fmt(c_max)} epsilon={fmt(eps)}",
    ]
    if cfg.ensemble.kind is CovarianceKind.TOEPLITZ and math.isclose(cfg.ensemble.rho, PUBLISHED_TOEPLITZ["rho"]):
        gap_u = pair.theta_u - PUBLISHED_TOEPLITZ["theta_u"]
        gap_l = pair.theta_l - PUBLISHED_TOEPLITZ["theta_l"]
        flag = "GAP" if max(abs(gap_u), abs(gap_l)) > 0.05 else "ok"
        out.append(
            f"published theta_l~{PUBLISHED_TOEPLITZ['theta_l']} theta_u~{PUBLISHED_TOEPLITZ['theta_u']} "
            f"(computed minus published: theta_l {gap_l:+.3f}, theta_u {gap_u:+.3f}) {flag}"
        )
    out.append(f"p={p} s={s} regime={cfg.regime.value}")
    out.append("theta,n,lambda")
    for theta in cfg.theta_grid:
        sched = theory.schedule(theta, s, p)
        out.append(f"{fmt(theta)},{sched.n},{fmt(sched.lambda_n)}")
    return ("\n".join(out) + "\n").encode("utf-8")


def cmd_sweep(args, raw):
    cfg = experiment_config(raw, seed=args.seed, trials=args.trials)

    def progress(done, total):
        log.info("sweep progress %d/%d cells", done, total)

    result = run_sweep(cfg, progress=progress)
    disagree = sum(c.disagreements for c in result.cells)
    if disagree:
        log.warning("solver cross-check disagreed with the certificate on %d trials", disagree)
    return emit_results(result, args.format)


def cmd_validate(args, raw):
    sec = dict(raw.get("validate", {}))
    kwargs = {}
    for key in ("n", "s", "p", "reps", "seed", "v_columns"):
        if key in sec:
            kwargs[key] = int(sec[key])
    if "sigma2" in sec:
        kwargs["sigma2"] = float(sec["sigma2"])
    if "lambda" in sec:
        kwargs["lam"] = float(sec["lambda"])
    if "ensemble" in raw:
        kwargs["ensemble"] = _ensemble(raw["ensemble"])
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.trials is not None:
        kwargs["reps"] = args.trials
    report = validate_statistics(StatConfig(**kwargs))
    out = []
    for c in report.checks:
        out.append(
            f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.kind}={c.statistic:.4g} "
            f"empirical={c.empirical:.6g} expected={c.expected:.6g}"
        )
    out.append(f"overall={'PASS' if report.passed else 'FAIL'}")
    data = ("\n".join(out) + "\n").encode("utf-8")
    return data, (0 if report.passed else 2)


COMMANDS = {
    "solve": cmd_solve,
    "check": cmd_check,
    "sweep": cmd_sweep,
    "thresholds": cmd_thresholds,
    "validate": cmd_validate,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lasso-phase-lab", description="Lasso sign-recovery phase transition lab")
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--output", help="output file (default: stdout)")
    parser.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    parser.add_argument("--seed", type=int, help="override base seed")
    parser.add_argument("--trials", type=int, help="override trial / replicate count")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"lasso-phase-lab: usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("lasso-phase-lab: usage error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 1
    try:
        raw = load_config(args.config)
        result = COMMANDS[args.subcommand](args, raw)
        code = 0
        if isinstance(result, tuple):
            result, code = result
        write_output(result, args.output)
        return code
    except NumericalError as exc:
        print(f"lasso-phase-lab: numerical error: {exc}", file=sys.stderr)
        return 2
    except (LabError, ValueError, TypeError, KeyError) as exc:
        print(f"lasso-phase-lab: usage error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"lasso-phase-lab: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
