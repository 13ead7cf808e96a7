"""
Command-line interface: ``effgibbs {report,sweep,figure1,verify}``.

Exit codes: 0 success, 1 a verification check failed, 2 invalid
configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy

from . import __version__
from .bohr import bohr_decompose
from .cumulant import _set_second_order_corruption
from .exact import BETA_CAP, effective_gibbs, gibbs
from .exceptions import EffGibbsError
from .models import (
    FAMILIES,
    ModelSpec,
    build,
    check_truncation,
    closed_form_dS,
    figure1_coefficient,
)
from .pinching import spectral_decompose
from .serialize import dumps, write_csv
from .thermo import thermo_report, von_neumann_entropy
from .verify import SUITES, run_suite

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
ENV_CLUSTER_TOL = "EFFGIBBS_CLUSTER_TOL"
ENV_FREQ_TOL = "EFFGIBBS_FREQ_TOL"
ENV_FOCK_CUTOFF = "EFFGIBBS_FOCK_CUTOFF"
FIGURE1_FAMILIES = ("two_tls", "two_osc", "tls_osc")
FIGURE1_EXACT_MIN = 0.5


class ConfigError(Exception):
    """Invalid command-line or model configuration (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    spec: ModelSpec
    lam: float
    order: int
    cluster_tol: float | None
    freq_tol: float | None
    seed: int
    output: str | None
    fmt: str


# --------------------------------------------------------------------------- config


def _env_float(name: str) -> float | None:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}={raw!r} is not a number") from exc


def _env_int(name: str) -> int | None:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}={raw!r} is not an integer") from exc


def _parse_g(text: str) -> complex:
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ConfigError(f"--g expects RE or RE,IM, got {text!r}")


def _model_from_args(args) -> ModelSpec:
    if args.model:
        try:
            with open(args.model, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read model file {args.model!r}: {exc}") from exc
    else:
        data = {"family": args.family or "two_tls"}
    overrides = {
        "omega_a": args.omega_a,
        "omega_b": args.omega_b,
        "delta_omega": args.delta_omega,
    }
    for key, val in overrides.items():
        if val is not None:
            data[key] = val
    if args.g is not None:
        g = _parse_g(args.g)
        data["g"] = [g.real, g.imag]
    if args.resonant:
        data["resonant"] = True
    if args.lam is not None:
        data["lambda"] = args.lam
    if args.family and args.model:
        data["family"] = args.family
    cutoff = args.cutoff if args.cutoff is not None else _env_int(ENV_FOCK_CUTOFF)
    if cutoff is not None:
        data["cutoff"] = cutoff
    try:
        return ModelSpec.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model: {exc}") from exc


def _config(args) -> RunConfig:
    spec = _model_from_args(args)
    if args.order < 0:
        raise ConfigError("--order must be >= 0")
    cluster = args.cluster_tol if args.cluster_tol is not None else _env_float(ENV_CLUSTER_TOL)
    freq = args.freq_tol if args.freq_tol is not None else _env_float(ENV_FREQ_TOL)
    for name, val in (("cluster_tol", cluster), ("freq_tol", freq)):
        if val is not None and not (val >= 0 and math.isfinite(val)):
            raise ConfigError(f"{name} must be a nonnegative number, got {val}")
    return RunConfig(spec, spec.lam, args.order, cluster, freq, args.seed, args.output, args.format)


def _check_beta(beta: float) -> float:
    if not (math.isfinite(beta) and 0 < beta <= BETA_CAP):
        raise ConfigError(f"beta must be in (0, {BETA_CAP:g}], got {beta}")
    return beta


def _beta_grid(lo: float, hi: float, steps: int, spacing: str) -> np.ndarray:
    if steps < 1:
        raise ConfigError("--steps must be >= 1")
    if not lo < hi and steps > 1:
        raise ConfigError(f"grid needs min < max, got {lo} and {hi}")
    _check_beta(lo)
    _check_beta(hi)
    if steps == 1:
        return np.array([lo])
    if spacing == "log":
        return np.geomspace(lo, hi, steps)
    return np.linspace(lo, hi, steps)


def _metadata(cfg: RunConfig | None, seed: int, extra: dict | None = None) -> dict:
    meta = {
        "program": "effgibbs",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": seed,
    }
    if cfg is not None:
        meta["cluster_tol"] = cfg.cluster_tol
        meta["freq_tol"] = cfg.freq_tol
        meta["order"] = cfg.order
    if extra:
        meta.update(extra)
    return meta


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------- commands


def _decompositions(cfg: RunConfig):
    built = build(cfg.spec)
    sd = spectral_decompose(built.H0, cfg.cluster_tol)
    bd = bohr_decompose(built.H_I, sd, cfg.freq_tol)
    return built, sd, bd


def _check_truncation(spec: ModelSpec, beta: float) -> None:
    try:
        check_truncation(spec, beta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _report_dict(cfg: RunConfig, beta: float) -> dict:
    _check_truncation(cfg.spec, beta)
    built, sd, bd = _decompositions(cfg)
    rep = thermo_report(built.H0, built.H_I, cfg.lam, beta, cfg.order, sd=sd, bd=bd)
    scal = rep.scalars()
    scal["Z"] = rep.Z
    out = {
        "metadata": _metadata(cfg, cfg.seed),
        "model": cfg.spec.to_dict(),
        "thermo": scal,
        "checks": {
            "dU_minus_dS_over_beta": rep.dU - rep.dS / beta,
            "dual_route_gap": rep.dS - rep.dS_derivative,
            "dF_minus_rwa_form": rep.dF_at_rho_tilde - rep.dF_rwa_form,
        },
        "term_norms": rep.term_norms,
        "H0": built.H0,
        "H_effective_exact": rep.H_exact,
        "H_effective_perturbative": rep.H_pert,
        "H_effective_terms": list(rep.H_pert_terms),
    }
    if cfg.spec.family != "custom":
        try:
            out["thermo"]["dS_closed_form"] = closed_form_dS(cfg.spec, beta, cfg.lam)
        except EffGibbsError:
            pass
    return out


def cmd_report(args) -> int:
    cfg = _config(args)
    beta = _check_beta(args.beta)
    doc = _report_dict(cfg, beta)
    if cfg.fmt == "csv":
        keys = list(doc["thermo"].keys())
        text = write_csv(keys, [[doc["thermo"][k] for k in keys]], comments=[f"effgibbs {__version__} report"])
    else:
        text = dumps(doc)
    _emit(text, cfg.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    grid = _beta_grid(args.beta_min, args.beta_max, args.steps, args.spacing)
    built, sd, bd = _decompositions(cfg)
    rows = []
    for beta in grid:
        _check_truncation(cfg.spec, float(beta))
        rep = thermo_report(built.H0, built.H_I, cfg.lam, float(beta), cfg.order, sd=sd, bd=bd)
        rows.append(rep.scalars())
    keys = list(rows[0].keys())
    if cfg.fmt == "json":
        text = dumps({"metadata": _metadata(cfg, cfg.seed), "model": cfg.spec.to_dict(), "rows": rows})
    else:
        comments = [
            f"effgibbs {__version__} sweep; family={cfg.spec.family} resonant={cfg.spec.resonant}",
            f"lambda={cfg.lam!r} order={cfg.order} spacing={args.spacing}",
        ]
        text = write_csv(keys, [[r[k] for k in keys] for r in rows], comments)
    _emit(text, cfg.output)
    return EXIT_OK


def figure1_exact_value(family: str, x: float, lam: float, cutoff: int) -> float:
    """
    Exact-pipeline ``dS * omega_a / (lam^2 beta |g|^2)`` for the resonance variant
    at ``beta omega_a = x`` and ``beta |g| = 1`` (``omega_a = 1``, ``beta = x``).
    """
    spec = ModelSpec(family, omega_a=1.0, omega_b=1.0, g=1.0 / x, lam=lam, cutoff=cutoff, resonant=True)
    built = build(spec)
    sd = spectral_decompose(built.H0)
    H = built.H(lam)
    pair = gibbs(H, x)
    rho_t, _ = effective_gibbs(H, sd, x)
    ds = von_neumann_entropy(rho_t) - von_neumann_entropy(pair.rho)
    return ds * x / lam**2


def cmd_figure1(args) -> int:
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    if not (0 < args.min < args.max) and args.steps > 1:
        raise ConfigError("figure1 grid needs 0 < min < max")
    if args.min <= 0:
        raise ConfigError("figure1 grid needs min > 0")
    if args.exact and not (args.lam and args.lam > 0):
        raise ConfigError("--exact needs a positive --lambda")
    cutoff = args.cutoff if args.cutoff is not None else (_env_int(ENV_FOCK_CUTOFF) or 20)
    if cutoff < 2:
        raise ConfigError("--cutoff must be >= 2")
    if args.steps == 1:
        grid = np.array([args.min])
    elif args.spacing == "log":
        grid = np.geomspace(args.min, args.max, args.steps)
    else:
        grid = np.linspace(args.min, args.max, args.steps)
    header = ["beta_omega_a"] + [f"dS_{f}" for f in FIGURE1_FAMILIES]
    if args.exact:
        header += [f"dS_exact_{f}" for f in FIGURE1_FAMILIES]
    rows = []
    for x in grid:
        row = [float(x)] + [figure1_coefficient(f, float(x)) for f in FIGURE1_FAMILIES]
        if args.exact:
            for fam in FIGURE1_FAMILIES:
                if fam != "two_tls" and x < FIGURE1_EXACT_MIN:
                    row.append(float("nan"))
                else:
                    row.append(figure1_exact_value(fam, float(x), args.lam, cutoff))
        rows.append(row)
    comments = [
        f"effgibbs {__version__} figure1: resonance variant, beta*|g| = 1",
        "columns dS_*: closed-form lambda^2 coefficient of the information loss in units of "
        "lambda^2*beta*|g|^2/omega_a, i.e. dS*omega_a/(lambda^2*beta*|g|^2)",
        f"grid: {args.steps} points, {args.spacing} spacing, beta*omega_a in [{args.min!r}, {args.max!r}] (artifact choice)",
    ]
    if args.exact:
        comments.append(
            f"columns dS_exact_*: exact pipeline at lambda={args.lam!r}, omega_a=1, Fock cutoff {cutoff}, "
            f"same normalization; oscillator families left as nan below beta*omega_a={FIGURE1_EXACT_MIN}"
        )
    text = write_csv(header, rows, comments)
    _emit(text, args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in SUITES + ("all",):
        raise ConfigError(f"unknown suite {args.suite!r}")
    _set_second_order_corruption(bool(args.corrupt_second_order))
    try:
        checks = run_suite(args.suite, args.seed)
    finally:
        _set_second_order_corruption(False)
    failed = [c for c in checks if not c.passed]
    doc = {
        "metadata": _metadata(None, args.seed, {"suite": args.suite}),
        "passed": not failed,
        "n_checks": len(checks),
        "n_failed": len(failed),
        "checks": [c.to_dict() for c in checks],
    }
    _emit(dumps(doc), args.output)
    for c in failed:
        print(f"FAILED {c.name}: deviation {c.deviation:.3e} > tolerance {c.tolerance:.1e}", file=sys.stderr)
    return EXIT_VERIFY if failed else EXIT_OK


# --------------------------------------------------------------------------- parser


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", help="ModelSpec JSON file")
    g.add_argument("--family", choices=FAMILIES, help="model family (default two_tls)")
    g.add_argument("--omega-a", type=float, dest="omega_a")
    g.add_argument("--omega-b", type=float, dest="omega_b")
    g.add_argument("--g", help="coupling as RE or RE,IM")
    g.add_argument("--delta-omega", type=float, dest="delta_omega")
    g.add_argument("--resonant", action="store_true")
    g.add_argument("--lambda", type=float, dest="lam")
    g.add_argument("--cutoff", type=int, help=f"Fock cutoff (env {ENV_FOCK_CUTOFF})")
    t = p.add_argument_group("numerics")
    t.add_argument("--order", type=int, default=2, help="perturbative order (default 2)")
    t.add_argument("--cluster-tol", type=float, dest="cluster_tol", help=f"eigenvalue clustering (env {ENV_CLUSTER_TOL})")
    t.add_argument("--freq-tol", type=float, dest="freq_tol", help=f"Bohr frequency matching (env {ENV_FREQ_TOL})")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--output", "-o")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="effgibbs", description="Pinched Gibbs states, effective Hamiltonians and information loss.")
    parser.add_argument("--version", action="version", version=f"effgibbs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("report", help="thermodynamic report at one beta")
    _add_model_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="thermodynamic quantities over a beta grid")
    _add_model_args(p)
    p.add_argument("--beta-min", type=float, required=True)
    p.add_argument("--beta-max", type=float, required=True)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--spacing", choices=("linear", "log"), default="linear")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figure1", help="resonance information loss of the three families versus beta*omega_a")
    p.add_argument("--min", type=float, default=0.2)
    p.add_argument("--max", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--spacing", choices=("linear", "log"), default="log")
    p.add_argument("--exact", action="store_true", help="add exact-pipeline columns")
    p.add_argument("--lambda", type=float, dest="lam", default=0.05)
    p.add_argument("--cutoff", type=int)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("verify", help="run self-verification suites")
    p.add_argument("--suite", default="all", choices=SUITES + ("all",))
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--output", "-o")
    p.add_argument("--corrupt-second-order", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"effgibbs: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EffGibbsError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"effgibbs: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"effgibbs: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
