"""Command-line runner: ``silt-lab <subcommand> [--config FILE] [flags]``.

Each run writes ``summary.json`` (sorted keys, floats with 17 significant
digits) and, when per-replica values exist, ``replicas.csv`` into ``--out``.
Without ``--out`` the summary is printed to stdout.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import experiments as ex
from .errors import ConfigError, ConvergenceError, DomainError, ParameterError
from .isomorphism import TestFunctional, lhs_estimate, rhs_estimate
from .mc import MCEstimate
from .torus_green import build_kernel, green_infinite
from .variational import rho1, rho2, sobolev_constant

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

SUBCOMMANDS = {
    "tail": "tail",
    "confine": "confinement",
    "expmoment": "exp_moment",
    "iso": "isomorphism",
    "rho": "variational",
    "sobolev": "sobolev",
    "green": "green_convergence",
}

# critical preset with b_T = T^(1/2) and T = R^d: lam = alpha R^(-d/2)
GREEN_RADII = (8, 16, 32, 64, 128)


# ---------------------------------------------------------------- output

def _fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        items = sorted((str(k), v) for k, v in x.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {_fmt(v)}" for k, v in items) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps(obj: dict) -> str:
    """JSON with sorted keys and every float written with 17 significant digits."""
    return _fmt(obj) + "\n"


def _write(out: str | None, summary: dict, replicas=None, table: list[dict] | None = None):
    if out is None:
        sys.stdout.write(dumps(summary))
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / "summary.json").write_text(dumps(summary))
    if replicas is not None:
        with open(d / "replicas.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replica_index", "value"])
            for i, v in enumerate(np.asarray(replicas, dtype=float)):
                w.writerow([i, format(float(v), ".17g")])
    if table:
        cols = list(table[0])
        with open(d / "table.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in table:
                w.writerow([format(float(row[c]), ".17g") if isinstance(row[c], float) else row[c]
                            for c in cols])


# ---------------------------------------------------------------- experiments

def _need(cfg: ex.ExperimentConfig, *names):
    for nm in names:
        if getattr(cfg, nm) is None:
            raise ConfigError(f"experiment {cfg.kind!r} needs {nm!r}")


def _estimate_block(est: MCEstimate) -> dict:
    return {"estimate": est.mean, "stderr": est.stderr, "n": est.n, **est.params}


def _run_tail(cfg):
    _need(cfg, "T", "b_T")
    if isinstance(cfg.b_T, (list, tuple)):
        ests = ex.tail_curve(cfg.d, cfg.q, cfg.T, list(cfg.b_T), cfg.n, cfg.seed)
        table = [{"b_T": e.params["b_T"], "estimate": e.mean, "stderr": e.stderr,
                  "count": e.params["count"], "upper95": e.params["upper95"],
                  "log_rate": e.params["log_rate"] if e.params["log_rate"] is not None else float("nan")}
                 for e in ests]
        return {"rows": [_estimate_block(e) for e in ests]}, None, table
    hits = ex.tail_indicators(cfg.d, cfg.q, cfg.T, cfg.b_T, cfg.n, cfg.seed)
    est = ex.frequency_estimate(hits, cfg.seed, cfg.b_T, estimator="naive", d=cfg.d, q=cfg.q, T=cfg.T)
    return _estimate_block(est), hits.astype(float), None


def _run_confinement(cfg):
    _need(cfg, "T", "b_T", "box_L")
    est, hits = ex.confinement_run(cfg.d, cfg.q, cfg.T, cfg.b_T, cfg.box_L, cfg.n, cfg.seed)
    return _estimate_block(est), hits.astype(float), None


def _run_exp_moment(cfg):
    _need(cfg, "T")
    vals = ex.exp_moment_values(cfg.d, cfg.q, cfg.T, cfg.theta, cfg.n, cfg.seed)
    est = ex.summarize_exp_moment(vals, cfg.seed, d=cfg.d, q=cfg.q, T=cfg.T, theta=cfg.theta)
    return _estimate_block(est), vals, None


def _run_isomorphism(cfg):
    res = cfg.resolve()
    d, R, lam = cfg.d, res["R"], res["lam"]
    F = TestFunctional.exponential(d, R, cfg.a)
    lhs = lhs_estimate(F, d, R, lam, cfg.s, cfg.n, cfg.seed)
    rhs = rhs_estimate(F, d, R, lam, cfg.s, cfg.n, cfg.seed)
    out = {"R": R, "lam": lam, "s": cfg.s, "a": cfg.a, "n": cfg.n,
           "lhs": lhs.mean, "lhs_stderr": lhs.stderr, "rhs": rhs.mean, "rhs_stderr": rhs.stderr,
           "estimate": lhs.mean - rhs.mean, "stderr": math.hypot(lhs.stderr, rhs.stderr),
           "z": lhs.z_score(rhs)}
    return out, None, None


def _run_variational(cfg):
    if cfg.q is None:
        raise ConfigError("variational experiments need q (no default for d <= 2)")
    res = cfg.resolve()
    R, lam = res["R"], res["lam"]
    s1 = rho1(cfg.d, R, lam, cfg.q)
    s2 = rho2(cfg.d, R, lam, cfg.q)
    out = {"R": R, "lam": lam, "rho1": s1.value, "rho2": s2.value, "product": s1.value * s2.value,
           "rho1_residual": s1.lagrange_residual, "rho2_residual": s2.lagrange_residual,
           "rho1_iterations": s1.iterations, "rho2_iterations": s2.iterations,
           "converged": bool(s1.converged and s2.converged), "estimate": s1.value}
    if not out["converged"]:
        raise ConvergenceError(out)
    return out, None, None


def _run_sobolev(cfg):
    _need(cfg, "box_L")
    sol = sobolev_constant(cfg.d, cfg.box_L)
    out = {"box_L": cfg.box_L, "estimate": sol.value, "dual_lower": sol.info["dual_lower"],
           "residual": sol.lagrange_residual, "iterations": sol.iterations,
           "converged": bool(sol.converged)}
    if not sol.converged:
        raise ConvergenceError(out)
    return out, None, None


def green_schedule(d: int, alpha: float, radii: Sequence[int] = GREEN_RADII) -> list[tuple[int, float]]:
    """``(R, lam)`` pairs of the critical preset with ``T = R^d`` and ``b_T = T^(1/2)``."""
    return [(int(R), alpha * float(R) ** (-d / 2)) for R in radii]


def _run_green(cfg):
    if cfg.d < 3:
        raise ConfigError("green_convergence needs d >= 3")
    sched = [tuple(x) for x in cfg.schedule] if cfg.schedule else green_schedule(cfg.d, cfg.alpha)
    target, err = green_infinite(cfg.d, 1e-10)
    table = []
    for R, lam in sched:
        g = float(build_kernel(cfg.d, int(R), float(lam)).green_row.flat[0])
        table.append({"R": int(R), "lam": float(lam), "lam_Rd": float(lam) * int(R) ** cfg.d,
                      "green_value": g, "green_infinite": target, "rel_error": g / target - 1})
    vals = [r["green_value"] for r in table]
    out = {"green_infinite": target, "green_infinite_err": err, "rows": len(table),
           "estimate": vals[-1], "rel_error": table[-1]["rel_error"],
           "monotone": bool(all(b < a for a, b in zip(vals, vals[1:])))}
    return out, None, table


RUNNERS = {
    "tail": _run_tail,
    "confinement": _run_confinement,
    "exp_moment": _run_exp_moment,
    "isomorphism": _run_isomorphism,
    "variational": _run_variational,
    "sobolev": _run_sobolev,
    "green_convergence": _run_green,
}


def execute(cfg: ex.ExperimentConfig) -> int:
    t0 = time.perf_counter()
    try:
        result, replicas, table = RUNNERS[cfg.kind](cfg)
        status = EXIT_OK
    except ConvergenceError as exc:
        result = exc.args[0] if exc.args and isinstance(exc.args[0], dict) else {"error": str(exc)}
        replicas, table, status = None, None, EXIT_NUMERIC
    summary = {"kind": cfg.kind, "config": cfg.to_dict(), "seed": cfg.seed,
               "result": result, "status": status, "wall_time": time.perf_counter() - t0}
    _write(cfg.out, summary, replicas, table)
    if status == EXIT_NUMERIC:
        print(f"error: {cfg.kind} did not converge", file=sys.stderr)
    return status


def _load(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if not text.strip():
        raise ConfigError("empty configuration")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def run(config_path: str | Path, overrides: dict | None = None) -> int:
    """Run the experiment described by a JSON config file; returns the exit code."""
    try:
        raw = _load(config_path)
        raw.update(overrides or {})
        cfg = ex.ExperimentConfig.from_dict(raw)
        return execute(cfg)
    except (ConfigError, ParameterError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _floats(text: str) -> float | list[float]:
    parts = [float(p) for p in text.split(",")]
    return parts[0] if len(parts) == 1 else parts


def _R(text: str):
    return text if text == "auto" else int(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="silt-lab", description="Intersection local time experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=f"run the {kind} experiment")
        sp.add_argument("--config", help="JSON config; inline flags override its keys")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory (default: print summary)")
        sp.add_argument("--d", type=int)
        sp.add_argument("--q", type=float)
        sp.add_argument("--T", type=float)
        sp.add_argument("--b-T", dest="b_T", type=_floats, help="threshold, or a comma list for a trend table")
        sp.add_argument("--theta", type=float)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--A", type=float)
        sp.add_argument("--R", type=_R)
        sp.add_argument("--lam", type=float)
        sp.add_argument("--preset", choices=ex.PRESETS)
        sp.add_argument("--s", type=float)
        sp.add_argument("--a", type=float)
        sp.add_argument("--box-L", dest="box_L", type=int)
        sp.add_argument("--n", type=int)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    kind = SUBCOMMANDS[args.command]
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
    try:
        raw = _load(args.config) if args.config else {}
        if raw.get("kind", kind) != kind:
            raise ConfigError(f"config kind {raw['kind']!r} does not match subcommand {args.command!r}")
        raw.update(flags)
        raw["kind"] = kind
        cfg = ex.ExperimentConfig.from_dict(raw)
        return execute(cfg)
    except (ConfigError, ParameterError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
