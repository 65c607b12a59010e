"""Command-line front end.

    monret exact        --config cfg.json --out DIR
    monret sample       --config cfg.json --out DIR --seed 7 --threads 4
    monret trajectory   --config cfg.json --out DIR
    monret fluctuations --config cfg.json --out DIR
    monret verify       --config cfg.json [--out DIR]

Exit codes: 0 success, 2 invalid config, 3 resonance, 4 numerical-health
failure (including a failed ``verify``).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import analysis, output, superoperator as so, two_level_oracle as oracle, winding
from .config import ExperimentConfig, load_config
from .errors import ConfigError, NumericalHealthError, ResonanceError, UndefinedWindingError
from .trajectory import CSV_COLUMNS, amplitudes_for, default_threads, sample_first_detections

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESONANCE = 3
EXIT_HEALTH = 4

VERIFY_TOL = 1e-8
VERIFY_TAIL_TOL = 1e-9


def _grid(n):
    return 2 * np.pi * np.arange(n) / n


def _header(cfg: ExperimentConfig) -> dict:
    out = {"command": cfg.command}
    if cfg.model is not None:
        out["model"] = cfg.model.to_dict()
        out["dist"] = cfg.dist.to_dict()
    if cfg.seed is not None:
        out["seed"] = cfg.seed
        out["seed_defaulted"] = cfg.seed_defaulted
    return out


def run_exact(cfg: ExperimentConfig, threads: int) -> tuple[dict, str, bool]:
    report = analysis.exact_report(cfg.model, cfg.dist, cfg.m_max)
    rows = []
    for w in _grid(cfg.omega_points):
        f = analysis.generating_F(cfg.model, cfg.dist, w)
        ft = analysis.generating_F_tau(cfg.model, cfg.dist, w)
        rows.append((w, f.real, f.imag, ft.real, ft.imag))
    files = {
        "report.json": output.render_json({**_header(cfg), "report": report.to_dict()}),
        "sweep.csv": output.render_csv(("omega", "re_F", "im_F", "re_Ftau", "im_Ftau"), rows),
    }
    return files, f"mean_k={report.mean_k:.12g} mean_t={report.mean_t:.12g} N={cfg.model.n}", True


def run_sample(cfg: ExperimentConfig, threads: int) -> tuple[dict, str, bool]:
    batch = sample_first_detections(cfg.model, cfg.dist, cfg.samples, cfg.seed,
                                    cfg.k_max, threads)
    report = analysis.monte_carlo_report(batch, cfg.m_max)
    ks, counts = np.unique(batch.k[~batch.censored], return_counts=True)
    rows = [(k, c, c / len(batch)) for k, c in zip(ks, counts)]
    n_cens = int(batch.censored.sum())
    files = {
        "histogram.csv": output.render_csv(
            ("k", "count", "fraction"), rows, seed=cfg.seed,
            comments=(f"samples={len(batch)} censored={n_cens} k_max={cfg.k_max}",)),
        "report.json": output.render_json(
            {**_header(cfg), "samples": cfg.samples, "k_max": cfg.k_max,
             "report": report.to_dict()}),
    }
    summary = (f"mean_k={report.mean_k:.6g}+-{report.stderr_k[1]:.2g} "
               f"mean_t={report.mean_t:.6g}+-{report.stderr_t[1]:.2g} censored={n_cens}")
    return files, summary, True


def _winding_or_reason(fn, *args):
    try:
        return fn(*args).value
    except UndefinedWindingError as exc:
        return f"undefined: {exc}"


def run_trajectory(cfg: ExperimentConfig, threads: int) -> tuple[dict, str, bool]:
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.realizations)
    files, rows = {}, []
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        taus = np.asarray(cfg.dist.sample(rng, cfg.steps), dtype=float)
        tr = amplitudes_for(cfg.model, taus)
        try:
            res = winding.trajectory_winding(tr.amplitudes, cfg.winding_points)
            n_grid, unwrap, min_abs = res.diagnostics["points"], res.value, res.diagnostics["min_abs"]
        except UndefinedWindingError as exc:
            n_grid, unwrap, min_abs = cfg.winding_points, f"undefined: {exc}", float("nan")
        poly = _winding_or_reason(winding.winding_poly, tr.amplitudes)
        rows.append((r, unwrap, poly, min_abs))
        omega = _grid(n_grid)
        phi = winding.truncated_ft(tr.amplitudes, omega)
        files[f"curve_{r:03d}.csv"] = output.render_csv(
            ("omega", "re_phi", "im_phi"), zip(omega, phi.real, phi.imag), seed=cfg.seed,
            comments=(f"realization={r}",))
        files[f"steps_{r:03d}.csv"] = output.render_csv(
            CSV_COLUMNS, tr.rows(), seed=cfg.seed, comments=(f"realization={r}",))
    files["windings.csv"] = output.render_csv(
        ("realization", "winding_unwrap", "winding_poly", "min_abs_phi"), rows, seed=cfg.seed)
    return files, "windings: " + " ".join(str(row[1]) for row in rows), True


def run_fluctuations(cfg: ExperimentConfig, threads: int) -> tuple[dict, str, bool]:
    rows = oracle.fluctuation_curves(cfg.j_grid, cfg.tau)
    files = {"fluctuations.csv": output.render_csv(
        oracle.CURVE_COLUMNS, rows, comments=(f"tau={output.fmt(cfg.tau)}",))}
    return files, f"{len(rows)} grid points", True


def verify_rows(model, dist):
    """Residual table ``(check, residual, tolerance, passed)``."""
    s = analysis.checked_set(model, dist)
    ident = so.verify_identities(s)
    norm = analysis.avg_norm_check(model, dist, tail_tol=VERIFY_TAIL_TOL)
    checks = [
        ("row_identity", ident.row_identity),
        ("sequence", ident.sequence),
        ("normalization", norm.max_deviation),
        ("F(0)", abs(analysis.generating_F(model, dist, 0.0, s=s) - 1.0)),
        ("F_tau(0)", abs(analysis.generating_F_tau(model, dist, 0.0) - 1.0)),
        ("mean_k-N", abs(analysis.mean_k(model, dist, s=s) - model.n)),
    ]
    return [(name, float(res), VERIFY_TOL, bool(res <= VERIFY_TOL)) for name, res in checks]


def run_verify(cfg: ExperimentConfig, threads: int) -> tuple[dict, str, bool]:
    rows = verify_rows(cfg.model, cfg.dist)
    files = {"verify.csv": output.render_csv(("check", "residual", "tolerance", "passed"), rows)}
    width = max(len(r[0]) for r in rows)
    lines = [f"{name:<{width}}  {res:.3e}  {'ok' if ok else 'FAIL'}" for name, res, _, ok in rows]
    return files, "\n".join(lines), all(r[3] for r in rows)


COMMANDS = {
    "exact": run_exact,
    "sample": run_sample,
    "trajectory": run_trajectory,
    "fluctuations": run_fluctuations,
    "verify": run_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="monret", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", default=None, help="output directory (default: none for verify, ./out otherwise)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed, overrides the config")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $MONRET_THREADS or all cores)")
    p.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    return p


def run(command: str, cfg: ExperimentConfig, out_dir, threads: int | None = None) -> tuple[int, str]:
    """Run one command and write its artifacts; return ``(exit_code, message)``."""
    threads = threads or default_threads()
    files, summary, ok = COMMANDS[command](cfg, threads)
    if out_dir is not None:
        output.write_all(out_dir, files)
    return (EXIT_OK if ok else EXIT_HEALTH), summary


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out if args.out is not None else (None if args.command == "verify" else "out")
    try:
        cfg = load_config(args.config, args.command, args.seed)
        code, summary = run(args.command, cfg, out_dir, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResonanceError as exc:
        cond = "" if exc.condition is None else f" (condition ~ {exc.condition:.3g})"
        print(f"resonance: {exc}{cond}", file=sys.stderr)
        return EXIT_RESONANCE
    except (NumericalHealthError, UndefinedWindingError) as exc:
        print(f"numerical health failure: {exc}", file=sys.stderr)
        return EXIT_HEALTH
    if not args.quiet or code != EXIT_OK:
        print(summary, file=sys.stdout if code == EXIT_OK else sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
