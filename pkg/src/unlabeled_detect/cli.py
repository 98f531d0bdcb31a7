"""Command-line front end: ``unlabeled-detect <command> [flags]``.

Exit status is 0 on success, 2 on usage or configuration errors and 3 on
numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path as FsPath

import numpy as np

from .detectors import SOLVERS, glrt, ulr
from .errors import ConfigurationError, DomainError, RefusalError, SolverError
from .experiments import EXPERIMENTS, ExperimentConfig, build_experiment
from .exponents import UnlabeledExponent, exponent_curve
from .montecarlo import DETECTORS, ThresholdRule, bench, empirical_exponents, roc_curves
from .probability import TypeVector, type_vector
from .trellis import build_loglik

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
SEED_ENV = "UNLABELED_DETECT_SEED"
DEFAULT_N_LIST = (50, 100, 250, 500)

log = logging.getLogger("unlabeled_detect")


def _csv_list(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("experiment")
    g.add_argument("--config", help="JSON file with experiment settings; flags override it")
    g.add_argument("--experiment", choices=EXPERIMENTS)
    g.add_argument("--model", help="JSON model file (implies --experiment custom)")
    g.add_argument("--m", type=int, help="alphabet size")
    g.add_argument("--n", type=int, help="sample size")
    g.add_argument("--delta", type=float, help="exp2 concentration parameter")
    g.add_argument("--runs", type=int, help="Monte Carlo runs per hypothesis")
    g.add_argument("--seed", type=int, help=f"master seed (fallback: ${SEED_ENV}, then 0)")
    g.add_argument("--detectors", type=_csv_list, help=f"comma list from {','.join(DETECTORS)}")
    g.add_argument("--out", help="output directory")
    g.add_argument("--threads", type=int, help="worker processes (default: all cores); results do not depend on it")
    g.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script next to the CSV")
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="unlabeled-detect", description="Detection from unlabeled data.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("roc", parents=[common], help="empirical ROC curves, one CSV per detector")

    p = sub.add_parser("exponent-curve", parents=[common], help="Omega, Omega_lab and the iid bound on an alpha grid")
    p.add_argument("--points", type=int, default=200, help="grid size")

    p = sub.add_parser("empirical-exponents", parents=[common], help="-log(error)/n pairs for several n")
    p.add_argument("--n-list", type=_int_list, default=list(DEFAULT_N_LIST))
    p.add_argument("--rule", choices=("exponent", "type1"), default="exponent")
    p.add_argument("--rule-value", type=float,
                   help="type-I exponent (default: half the zero crossing of Omega) or type-I probability")

    p = sub.add_parser("bench", parents=[common], help="median runtime per detector, normalized to ULR")
    p.add_argument("--reps", type=int, default=200)

    p = sub.add_parser("detect", parents=[common], help="single-shot GLRT and ULR on one type vector, JSON out")
    obs = p.add_mutually_exclusive_group(required=True)
    obs.add_argument("--type", dest="type_counts", type=_int_list, help="type vector counts, e.g. 2,1,2")
    obs.add_argument("--x", type=_int_list, help="observations as 1-based symbols")
    p.add_argument("--solver", choices=SOLVERS, default="detB")
    return parser


def resolve_config(args: argparse.Namespace, env=os.environ) -> ExperimentConfig:
    """Defaults < config file < flags; the seed falls back to the environment."""
    settings: dict = {}
    if args.config:
        try:
            settings = json.loads(FsPath(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}", field="config") from None
        if "model" in settings:
            settings["model_path"] = settings.pop("model")
        if "out" in settings:
            settings["output_dir"] = settings.pop("out")
        known = {f.name for f in fields(ExperimentConfig)}
        unknown = sorted(set(settings) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys {unknown}", field="config")
    flags = {
        "experiment": args.experiment, "m": args.m, "n": args.n, "delta": args.delta,
        "runs": args.runs, "seed": args.seed, "detectors": args.detectors,
        "output_dir": args.out, "model_path": args.model,
    }
    settings.update({k: v for k, v in flags.items() if v is not None})
    if args.model and args.experiment is None:
        settings["experiment"] = "custom"
    if "seed" not in settings:
        raw = env.get(SEED_ENV)
        if raw is not None:
            try:
                settings["seed"] = int(raw)
            except ValueError:
                raise ConfigurationError(f"{SEED_ENV} must be an integer, got {raw!r}", field="seed") from None
    if settings.get("experiment") == "worked":
        settings.setdefault("n", 5)
        settings.setdefault("m", 3)
    return ExperimentConfig(**settings)


def _metadata(cfg: ExperimentConfig, m: int, **extra) -> dict:
    meta = {"seed": cfg.seed, "runs": cfg.runs, "n": cfg.n, "m": m, "config_hash": cfg.digest()}
    meta.update(extra)
    meta["config"] = json.dumps(cfg.provenance(), sort_keys=True)
    return meta


def _write(path: FsPath, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def _gnuplot(path: FsPath, files: list[FsPath], x: int, y: int, logscale: str, xlabel: str, ylabel: str) -> None:
    plots = ", \\\n     ".join(f"'{f.name}' using {x}:{y} with lines title '{f.stem}'" for f in files)
    lines = ["set datafile separator ','"]
    if logscale:
        lines.append(f"set logscale {logscale}")
    lines += [f"set xlabel '{xlabel}'", f"set ylabel '{ylabel}'", f"plot {plots}", ""]
    _write(path, "\n".join(lines))


def cmd_roc(cfg: ExperimentConfig, args) -> int:
    model = build_experiment(cfg)
    curves = roc_curves(model, cfg.n, cfg.detectors, cfg.runs, cfg.seed, args.threads)
    out = FsPath(cfg.output_dir)
    files = []
    rows = []
    for d, curve in curves.items():
        f = out / f"roc_{cfg.experiment}_{d}.csv"
        _write(f, curve.to_csv(_metadata(cfg, model.m, detector=d, degenerate=curve.degenerate)))
        files.append(f)
        i = curve.nearest(0.1)
        rows.append((d, curve.type1[i], curve.type2[i], curve.type2_ci[0][i], curve.type2_ci[1][i]))
    print(f"{'detector':<10} {'type1':>8} {'type2':>10}  95% CI")
    for d, a, b, lo, hi in rows:
        print(f"{d:<10} {a:8.4f} {b:10.6f}  [{lo:.6f}, {hi:.6f}]")
    if args.gnuplot:
        _gnuplot(out / f"roc_{cfg.experiment}.gp", files, 2, 3, "xy", "type I error", "type II error")
    return EXIT_OK


def cmd_exponent_curve(cfg: ExperimentConfig, args) -> int:
    model = build_experiment(cfg)
    solver = UnlabeledExponent(model)
    grid = np.geomspace(solver.alpha_star / 1000, 1.2 * solver.alpha_star, args.points)
    curve = exponent_curve(model, grid)
    meta = _metadata(cfg, model.m, omega_zero=f"{curve.omega_zero:.12g}", alpha_star=f"{curve.alpha_star:.12g}")
    meta.pop("runs")
    f = FsPath(cfg.output_dir) / f"exponent_curve_{cfg.experiment}.csv"
    _write(f, "".join(f"# {k}: {v}\n" for k, v in meta.items()) + curve.to_csv())
    print(f"Omega(0) = {curve.omega_zero:.8g}   zero crossing alpha* = {curve.alpha_star:.8g}")
    if args.gnuplot:
        script = (
            "set datafile separator ','\nset xlabel 'alpha'\nset ylabel 'Omega'\n"
            f"plot '{f.name}' using 1:2 with lines title 'unlabeled', "
            f"'' using 1:3 with lines title 'labeled', '' using 1:4 with lines title 'iid bound'\n"
        )
        _write(f.with_suffix(".gp"), script)
    return EXIT_OK


def cmd_empirical_exponents(cfg: ExperimentConfig, args) -> int:
    model = build_experiment(cfg)
    for n in args.n_list:
        model.check_n(n)
    solver = UnlabeledExponent(model)
    value = args.rule_value if args.rule_value is not None else (
        solver.alpha_star / 2 if args.rule == "exponent" else 0.1
    )
    rule = ThresholdRule(args.rule, value)
    res = empirical_exponents(model, args.n_list, list(cfg.detectors), rule, cfg.runs, cfg.seed, args.threads)
    buf = io.StringIO()
    meta = _metadata(cfg, model.m, n_list=",".join(map(str, args.n_list)), threshold_rule=rule.describe())
    meta.pop("n")
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["detector", "n", "alpha_hat", "beta_hat", "omega_at_alpha_hat",
                "type1", "type2", "false_alarms", "misses", "threshold"])
    for d, pts in res.items():
        for e in pts:
            w.writerow([d, e.n, f"{e.alpha:.12g}", f"{e.beta:.12g}", f"{solver(e.alpha):.12g}",
                        f"{e.type1:.12g}", f"{e.type2:.12g}", e.false_alarms, e.misses, f"{e.threshold:.12g}"])
            print(f"{d:<10} n={e.n:<5} alpha={e.alpha:.5f} beta={e.beta:.5f} Omega(alpha)={solver(e.alpha):.5f}")
    f = FsPath(cfg.output_dir) / f"empirical_exponents_{cfg.experiment}.csv"
    _write(f, buf.getvalue())
    return EXIT_OK


def cmd_bench(cfg: ExperimentConfig, args) -> int:
    model = build_experiment(cfg)
    table = bench(model, cfg.n, cfg.detectors, args.reps, cfg.seed)
    norm = table.normalized()
    print(f"{'detector':<10} {'H0':>10} {'H1':>10}   (median time / ULR median)")
    for d in table.medians:
        print(f"{d:<10} {norm[d][0]:10.2f} {norm[d][1]:10.2f}")
    meta = _metadata(cfg, model.m, reps=args.reps)
    meta.pop("runs")
    _write(FsPath(cfg.output_dir) / f"bench_{cfg.experiment}.csv", table.to_csv(meta))
    return EXIT_OK


def cmd_detect(cfg: ExperimentConfig, args) -> int:
    model = build_experiment(cfg)
    if args.x is not None:
        t = type_vector(args.x, model.m)
    else:
        t = TypeVector(args.type_counts)
    if t.m != model.m:
        raise DomainError(f"type has {t.m} entries, model alphabet has {model.m}")
    if t.n != cfg.n:
        cfg = cfg.with_n(t.n)
        model = build_experiment(cfg)
    u, v = build_loglik(model, 1, t.n), build_loglik(model, 0, t.n)
    p_bar, q_bar = model.averages()
    out = {
        "experiment": cfg.experiment,
        "type": t.counts.tolist(),
        "solver": args.solver,
        "glrt": glrt(t, u, v, args.solver).to_dict(),
        "ulr": ulr(t, p_bar, q_bar).statistic,
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


COMMANDS = {
    "roc": cmd_roc,
    "exponent-curve": cmd_exponent_curve,
    "empirical-exponents": cmd_empirical_exponents,
    "bench": cmd_bench,
    "detect": cmd_detect,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigurationError, DomainError, RefusalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"numerical failure: {exc} {getattr(exc, 'diagnostics', '')}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
