"""Command-line entry point: ``prob``, ``bench`` and ``sim``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import SamplerConfig, bernoulli, linear, oracle, random_sampling
from .errors import ConfigError, ConnProbError, NumericError
from .gaussian import Gaussian2, relative_displacement
from .harness import BenchConfig, MetricsReport, aggregate, cpp_benchmark, load_scenario, run_trials
from .series import DEFAULT_DELTA_F, Method, apse

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
OUTPUT_ENV = "CONNPROB_OUTPUT_DIR"
STEP_COLUMNS = ["method", "trial", "step", "truth_x", "truth_y", "est_x", "est_y", "trace_L", "trace_F", "edges", "relay"]
SUMMARY_COLUMNS = [f.name for f in fields(MetricsReport) if f.name != "trials"]

log = logging.getLogger("connprob")


def _cov(values) -> np.ndarray:
    a, b, c = values
    return np.array([[a, b], [b, c]], dtype=float)


def cmd_prob(args) -> dict:
    g1 = Gaussian2(args.mean1, _cov(args.cov1))
    g2 = Gaussian2(args.mean2, _cov(args.cov2))
    cross = None if args.cross is None else np.asarray(args.cross, dtype=float).reshape(2, 2)
    d = relative_displacement(g1, g2, cross)
    method = Method(args.method)
    if method is Method.APSE:
        res = apse(d, args.rho, args.delta_f)
    elif method is Method.BERNOULLI:
        res = bernoulli(d, args.rho)
    elif method is Method.LINEAR:
        res = linear(d, args.rho)
    elif method is Method.RANDOM:
        res = random_sampling(d, args.rho, SamplerConfig(args.dim, args.seed))
    else:
        res = oracle(d, args.rho, seed=args.seed)
    record = res.as_record()
    print(json.dumps(record))
    return record


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_meta(out: Path, command: str, config: dict) -> None:
    meta = {
        "command": command,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")


def cmd_bench(args) -> Path:
    cfg = BenchConfig.from_scenario_file(args.config, trials=args.trials, base_seed=args.seed, delta_f=args.delta_f)
    out = _out_dir(args)
    res = cpp_benchmark(cfg, log_fn=lambda k: log.info("bench trial %d/%d done", k + 1, cfg.trials))
    _write_csv(out / "rmse.csv", ["trial", "method", "rmse"], [(t, m, repr(v)) for t, m, v in res.rmse])
    _write_csv(
        out / "runtime.csv",
        ["trial", "method", "mean_runtime_seconds"],
        [(t, m, repr(v)) for t, m, v in res.runtime],
    )
    _write_meta(out, "bench", asdict(cfg))
    return out


def cmd_sim(args) -> Path:
    base = load_scenario(args.scenario, trials=args.trials, base_seed=args.seed, delta_f=args.delta_f)
    if base.kind == "bench":
        raise ConfigError(f"{args.scenario} is a benchmark config; use the bench command")
    methods = args.method or [base.method]
    if methods == ["all"]:
        methods = [m.value for m in (Method.BERNOULLI, Method.LINEAR, Method.RANDOM, Method.APSE)]
    out = _out_dir(args)
    step_rows, summary_rows = [], []
    for m in methods:
        s = base.with_method(m)
        logs = run_trials(s, jobs=args.jobs)
        for k, lg in enumerate(logs):
            for r in lg.records:
                step_rows.append(
                    (s.method, k, r.step, *map(repr, r.truth), *map(repr, r.estimate),
                     repr(r.trace_leader), repr(r.trace_follower), r.edges, int(r.relay))
                )
        rep = aggregate(logs)
        summary_rows.append([rep.method] + [repr(getattr(rep, c)) for c in SUMMARY_COLUMNS[1:]])
        log.info("%s: %d trials done", s.method, len(logs))
    _write_csv(out / "steps.csv", STEP_COLUMNS, step_rows)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows)
    _write_meta(out, "sim", {**asdict(base), "methods": methods})
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="connprob", description="Connection probability of uncertain nodes under a disk model.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("prob", help="probability that two uncertain nodes are within rho")
    pr.add_argument("--mean1", type=float, nargs=2, required=True)
    pr.add_argument("--cov1", type=float, nargs=3, required=True, metavar=("XX", "XY", "YY"))
    pr.add_argument("--mean2", type=float, nargs=2, default=[0.0, 0.0])
    pr.add_argument("--cov2", type=float, nargs=3, default=[0.0, 0.0, 0.0], metavar=("XX", "XY", "YY"))
    pr.add_argument("--cross", type=float, nargs=4, default=None, help="cross-covariance, row-major")
    pr.add_argument("--rho", type=float, required=True)
    pr.add_argument("--method", choices=[m.value for m in Method], default="apse")
    pr.add_argument("--delta-f", type=float, default=DEFAULT_DELTA_F)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--dim", type=int, default=10_000)
    pr.set_defaults(func=cmd_prob)

    be = sub.add_parser("bench", help="accuracy and runtime of every predictor against the sampling oracle")
    be.add_argument("config")
    be.add_argument("--trials", type=int)
    be.add_argument("--seed", type=int)
    be.add_argument("--delta-f", type=float)
    be.add_argument("--out")
    be.set_defaults(func=cmd_bench)

    si = sub.add_parser("sim", help="closed-loop planning trials")
    si.add_argument("scenario")
    si.add_argument("--method", action="append", choices=[m.value for m in Method] + ["all"])
    si.add_argument("--trials", type=int)
    si.add_argument("--seed", type=int)
    si.add_argument("--delta-f", type=float)
    si.add_argument("--jobs", type=int, default=1)
    si.add_argument("--out")
    si.set_defaults(func=cmd_sim)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc, NumericError) else EXIT_CONFIG
    except OSError as exc:
        print(f"IOError: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConnProbError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
