"""Command-line interface.

Subcommands:
  run      one policy, one seed, one report
  compare  all four policies on the identical workload
  sweep    one config key across several values, per policy
  bench    time the compiled kernel against the pure-Python one

Reports land in --out (or $VODSIM_OUT, default ./out) as report.json and
report.csv. Output bytes depend only on (config, seed): comment lines echo
the invocation, never the wall clock.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from multiprocessing import Pool
from pathlib import Path

from . import bench as bench_mod
from .config import (
    POLICY_NAMES,
    SimConfig,
    apply_override,
    config_from_dict,
    config_to_dict,
    load_config,
)
from .engine import run as run_sim
from .metrics import MetricsReport, reports_to_csv, reports_to_json
from .workload import ConfigError

_SUMMARY_COLS = (
    ("policy", "policy"),
    ("seed", "seed"),
    ("offered", "offered"),
    ("admitted", "admitted"),
    ("rejected", "rejected"),
    ("streamed", "videos_streamed"),
    ("disk_util", "disk_utilization"),
    ("hit_ratio", "cache_hit_ratio"),
    ("violations", "violations"),
)


def _summary_table(reports: list[MetricsReport]) -> str:
    rows = [[label for label, _ in _SUMMARY_COLS]]
    for r in reports:
        d = r.to_dict()
        row = []
        for _, key in _SUMMARY_COLS:
            v = d[key]
            row.append(format(v, ".4g") if isinstance(v, float) else str(v))
        rows.append(row)
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = [
        "  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row))
        for row in rows
    ]
    return "\n".join(lines)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("VODSIM_OUT") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _base_config(args) -> SimConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = SimConfig()
        cfg.validate()
    data = config_to_dict(cfg)
    if args.seed is not None:
        data["seed"] = args.seed
    if getattr(args, "policy", None):
        data["policy"] = args.policy
    return config_from_dict(data)


def _run_job(job) -> dict:
    data, backend = job
    cfg = config_from_dict(data)
    return run_sim(cfg, backend=backend).to_dict()


def _run_grid(jobs, parallel: int) -> list[MetricsReport]:
    if parallel > 1 and len(jobs) > 1:
        with Pool(parallel) as pool:
            dicts = pool.map(_run_job, jobs)
    else:
        dicts = [_run_job(j) for j in jobs]
    return [MetricsReport(**d) for d in dicts]


def _write_reports(out: Path, reports: list[MetricsReport], comment: str) -> None:
    (out / "report.json").write_text(reports_to_json(reports) + "\n")
    (out / "report.csv").write_text(reports_to_csv(reports, comment))


def cmd_run(args) -> int:
    cfg = _base_config(args)
    report = run_sim(cfg, backend=args.backend)
    out = _out_dir(args)
    _write_reports(
        out, [report], f"vodsim run policy={cfg.policy} seed={cfg.seed}"
    )
    print(_summary_table([report]))
    print(f"wrote {out / 'report.json'} and {out / 'report.csv'}")
    return 0


def cmd_compare(args) -> int:
    cfg = _base_config(args)
    data = config_to_dict(cfg)
    jobs = []
    for policy in POLICY_NAMES:
        d = json.loads(json.dumps(data))
        d["policy"] = policy
        jobs.append((d, args.backend))
    reports = _run_grid(jobs, args.parallel)
    out = _out_dir(args)
    _write_reports(out, reports, f"vodsim compare seed={cfg.seed}")
    print(_summary_table(reports))
    print(f"wrote {out / 'report.json'} and {out / 'report.csv'}")
    return 0


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def cmd_sweep(args) -> int:
    cfg = _base_config(args)
    data = config_to_dict(cfg)
    values = [_parse_value(v) for v in args.values.split(",")]
    policies = args.policies.split(",") if args.policies else list(POLICY_NAMES)
    for p in policies:
        if p not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {p!r}")
    jobs = []
    for value in values:
        for policy in policies:
            d = json.loads(json.dumps(data))
            apply_override(d, args.param, value)
            d["policy"] = policy
            config_from_dict(d)  # validate early, before the grid runs
            jobs.append((d, args.backend))
    reports = _run_grid(jobs, args.parallel)
    out = _out_dir(args)
    _write_reports(
        out, reports,
        f"vodsim sweep param={args.param} values={args.values}",
    )
    print(_summary_table(reports))
    print(f"wrote {out / 'report.json'} and {out / 'report.csv'}")
    return 0


def cmd_bench(args) -> int:
    return bench_mod.main(duration_s=args.duration, seed=args.seed or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vodsim",
        description="Multicast video-on-demand admission-control simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, policy_flag=True):
        p.add_argument("--config", help="JSON config file (empty file = defaults)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (default $VODSIM_OUT or ./out)")
        p.add_argument(
            "--backend", choices=("auto", "pure", "compiled"), default="auto",
            help="kernel implementation to use",
        )
        p.add_argument(
            "--parallel", type=int, default=1,
            help="worker processes for multi-run commands",
        )
        if policy_flag:
            p.add_argument("--policy", choices=POLICY_NAMES)

    p_run = sub.add_parser("run", help="single simulation run")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="all policies on one workload")
    common(p_cmp, policy_flag=False)
    p_cmp.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="vary one config key")
    common(p_sweep, policy_flag=False)
    p_sweep.add_argument(
        "--param", required=True,
        help="dotted config key, e.g. workload.mean_interarrival_s",
    )
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated values for --param"
    )
    p_sweep.add_argument(
        "--policies", help="comma-separated policy subset (default: all)"
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_bench = sub.add_parser("bench", help="compare kernel backends")
    p_bench.add_argument("--duration", type=float, default=1800.0)
    p_bench.add_argument("--seed", type=int)
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
