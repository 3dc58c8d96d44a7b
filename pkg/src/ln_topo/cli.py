"""Command-line entry point.

Every subcommand accepts ``--config FILE``; explicit flags override values
from the config.  Exit codes: 0 success, 1 configuration or input error,
2 run finished with partial failures (error rows present).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigInvalid, LnTopoError
from .gossip import normalize_records, read_bolt7_binary, read_bolt7_hex, read_records, write_records
from .graph import to_undirected
from .metrics import MetricId, MetricParams, MetricSeries, compute
from .pipeline import FIGURE_IDS, PipelineConfig, emit_plot_data, load_config, run_pipeline
from .routing import CostModel, hop_statistics, simulate, write_hop_statistics_csv, write_tally_csv
from .snapshot import DEFAULT_LIVENESS_WINDOW, build_series, build_snapshot, read_snapshot, write_snapshot
from .stability import SamplerConfig, stability_series, write_stability_csv

_READERS = {"lines": read_records, "hex": read_bolt7_hex, "binary": read_bolt7_binary}
_MODELS = {"lnd": CostModel.lnd, "ecl": CostModel.ecl, "cln": CostModel.cln}


def _config_of(args) -> PipelineConfig | None:
    if getattr(args, "_config_cache", None) is None and args.config:
        args._config_cache = load_config(args.config)
    return getattr(args, "_config_cache", None)


def _records_from(args) -> tuple[str, str, bool]:
    """Resolve (records path, format, strict) from flags, then config."""
    config = _config_of(args)
    records = args.records or (str(config.records_path) if config else None)
    if not records:
        raise ConfigInvalid("--records (or --config with [ingest] records) is required")
    fmt = args.format or (config.records_format if config else "lines")
    strict = args.strict or bool(config and config.strict)
    return records, fmt, strict


def _load_records(args):
    records, fmt, strict = _records_from(args)
    result = _READERS[fmt](records, strict=strict)
    if result.skipped:
        print(f"skipped {result.skipped} malformed records", file=sys.stderr)
    return normalize_records(result.records)


def _window_from(args) -> int:
    if args.window is not None:
        return args.window
    config = _config_of(args)
    return config.liveness_window if config else DEFAULT_LIVENESS_WINDOW


def _read_schedule_file(path: str) -> list[int]:
    return [int(line.strip()) for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()]


def _schedule_from(args) -> list[int]:
    if args.schedule:
        return _read_schedule_file(args.schedule)
    config = _config_of(args)
    if config:
        return list(config.schedule)
    raise ConfigInvalid("--schedule (or --config with a [snapshots] schedule) is required")


def _cmd_ingest(args) -> int:
    write_records(_load_records(args), args.out)
    return 0


def _cmd_snapshot(args) -> int:
    snapshot = build_snapshot(_load_records(args), args.at, _window_from(args))
    write_snapshot(snapshot, args.out)
    print(f"snapshot at {args.at}: {len(snapshot.nodes)} nodes, "
          f"{len(snapshot.channels)} channels -> {args.out}")
    return 0


def _cmd_series(args) -> int:
    snapshots = build_series(_load_records(args), _schedule_from(args), _window_from(args))
    out = Path(args.out)
    for snapshot in snapshots:
        write_snapshot(snapshot, out / str(snapshot.at))
    print(f"wrote {len(snapshots)} snapshots under {out}")
    return 0


def _snapshot_dirs(root: Path) -> list[Path]:
    dirs = [p for p in root.iterdir() if p.is_dir() and (p / "channels.csv").is_file()]
    return sorted(dirs, key=lambda p: int(p.name))


def _cmd_metrics(args) -> int:
    config = _config_of(args)
    metric_ids = list(config.metrics) if config and args.metrics == "all" else (
        list(MetricId) if args.metrics == "all"
        else [MetricId(name.strip()) for name in args.metrics.split(",")])
    params = (config.metric_params if config
              else MetricParams(seed=args.seed, sample_size=args.sample_size))
    series = MetricSeries()
    failures = 0
    for snap_dir in _snapshot_dirs(Path(args.snapshots)):
        snapshot = read_snapshot(snap_dir)
        g = to_undirected(snapshot)
        for metric in metric_ids:
            try:
                series.add(snapshot.at, compute(g, metric, params))
            except LnTopoError as exc:
                series.add_error(snapshot.at, metric, type(exc).__name__)
                failures += 1
    series.to_csv(args.out)
    print(f"wrote {args.out}" + (f" ({failures} error rows)" if failures else ""))
    return 2 if failures else 0


def _cmd_stability(args) -> int:
    snapshots = [read_snapshot(d) for d in _snapshot_dirs(Path(args.snapshots))]
    config = _config_of(args)
    hop_slack = args.hop_slack if args.hop_slack is not None else (
        config.hop_slack if config else 0)
    sampler = None
    if args.samples > 0:
        sampler = SamplerConfig(count=args.samples, target_size=args.sample_size,
                                seed=args.seed)
    elif config and args.samples < 0:
        sampler = config.sampler
    series = stability_series(snapshots, hop_slack, sampler)
    write_stability_csv(series, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    snapshot = read_snapshot(args.snapshot)
    tally = simulate(snapshot, args.ntx, args.amount, args.seed, _MODELS[args.model]())
    write_tally_csv(tally, args.out)
    if args.stats_out:
        write_hop_statistics_csv(hop_statistics(tally), args.stats_out)
    print(f"routed {tally.n_routed}/{tally.n_requests} payments ({args.model}) -> {args.out}")
    return 0


def _cmd_report(args) -> int:
    config = _config_of(args)
    if config is None:
        raise ConfigInvalid("report requires --config FILE")
    figure_list = args.figures.split(",") if args.figures else None
    written = emit_plot_data(config.out_dir, figure_list)
    if config.figures and not args.no_figures:
        from .plots import render_figures
        written += render_figures(config.out_dir / "report", figure_list)
    for path in written:
        print(path)
    return 0


def _cmd_all(args) -> int:
    config = _config_of(args)
    if config is None:
        raise ConfigInvalid("all requires --config FILE")
    result = run_pipeline(config, threads=args.threads)
    emit_plot_data(config.out_dir)
    if config.figures:
        from .plots import render_figures
        render_figures(config.out_dir / "report")
    for line in result.errors:
        print(f"error row: {line}", file=sys.stderr)
    print(f"pipeline outputs in {result.out_dir}")
    return result.exit_code


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="pipeline config file (key = value sections)")
    shared.add_argument("--threads", type=int, default=1)

    parser = argparse.ArgumentParser(
        prog="ln-topo",
        description="Topology snapshots, metric catalog, stability analysis, "
                    "and routing simulation for payment channel networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def records_args(p):
        p.add_argument("--records", help="gossip records file")
        p.add_argument("--format", choices=sorted(_READERS), default=None)
        p.add_argument("--strict", action="store_true", help="fail on malformed records")

    p = sub.add_parser("ingest", parents=[shared], help="normalize records to the line format")
    records_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("snapshot", parents=[shared], help="reconstruct one snapshot")
    records_args(p)
    p.add_argument("--at", type=int, required=True, help="unix timestamp")
    p.add_argument("--window", type=int, default=None, help="liveness window in seconds")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_snapshot)

    p = sub.add_parser("series", parents=[shared], help="reconstruct a snapshot series")
    records_args(p)
    p.add_argument("--schedule", help="file with one unix ts per line")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_series)

    p = sub.add_parser("metrics", parents=[shared], help="compute the metric catalog per snapshot")
    p.add_argument("--snapshots", required=True, help="directory of <ts>/ snapshot dirs")
    p.add_argument("--metrics", default="all", help="comma-separated metric ids")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-size", type=int, default=500)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_metrics)

    p = sub.add_parser("stability", parents=[shared], help="pairwise stability statistics")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--hop-slack", type=int, default=None)
    p.add_argument("--samples", type=int, default=100, help="0 disables subgraph sampling")
    p.add_argument("--sample-size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_stability)

    p = sub.add_parser("simulate", parents=[shared], help="route payments over one snapshot")
    p.add_argument("--snapshot", required=True, help="snapshot directory")
    p.add_argument("--model", choices=sorted(_MODELS), required=True)
    p.add_argument("--ntx", type=int, default=5000)
    p.add_argument("--amount", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="tally CSV path")
    p.add_argument("--stats-out", help="also write the hop-share statistics CSV")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("report", parents=[shared],
                       help="emit plot data (and figures) from pipeline outputs")
    p.add_argument("--figures", help=f"comma-separated subset of {', '.join(FIGURE_IDS)}")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("all", parents=[shared], help="run the full pipeline from a config file")
    p.set_defaults(fn=_cmd_all)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except LnTopoError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
