"""End-to-end runs over a snapshot series: reproducible tables plus
plot-ready data files.

Configuration is a diff-friendly ``key = value`` file with sections; every
seed is an explicit value, so a config maps to byte-identical outputs across
reruns and thread counts.  Individual metric failures become error rows
rather than aborting a long run.
"""

from __future__ import annotations

import csv
import hashlib
import json
import random
import re
from concurrent.futures import ThreadPoolExecutor
from configparser import ConfigParser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

from . import __version__
from .errors import ConfigInvalid, EmptyTally, LnTopoError, MissingColumns
from .graph import largest_component, to_undirected
from .gossip import normalize_records, read_bolt7_binary, read_bolt7_hex, read_records
from .metrics import (MetricId, MetricParams, MetricSeries, betweenness_values,
                      compute, lorenz_points)
from .routing import (CostModel, hop_statistics, read_tally_csv, simulate,
                      write_tally_csv)
from .snapshot import DEFAULT_LIVENESS_WINDOW, build_series
from .stability import (SamplerConfig, read_stability_csv, stability_series,
                        write_stability_csv)

FIGURE_IDS = ("density_degree", "powerlaw", "pa_score", "connectivity",
              "function", "patterns", "stability", "hops", "lorenz")

_MODEL_FACTORIES = {"lnd": CostModel.lnd, "ecl": CostModel.ecl, "cln": CostModel.cln}


@dataclass(frozen=True)
class PipelineConfig:
    records_path: Path
    records_format: str                 # "lines" | "hex" | "binary"
    strict: bool
    schedule: tuple[int, ...]
    liveness_window: int
    metrics: tuple[MetricId, ...]
    metric_params: MetricParams
    hop_slack: int
    sampler: SamplerConfig | None
    models: tuple[str, ...]
    n_tx: int
    amount_msat: int
    sim_seed: int
    out_dir: Path
    figures: bool
    canonical_text: str = field(repr=False, default="")

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text.encode("utf-8")).hexdigest()


def _canonicalize(parser: ConfigParser) -> str:
    lines = []
    for section in sorted(parser.sections()):
        lines.append(f"[{section}]")
        for key in sorted(parser[section]):
            lines.append(f"{key} = {parser[section][key]}")
    return "\n".join(lines) + "\n"


def _get(parser: ConfigParser, section: str, key: str, fallback: str) -> str:
    return parser.get(section, key, fallback=fallback)


def _get_int(parser: ConfigParser, section: str, key: str, fallback: int) -> int:
    raw = _get(parser, section, key, str(fallback))
    try:
        return int(raw)
    except ValueError:
        raise ConfigInvalid(f"[{section}] {key} must be an integer, got {raw!r}") from None


def _get_float(parser: ConfigParser, section: str, key: str, fallback: float) -> float:
    raw = _get(parser, section, key, str(fallback))
    try:
        return float(raw)
    except ValueError:
        raise ConfigInvalid(f"[{section}] {key} must be a number, got {raw!r}") from None


def _get_bool(parser: ConfigParser, section: str, key: str, fallback: bool) -> bool:
    raw = _get(parser, section, key, "true" if fallback else "false").lower()
    if raw in ("true", "1", "yes", "on"):
        return True
    if raw in ("false", "0", "no", "off"):
        return False
    raise ConfigInvalid(f"[{section}] {key} must be a boolean, got {raw!r}")


def load_config(path: Union[str, Path]) -> PipelineConfig:
    """Parse and validate a pipeline config; paths resolve relative to it."""
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigInvalid(f"config file not found: {config_path}")
    parser = ConfigParser()
    try:
        parser.read(config_path, encoding="utf-8")
    except Exception as exc:
        raise ConfigInvalid(f"unparseable config: {exc}") from None
    base = config_path.parent

    records_path = base / _get(parser, "ingest", "records", "")
    if not _get(parser, "ingest", "records", ""):
        raise ConfigInvalid("[ingest] records is required")
    if not records_path.is_file():
        raise ConfigInvalid(f"records file not found: {records_path}")
    records_format = _get(parser, "ingest", "format", "lines")
    if records_format not in ("lines", "hex", "binary"):
        raise ConfigInvalid(f"[ingest] format must be lines|hex|binary, got {records_format!r}")
    strict = _get_bool(parser, "ingest", "strict", False)

    schedule_file = _get(parser, "snapshots", "schedule", "")
    if schedule_file:
        schedule_path = base / schedule_file
        if not schedule_path.is_file():
            raise ConfigInvalid(f"schedule file not found: {schedule_path}")
        try:
            schedule = tuple(int(line.strip()) for line in
                             schedule_path.read_text(encoding="utf-8").splitlines()
                             if line.strip())
        except ValueError:
            raise ConfigInvalid("schedule file must hold one unix timestamp per line") from None
    else:
        start = _get_int(parser, "snapshots", "cadence_start", 0)
        end = _get_int(parser, "snapshots", "cadence_end", 0)
        step = _get_int(parser, "snapshots", "cadence_step", 0)
        if step <= 0 or end < start:
            raise ConfigInvalid("cadence needs start <= end and step > 0")
        schedule = tuple(range(start, end + 1, step))
    if not schedule:
        raise ConfigInvalid("empty snapshot schedule")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ConfigInvalid("schedule must be strictly increasing")

    metrics_raw = _get(parser, "metrics", "metrics", "all")
    if metrics_raw.strip() == "all":
        metrics = tuple(MetricId)
    else:
        try:
            metrics = tuple(MetricId(name.strip()) for name in metrics_raw.split(",")
                            if name.strip())
        except ValueError as exc:
            raise ConfigInvalid(f"unknown metric id: {exc}") from None
        if not metrics:
            raise ConfigInvalid("[metrics] metrics resolved to an empty list")
    pair_source = _get(parser, "metrics", "pair_source", "edges")
    if pair_source not in ("edges", "sampled_non_edges"):
        raise ConfigInvalid(f"pair_source must be edges|sampled_non_edges, got {pair_source!r}")
    metric_params = MetricParams(
        exact_cap=_get_int(parser, "metrics", "exact_cap", 2000),
        cubic_cap=_get_int(parser, "metrics", "cubic_cap", 500),
        sample_size=_get_int(parser, "metrics", "sample_size", 500),
        seed=_get_int(parser, "metrics", "seed", 0),
        ccpa_alpha=_get_float(parser, "metrics", "ccpa_alpha", 0.8),
        pair_source=pair_source,
        non_edge_samples=_get_int(parser, "metrics", "non_edge_samples", 100_000),
    )

    hop_slack = _get_int(parser, "stability", "hop_slack", 0)
    sampler_count = _get_int(parser, "stability", "sampler_count", 100)
    sampler = None
    if sampler_count > 0:
        sampler = SamplerConfig(
            count=sampler_count,
            target_size=_get_int(parser, "stability", "sampler_size", 100),
            p_forward=_get_float(parser, "stability", "p_forward", 0.7),
            seed=_get_int(parser, "stability", "seed", 0),
        )

    models_raw = _get(parser, "simulate", "models", "lnd,ecl,cln")
    models = tuple(m.strip() for m in models_raw.split(",") if m.strip())
    for m in models:
        if m not in _MODEL_FACTORIES:
            raise ConfigInvalid(f"unknown cost model {m!r}")

    out_raw = _get(parser, "output", "dir", "")
    if not out_raw:
        raise ConfigInvalid("[output] dir is required")

    return PipelineConfig(
        records_path=records_path,
        records_format=records_format,
        strict=strict,
        schedule=schedule,
        liveness_window=_get_int(parser, "snapshots", "liveness_window",
                                 DEFAULT_LIVENESS_WINDOW),
        metrics=metrics,
        metric_params=metric_params,
        hop_slack=hop_slack,
        sampler=sampler,
        models=models,
        n_tx=_get_int(parser, "simulate", "n_tx", 5000),
        amount_msat=_get_int(parser, "simulate", "amount_msat", 100_000),
        sim_seed=_get_int(parser, "simulate", "seed", 0),
        out_dir=base / out_raw,
        figures=_get_bool(parser, "output", "figures", True),
        canonical_text=_canonicalize(parser),
    )


@dataclass
class PipelineResult:
    exit_code: int
    out_dir: Path
    errors: list[str]


def _read_records(config: PipelineConfig):
    readers = {"lines": read_records, "hex": read_bolt7_hex, "binary": read_bolt7_binary}
    result = readers[config.records_format](config.records_path, strict=config.strict)
    return normalize_records(result.records), result.skipped


def _snapshot_work(snapshot, config: PipelineConfig):
    """Everything computed per snapshot; pure given the immutable snapshot."""
    g = to_undirected(snapshot)
    metric_rows = []
    for metric in config.metrics:
        try:
            metric_rows.append((metric, compute(g, metric, config.metric_params), None))
        except LnTopoError as exc:
            metric_rows.append((metric, None, f"{type(exc).__name__}"))
    lorenz = None
    if g.n > 0:
        lc = largest_component(g)
        if lc.n <= config.metric_params.exact_cap:
            values = betweenness_values(lc)
        else:
            rng = random.Random(config.metric_params.seed)
            sources = sorted(rng.sample(range(lc.n), config.metric_params.sample_size))
            values = betweenness_values(lc, sources=sources)
        lorenz = lorenz_points(values)
    tallies = {}
    sim_errors = []
    for model_name in config.models:
        try:
            tallies[model_name] = simulate(
                snapshot, config.n_tx, config.amount_msat, config.sim_seed,
                _MODEL_FACTORIES[model_name]())
        except LnTopoError as exc:
            sim_errors.append(f"simulate {model_name} at {snapshot.at}: {type(exc).__name__}")
    return metric_rows, lorenz, tallies, sim_errors


def run_pipeline(config: PipelineConfig, threads: int = 1) -> PipelineResult:
    """Execute ingest -> series -> metrics/stability/simulation -> tables.

    Output is a pure function of the config: reruns and different thread
    counts produce byte-identical trees.  Exit code 2 flags partial failures.
    """
    errors: list[str] = []
    records, skipped = _read_records(config)
    snapshots = build_series(records, list(config.schedule), config.liveness_window)
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: _snapshot_work(s, config), snapshots))
    else:
        results = [_snapshot_work(s, config) for s in snapshots]

    series = MetricSeries()
    for snapshot, (metric_rows, lorenz, tallies, sim_errors) in zip(snapshots, results):
        ts = snapshot.at
        for metric, value, error in metric_rows:
            if error is None:
                series.add(ts, value)
            else:
                series.add_error(ts, metric, error)
                errors.append(f"metric {metric.value} at {ts}: {error}")
        if lorenz is not None:
            with open(out / f"lorenz_{ts}.csv", "w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(["rank_fraction", "cum_share"])
                for rank, share in lorenz:
                    writer.writerow([repr(rank), repr(share)])
        for model_name, tally in sorted(tallies.items()):
            write_tally_csv(tally, out / f"hops_{model_name}_{ts}.csv")
        errors.extend(sim_errors)
    series.to_csv(out / "metrics.csv")

    if len(snapshots) >= 2:
        stability = stability_series(snapshots, config.hop_slack, config.sampler)
        write_stability_csv(stability, out / "stability.csv")
    else:
        errors.append("stability: fewer than two snapshots")

    manifest = {
        "toolkit_version": __version__,
        "config_hash": config.config_hash,
        "records_skipped": skipped,
        "schedule": list(config.schedule),
        "liveness_window": config.liveness_window,
        "seeds": {
            "metrics": config.metric_params.seed,
            "stability_sampler": config.sampler.seed if config.sampler else None,
            "simulate": config.sim_seed,
        },
        "conventions": {
            "distance_metrics_scope": "largest_component",
            "degree_entropy_base": 2,
            "channel_intersection": f"hop distance <= 1 + hop_slack ({config.hop_slack}) "
                                    "measured in the later snapshot",
            "ks_p_value": "asymptotic Kolmogorov series",
            "wasserstein_norm": "raw distance over the earlier snapshot's mean degree",
        },
        "error_rows": sorted(errors),
    }
    with open(out / "run_manifest", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return PipelineResult(2 if errors else 0, out, errors)


# ---------------------------------------------------------------------------
# Plot-ready data files
# ---------------------------------------------------------------------------

def _series_columns(series: MetricSeries, wanted: Sequence[MetricId],
                    figure: str) -> list[list[float]]:
    rows = []
    for ts in series.timestamps():
        values = [series.get(ts, metric) for metric in wanted]
        if any(v is None for v in values):
            continue
        row = [ts]
        for v in values:
            if isinstance(v.value, tuple):
                row.extend(v.value)
            else:
                row.append(v.value)
        rows.append(row)
    if not rows:
        raise MissingColumns(f"figure {figure!r} needs metrics "
                             f"{[m.value for m in wanted]} but none were computed")
    return rows


def _format_cell(cell) -> str:
    if isinstance(cell, str):
        return cell
    if isinstance(cell, int):
        return str(cell)
    return repr(float(cell))


def _write_dat(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("# " + " ".join(header) + "\n")
        for row in rows:
            handle.write(" ".join(_format_cell(cell) for cell in row) + "\n")


_FIGURE_METRICS = {
    "density_degree": [MetricId.MEAN_DEGREE, MetricId.DENSITY],
    "powerlaw": [MetricId.POWER_LAW_FIT],
    "pa_score": [MetricId.AVG_PREFERENTIAL_ATTACHMENT,
                 MetricId.AVG_PREFERENTIAL_ATTACHMENT_NORMALIZED],
    "connectivity": [MetricId.BRIDGE_COUNT, MetricId.MIN_EDGE_COVER_SIZE,
                     MetricId.TRANSITIVITY, MetricId.AVG_CLUSTERING],
    "function": [MetricId.GLOBAL_EFFICIENCY, MetricId.INFORMATION_CENTRALITY,
                 MetricId.EFFECTIVE_SIZE, MetricId.BURTS_EFFECTIVE_SIZE],
    "patterns": [MetricId.AVG_RESOURCE_ALLOCATION, MetricId.AVG_JACCARD,
                 MetricId.FLP_COMMUNITY_COUNT, MetricId.ALP_COMMUNITY_COUNT],
}

_FIGURE_HEADERS = {
    "density_degree": ["ts", "mean_degree", "density"],
    "powerlaw": ["ts", "alpha", "r_squared"],
    "pa_score": ["ts", "avg_preferential_attachment", "normalized"],
    "connectivity": ["ts", "bridges", "min_edge_cover", "transitivity", "avg_clustering"],
    "function": ["ts", "global_efficiency", "information_centrality",
                 "effective_size", "burts_effective_size"],
    "patterns": ["ts", "resource_allocation", "jaccard", "flp_communities",
                 "alp_communities"],
}


def emit_plot_data(out_dir: Union[str, Path], figures: Sequence[str] | None = None,
                   report_dir: Union[str, Path, None] = None) -> list[Path]:
    """Write one whitespace-separated data file per figure id.

    Reads the tables previously produced by run_pipeline from ``out_dir``.
    An explicit figure request whose inputs are missing raises
    MissingColumns; the everything default skips unavailable figures.
    """
    out = Path(out_dir)
    report = Path(report_dir) if report_dir is not None else out / "report"
    report.mkdir(parents=True, exist_ok=True)
    explicit = figures is not None
    wanted = list(figures) if explicit else list(FIGURE_IDS)
    for figure in wanted:
        if figure not in FIGURE_IDS:
            raise ValueError(f"unknown figure id {figure!r}")
    series = None
    metrics_path = out / "metrics.csv"
    if metrics_path.is_file():
        series = MetricSeries.from_csv(metrics_path)
    written: list[Path] = []

    for figure in wanted:
        try:
            written.append(_emit_one_figure(out, report, figure, series))
        except MissingColumns:
            if explicit:
                raise
    return written


def _emit_one_figure(out: Path, report: Path, figure: str,
                     series: MetricSeries | None) -> Path:
    path = report / f"{figure}.dat"
    if figure in _FIGURE_METRICS:
        if series is None:
            raise MissingColumns(f"figure {figure!r} needs metrics.csv")
        rows = _series_columns(series, _FIGURE_METRICS[figure], figure)
        _write_dat(path, _FIGURE_HEADERS[figure], rows)
    elif figure == "stability":
        stability_path = out / "stability.csv"
        if not stability_path.is_file():
            raise MissingColumns("figure 'stability' needs stability.csv")
        stability = read_stability_csv(stability_path)
        rows = [[r.t, r.t_next, r.i_node, r.i_channel, r.ks_statistic,
                 r.ks_p_value, r.wasserstein]
                for r in stability.full_rows()]
        _write_dat(path, ["t", "t_next", "i_node", "i_channel", "ks_D",
                          "ks_p", "wasserstein"], rows)
    elif figure == "hops":
        tally_files = sorted(out.glob("hops_*_*.csv"))
        if not tally_files:
            raise MissingColumns("figure 'hops' needs hops_<model>_<ts>.csv files")
        rows = []
        for tally_file in tally_files:
            match = re.fullmatch(r"hops_([a-z]+)_(\d+)\.csv", tally_file.name)
            if not match:
                continue
            model_name, ts = match.group(1), int(match.group(2))
            try:
                stats = hop_statistics(read_tally_csv(tally_file, model=model_name))
            except EmptyTally:
                continue                # all routes were direct for this snapshot
            for rank, share in stats.curve:
                rows.append([model_name, ts, rank, share])
        if not rows:
            raise MissingColumns("figure 'hops' found no usable tallies")
        _write_dat(path, ["model", "ts", "rank_fraction", "cum_hop_share"], rows)
    elif figure == "lorenz":
        lorenz_files = sorted(out.glob("lorenz_*.csv"))
        if not lorenz_files:
            raise MissingColumns("figure 'lorenz' needs lorenz_<ts>.csv files")
        rows = []
        for lorenz_file in lorenz_files:
            match = re.fullmatch(r"lorenz_(\d+)\.csv", lorenz_file.name)
            if not match:
                continue
            ts = int(match.group(1))
            with open(lorenz_file, "r", encoding="utf-8", newline="") as handle:
                reader = csv.reader(handle)
                next(reader)
                for rank, share in reader:
                    rows.append([ts, float(rank), float(share)])
        _write_dat(path, ["ts", "rank_fraction", "cum_share"], rows)
    return path
