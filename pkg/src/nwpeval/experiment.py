"""Experiment runner: a declarative run matrix (IC sources x splice
scenarios x leads x regions) orchestrating ingest -> regrid -> splice ->
rollout -> verify, with a CSV metric table and SVG plots as outputs.

The config is a YAML file (schema version 1); see README for the full
key reference. Paths in the config are resolved relative to the config
file's directory. Reruns with the same config and a builtin backend
produce byte-identical CSV and SVG outputs.
"""

from __future__ import annotations

import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import yaml

from .archive import RawDumpLayout, ingest_raw, read_archive
from .grids import (EAST_ASIA, GLOBAL, GridSpec, RegionBox, StateSet, Var,
                    channel_name)
from .plots import CSV_COLUMNS, emit_plots
from .regrid import regrid_state
from .rollout import BackendSpec, RolloutPlan, run_rollout, schedule_steps
from .splice import SpliceSpec, splice_states
from .verify import DEFAULT_REPORT_CHANNELS, MetricRecord, evaluate_run

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
DEFAULT_LEADS = tuple(range(24, 241, 24))
DEFAULT_REGIONS = {"global": GLOBAL, "east_asia": EAST_ASIA}
WORKERS_ENV = "NWPEVAL_WORKERS"


class ConfigError(ValueError):
    """The experiment config is invalid."""


@dataclass(frozen=True)
class ICSource:
    label: str
    path: str
    grid: Optional[GridSpec] = None        # required for raw dumps
    layout: Optional[RawDumpLayout] = None


@dataclass(frozen=True)
class SpliceScenario:
    label: str
    base_source: str
    donor_source: str
    spec: SpliceSpec


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    init_time: datetime
    ic_sources: tuple[ICSource, ...]
    truth_pattern: str                     # contains "{lead}"
    climatology_path: str
    backend: BackendSpec
    output_dir: str
    lead_hours: tuple[int, ...] = DEFAULT_LEADS
    regions: dict = field(default_factory=lambda: dict(DEFAULT_REGIONS))
    splice_scenarios: tuple[SpliceScenario, ...] = ()
    report_channels: tuple = DEFAULT_REPORT_CHANNELS
    model_grid: GridSpec = field(default_factory=GridSpec.canonical)
    workers: Optional[int] = None
    snapshot_bytes: bytes = b""            # raw config file, for provenance

    def validate(self) -> None:
        if not self.ic_sources:
            raise ConfigError("ic_sources must not be empty")
        labels = [s.label for s in self.ic_sources]
        labels += [sc.label for sc in self.splice_scenarios]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"run labels are not unique: {labels}")
        source_labels = {s.label for s in self.ic_sources}
        for sc in self.splice_scenarios:
            for ref in (sc.base_source, sc.donor_source):
                if ref not in source_labels:
                    raise ConfigError(f"scenario {sc.label!r} references "
                                      f"unknown source {ref!r}")
        if "{lead}" not in self.truth_pattern:
            raise ConfigError("truth pattern must contain a {lead} placeholder")
        if not self.lead_hours:
            raise ConfigError("lead_hours must not be empty")
        import math
        g = 0
        for h in self.backend.horizons:
            g = math.gcd(g, h)
        for lead in self.lead_hours:
            if lead % g != 0:
                raise ConfigError(f"lead {lead} not divisible by backend "
                                  f"horizon gcd {g}")
        for src in self.ic_sources:
            if not os.path.exists(src.path):
                raise ConfigError(f"source {src.label!r}: missing file {src.path}")
            if not src.path.endswith(".nws") and (src.grid is None or src.layout is None):
                raise ConfigError(f"source {src.label!r}: raw dumps require "
                                  "grid and layout")
        if not os.path.exists(self.climatology_path):
            raise ConfigError(f"missing climatology {self.climatology_path}")


def _parse_time(s: str) -> datetime:
    t = datetime.fromisoformat(s.replace("Z", "+00:00"))
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def _parse_grid(d: dict) -> GridSpec:
    return GridSpec(nlat=int(d["nlat"]), nlon=int(d["nlon"]),
                    lat_start=float(d.get("lat_start", 90.0)),
                    dlat=float(d.get("dlat", 0.25)),
                    lon_start=float(d.get("lon_start", 0.0)),
                    dlon=float(d.get("dlon", 0.25)))


def parse_channel(name: str) -> tuple[Var, int]:
    """'MSLP' -> (MSLP, 0); 'Z500' -> (Z, 500)."""
    for var in Var:
        if var.is_surface:
            if name == var.name:
                return var, 0
        elif name.startswith(var.name) and name[len(var.name):].isdigit():
            return var, int(name[len(var.name):])
    raise ConfigError(f"unknown channel {name!r}")


def _parse_box(v) -> RegionBox:
    lat_min, lat_max, lon_min, lon_max = (float(x) for x in v)
    return RegionBox(lat_min=lat_min, lat_max=lat_max,
                     lon_min=lon_min, lon_max=lon_max)


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment config."""
    raw_bytes = Path(path).read_bytes()
    try:
        doc = yaml.safe_load(raw_bytes)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    version = int(doc.get("config_version", CONFIG_VERSION))
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config_version {version}")
    base = Path(path).parent

    def resolve(p: str) -> str:
        return str((base / p) if not os.path.isabs(p) else Path(p))

    try:
        sources = []
        for s in doc["ic_sources"] or []:
            layout = None
            if "layout" in s:
                ld = s["layout"] or {}
                layout = RawDumpLayout(
                    channel_order=ld.get("channel_order", "canonical"),
                    scan=ld.get("scan", "north-first"))
            sources.append(ICSource(
                label=str(s["label"]), path=resolve(str(s["path"])),
                grid=_parse_grid(s["grid"]) if "grid" in s else None,
                layout=layout))
        scenarios = []
        for sc in doc.get("splice_scenarios", []) or []:
            spec = SpliceSpec(region=_parse_box(sc["box"]),
                              variable_scope=sc.get("scope", "upper-only"),
                              blend_width=float(sc.get("blend_width", 0.0)))
            scenarios.append(SpliceScenario(
                label=str(sc["label"]), base_source=str(sc["base_source"]),
                donor_source=str(sc["donor_source"]), spec=spec))
        bd = doc.get("backend", {}) or {}
        backend = BackendSpec(
            kind=bd.get("kind", "builtin"),
            builtin=bd.get("builtin", "persistence"),
            advection_cells=int(bd.get("advection_cells", 1)),
            command=bd.get("command"),
            horizons=frozenset(bd.get("horizons", [24])))
        regions = dict(DEFAULT_REGIONS)
        if "regions" in doc:
            regions = {str(k): _parse_box(v) for k, v in doc["regions"].items()}
        channels = DEFAULT_REPORT_CHANNELS
        if "report_channels" in doc:
            channels = tuple(parse_channel(str(c)) for c in doc["report_channels"])
        cfg = ExperimentConfig(
            name=str(doc.get("name", Path(path).stem)),
            init_time=_parse_time(str(doc["init_time"])),
            ic_sources=tuple(sources),
            truth_pattern=resolve(str(doc["truth"])),
            climatology_path=resolve(str(doc["climatology"])),
            backend=backend,
            output_dir=resolve(str(doc["output_dir"])),
            lead_hours=tuple(int(h) for h in doc.get("lead_hours", DEFAULT_LEADS)),
            regions=regions,
            splice_scenarios=tuple(scenarios),
            report_channels=channels,
            model_grid=_parse_grid(doc["grid"]) if "grid" in doc else GridSpec.canonical(),
            workers=int(doc["workers"]) if "workers" in doc else None,
            snapshot_bytes=raw_bytes)
    except KeyError as exc:
        raise ConfigError(f"{path}: missing required key {exc}")
    cfg.validate()
    return cfg


@dataclass
class RunReport:
    csv_path: Path
    log_path: Path
    plot_files: list[Path]
    config_hash: str
    failures: dict[str, str]


def _load_source(src: ICSource, init_time: datetime,
                 model_grid: GridSpec) -> StateSet:
    if src.path.endswith(".nws"):
        state = read_archive(src.path)
        state = state.replace(source_label=src.label)
    else:
        state = ingest_raw(src.path, src.grid, src.layout,
                           valid_time=init_time, source_label=src.label)
    return regrid_state(state, model_grid)


def write_metric_csv(records: list[MetricRecord], path: Path) -> None:
    """Fixed column order; values at 9 significant digits."""
    lines = [",".join(CSV_COLUMNS)]
    for r in sorted(records, key=MetricRecord.sort_key):
        lines.append(",".join([
            r.init_time.strftime("%Y-%m-%dT%H:%M:%SZ"),
            r.source_label,
            r.variable.name,
            str(r.level),
            r.region,
            str(r.lead_hours),
            r.metric,
            f"{r.value:.9g}",
        ]))
    path.write_text("\n".join(lines) + "\n")


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Execute every run in the matrix and assemble the report.

    Per-run failures are logged and recorded without aborting the other
    runs; config validation failures abort before any run starts.
    """
    config.validate()
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    truths: dict[int, StateSet] = {}
    truth_errors: list[str] = []
    for lead in config.lead_hours:
        p = config.truth_pattern.format(lead=lead)
        if os.path.exists(p):
            truths[lead] = read_archive(p)
        else:
            truth_errors.append(f"lead {lead}: missing truth file {p}")
    climatology = read_archive(config.climatology_path)

    ics: dict[str, StateSet] = {}
    failures: dict[str, str] = {}
    for src in config.ic_sources:
        try:
            ics[src.label] = _load_source(src, config.init_time, config.model_grid)
        except Exception as exc:
            failures[src.label] = f"ingest failed: {exc}"

    runs: list[tuple[str, StateSet]] = []
    for src in config.ic_sources:
        if src.label in ics:
            runs.append((src.label, ics[src.label]))
    for sc in config.splice_scenarios:
        if sc.base_source not in ics or sc.donor_source not in ics:
            failures[sc.label] = "base or donor source failed to load"
            continue
        try:
            spliced = splice_states(ics[sc.base_source], ics[sc.donor_source],
                                    sc.spec, allow_time_mismatch=True)
            runs.append((sc.label, spliced.replace(source_label=sc.label)))
        except Exception as exc:
            failures[sc.label] = f"splice failed: {exc}"

    # chain greedy segments between consecutive requested leads so every
    # emit lead lies on the plan even for multi-horizon backends
    steps: list[int] = []
    prev = 0
    for lead in sorted(set(config.lead_hours)):
        steps.extend(schedule_steps(lead - prev, config.backend.horizons).steps)
        prev = lead
    plan = RolloutPlan(steps=tuple(steps))
    run_errors: dict[str, list[str]] = {}

    def one_run(label: str, ic: StateSet) -> list[MetricRecord]:
        series = run_rollout(ic, config.backend, plan, emit_leads=config.lead_hours)
        forecasts = dict(series)
        recs, errs = evaluate_run(forecasts, truths, climatology,
                                  config.regions, config.report_channels)
        if errs:
            run_errors[label] = errs
        return recs

    workers = config.workers
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "4"))
    workers = max(1, min(workers, len(runs) or 1))
    records: list[MetricRecord] = []
    if runs:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {label: pool.submit(one_run, label, ic) for label, ic in runs}
        for label, fut in futures.items():
            try:
                records.extend(fut.result())
            except Exception as exc:
                failures[label] = f"run failed: {exc}"

    csv_path = outdir / "metrics.csv"
    write_metric_csv(records, csv_path)
    plot_files = emit_plots(str(csv_path), str(outdir / "plots")) if records else []

    snapshot = config.snapshot_bytes or repr(config).encode()
    (outdir / "config_snapshot").write_bytes(snapshot)
    config_hash = hashlib.sha256(snapshot).hexdigest()

    log_lines = [f"experiment: {config.name}",
                 f"config sha256: {config_hash}",
                 f"runs: {', '.join(label for label, _ in runs) or '(none)'}"]
    for msg in truth_errors:
        log_lines.append(f"truth: {msg}")
    for label, errs in sorted(run_errors.items()):
        for e in errs:
            log_lines.append(f"{label}: {e}")
    for label, msg in sorted(failures.items()):
        log_lines.append(f"FAILED {label}: {msg}")
    log_path = outdir / "run.log"
    log_path.write_text("\n".join(log_lines) + "\n")
    for line in log_lines:
        log.info("%s", line)

    return RunReport(csv_path=csv_path, log_path=log_path,
                     plot_files=plot_files, config_hash=config_hash,
                     failures=failures)
