"""Command line interface.

Subcommands: ingest, regrid, splice, rollout, evaluate, run, plot,
inspect. Exit codes: 0 success, 1 run failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import difflib
import logging
import sys
from datetime import timedelta
from pathlib import Path

from . import __version__
from .archive import (ArchiveError, RawDumpLayout, ingest_raw, read_archive,
                      read_header, write_archive)
from .experiment import (ConfigError, _parse_time, load_config, parse_channel,
                         run_experiment, write_metric_csv)
from .grids import EAST_ASIA, GLOBAL, GridSpec, RegionBox, validate_state
from .plots import PlotInputError, emit_plots
from .regrid import regrid_state
from .rollout import BackendSpec, RolloutError, run_rollout, schedule_steps
from .splice import SpliceSpec, splice_states
from .verify import evaluate_run

log = logging.getLogger(__name__)

USAGE_ERROR = 2
RUN_ERROR = 1


import re

_NEGATIVE_VALUE = re.compile(r"^-\d+(\.\d+)?([,]-?\d+(\.\d+)?)*$")


class _Parser(argparse.ArgumentParser):
    """argparse with a close-match suggestion for unknown flags and support
    for comma lists starting with a negative number (e.g. --box -10,60,60,150)."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._negative_number_matcher = _NEGATIVE_VALUE

    def add_subparsers(self, **kwargs):
        kwargs.setdefault("parser_class", _Parser)
        return super().add_subparsers(**kwargs)

    def error(self, message):
        if "unrecognized arguments:" in message:
            bad = message.split("unrecognized arguments:")[1].split()
            known = [s for a in self._actions for s in a.option_strings]
            for b in bad:
                close = difflib.get_close_matches(b, known, n=1)
                if close:
                    message += f" (did you mean {close[0]}?)"
                    break
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _grid_arg(s: str) -> GridSpec:
    parts = [float(x) for x in s.split(",")]
    if len(parts) != 6:
        raise argparse.ArgumentTypeError(
            "grid must be nlat,nlon,lat_start,dlat,lon_start,dlon")
    return GridSpec(nlat=int(parts[0]), nlon=int(parts[1]), lat_start=parts[2],
                    dlat=parts[3], lon_start=parts[4], dlon=parts[5])


def _box_arg(s: str) -> RegionBox:
    parts = [float(x) for x in s.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("box must be lat_min,lat_max,lon_min,lon_max")
    return RegionBox(lat_min=parts[0], lat_max=parts[1],
                     lon_min=parts[2], lon_max=parts[3])


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nwpeval",
                description="Forecast compatibility harness: ingest, regrid, "
                            "splice, roll out, and verify gridded states.")
    p.add_argument("--version", action="version", version=f"nwpeval {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("inspect", parents=[], help="print an archive header")
    sp.add_argument("file")

    sp = sub.add_parser("ingest", help="convert a raw f32 dump to an archive")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--grid", type=_grid_arg, required=True,
                    help="nlat,nlon,lat_start,dlat,lon_start,dlon")
    sp.add_argument("--scan", choices=["north-first", "south-first"],
                    default="north-first")
    sp.add_argument("--valid-time", required=True, help="ISO 8601, e.g. 2023-06-06T00:00:00Z")
    sp.add_argument("--label", required=True)
    sp.add_argument("--nan", choices=["error", "warn"], default="error")
    sp.add_argument("--skip-validation", action="store_true",
                    help="skip physical-range sanity checks")

    sp = sub.add_parser("regrid", help="regrid an archive to another grid")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--grid", type=_grid_arg, default=None,
                    help="destination grid (default: canonical 0.25 degree)")

    sp = sub.add_parser("splice", help="splice a donor box into a base state")
    sp.add_argument("--base", required=True)
    sp.add_argument("--donor", required=True)
    sp.add_argument("--box", type=_box_arg, required=True,
                    help="lat_min,lat_max,lon_min,lon_max")
    sp.add_argument("--out", required=True)
    sp.add_argument("--scope", choices=["upper-only", "all-channels"],
                    default="upper-only")
    sp.add_argument("--blend-width", type=float, default=0.0)
    sp.add_argument("--allow-time-mismatch", action="store_true")

    sp = sub.add_parser("rollout", help="drive a forecast backend autoregressively")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--lead", type=int, required=True, help="total lead hours")
    sp.add_argument("--emit-every", type=int, default=24)
    sp.add_argument("--backend", default="persistence",
                    help="persistence | advection | cmd:<command ...>")
    sp.add_argument("--advection-cells", type=int, default=1)
    sp.add_argument("--horizons", default="24", help="comma list, e.g. 24,6,3,1")
    sp.add_argument("--verify-determinism", action="store_true")

    sp = sub.add_parser("evaluate", help="score forecast archives against truth")
    sp.add_argument("--forecast-pattern", required=True,
                    help="path with {lead} placeholder")
    sp.add_argument("--truth-pattern", required=True,
                    help="path with {lead} placeholder")
    sp.add_argument("--climatology", required=True)
    sp.add_argument("--leads", required=True, help="comma list of lead hours")
    sp.add_argument("--out", required=True, help="metric CSV path")
    sp.add_argument("--region", action="append", default=[],
                    metavar="NAME=latmin,latmax,lonmin,lonmax",
                    help="named region (repeatable; default global + east_asia)")
    sp.add_argument("--channels", default=None,
                    help="comma list, e.g. MSLP,Z500 (default: the standard nine)")

    sp = sub.add_parser("run", help="run a full experiment from a config file")
    sp.add_argument("--config", required=True)

    sp = sub.add_parser("plot", help="render SVG plots from a metric CSV")
    sp.add_argument("--csv", required=True)
    sp.add_argument("--out-dir", required=True)
    return p


def _parse_backend(args) -> BackendSpec:
    horizons = frozenset(int(h) for h in args.horizons.split(","))
    if args.backend.startswith("cmd:"):
        return BackendSpec(kind="external-command", command=args.backend[4:],
                           horizons=horizons)
    return BackendSpec(kind="builtin", builtin=args.backend,
                       advection_cells=args.advection_cells, horizons=horizons)


def _cmd_inspect(args) -> int:
    h = read_header(args.file)
    for key in ("version", "nlat", "nlon", "lat_start", "dlat", "lon_start",
                "dlon", "valid_time", "source_label", "n_channels"):
        print(f"{key}: {h[key]}")
    return 0


def _cmd_ingest(args) -> int:
    layout = RawDumpLayout(scan=args.scan)
    state = ingest_raw(args.infile, args.grid, layout,
                       valid_time=_parse_time(args.valid_time),
                       source_label=args.label, nan_policy=args.nan)
    if not args.skip_validation:
        problems = validate_state(state)
        for msg in problems:
            log.warning("%s: %s", args.infile, msg)
    write_archive(state, args.out)
    return 0


def _cmd_regrid(args) -> int:
    state = read_archive(args.infile)
    dst = args.grid or GridSpec.canonical()
    write_archive(regrid_state(state, dst), args.out)
    return 0


def _cmd_splice(args) -> int:
    base = read_archive(args.base)
    donor = read_archive(args.donor)
    spec = SpliceSpec(region=args.box, variable_scope=args.scope,
                      blend_width=args.blend_width)
    out = splice_states(base, donor, spec,
                        allow_time_mismatch=args.allow_time_mismatch)
    write_archive(out, args.out)
    return 0


def _cmd_rollout(args) -> int:
    ic = read_archive(args.infile)
    backend = _parse_backend(args)
    emit = list(range(args.emit_every, args.lead + 1, args.emit_every))
    steps = []
    prev = 0
    for lead in emit:
        steps.extend(schedule_steps(lead - prev, backend.horizons).steps)
        prev = lead
    from .rollout import RolloutPlan
    plan = RolloutPlan(steps=tuple(steps))
    series = run_rollout(ic, backend, plan, emit_leads=emit,
                         verify_determinism=args.verify_determinism)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    for lead, state in series:
        path = outdir / f"forecast_{lead:03d}h.nws"
        write_archive(state, str(path))
        print(f"lead {lead:4d}h -> {path}")
    return 0


def _cmd_evaluate(args) -> int:
    leads = [int(h) for h in args.leads.split(",")]
    forecasts = {}
    truths = {}
    for lead in leads:
        forecasts[lead] = read_archive(args.forecast_pattern.format(lead=lead))
        truths[lead] = read_archive(args.truth_pattern.format(lead=lead))
    clim = read_archive(args.climatology)
    regions = {"global": GLOBAL, "east_asia": EAST_ASIA}
    if args.region:
        regions = {}
        for spec in args.region:
            name, _, box = spec.partition("=")
            regions[name] = _box_arg(box)
    channels = None
    if args.channels:
        channels = [parse_channel(c) for c in args.channels.split(",")]
    records, errors = evaluate_run(forecasts, truths, clim, regions, channels)
    for e in errors:
        log.warning("%s", e)
    write_metric_csv(records, Path(args.out))
    print(f"{len(records)} records -> {args.out}")
    return 1 if errors else 0


def _cmd_run(args) -> int:
    config = load_config(args.config)
    report = run_experiment(config)
    print(f"metrics: {report.csv_path}")
    print(f"plots:   {len(report.plot_files)} files")
    print(f"log:     {report.log_path}")
    print(f"config sha256: {report.config_hash}")
    if report.failures:
        for label, msg in sorted(report.failures.items()):
            print(f"FAILED {label}: {msg}", file=sys.stderr)
        return RUN_ERROR
    return 0


def _cmd_plot(args) -> int:
    files = emit_plots(args.csv, args.out_dir)
    for f in files:
        print(f)
    return 0


_HANDLERS = {
    "inspect": _cmd_inspect,
    "ingest": _cmd_ingest,
    "regrid": _cmd_regrid,
    "splice": _cmd_splice,
    "rollout": _cmd_rollout,
    "evaluate": _cmd_evaluate,
    "run": _cmd_run,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _HANDLERS[args.cmd](args)
    except (ConfigError, PlotInputError, FileNotFoundError) as exc:
        print(f"nwpeval: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ArchiveError, RolloutError, ValueError, OSError) as exc:
        print(f"nwpeval: {exc}", file=sys.stderr)
        return RUN_ERROR


if __name__ == "__main__":
    sys.exit(main())
