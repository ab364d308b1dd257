"""Latitude-weighted RMSE and ACC over region masks.

Weights are cos(latitude) over the evaluation mask, normalized to sum to
one, so the RMSE of a constant offset equals the offset. All accumulation
is in float64 regardless of field precision. The ACC correlates forecast
and truth departures from a supplied climatology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .grids import (Field, GridMismatchError, GridSpec, RegionBox, StateSet,
                    Var, channel_name)
from .splice import region_mask

# The paper-style report set: 4 surface channels plus the 500 hPa levels.
DEFAULT_REPORT_CHANNELS: tuple[tuple[Var, int], ...] = (
    (Var.MSLP, 0), (Var.T2, 0), (Var.U10, 0), (Var.V10, 0),
    (Var.Q, 500), (Var.T, 500), (Var.U, 500), (Var.V, 500), (Var.Z, 500),
)

ANOMALY_VARIANCE_FLOOR = 1e-30


class EmptyMaskError(ValueError):
    """Region mask selects no grid points."""


class DegenerateAnomalyError(ValueError):
    """Anomaly variance too small for a meaningful correlation."""


@dataclass(frozen=True)
class MetricRecord:
    """One row of the metric report. Q-channel RMSE values are reported
    in g/kg (stored specific humidity is kg/kg)."""

    init_time: datetime
    source_label: str
    variable: Var
    level: int
    region: str
    lead_hours: int
    metric: str   # "RMSE" | "ACC"
    value: float

    @property
    def channel(self) -> str:
        return channel_name(self.variable, self.level)

    def sort_key(self):
        return (self.source_label, self.variable.name, self.level,
                self.region, self.lead_hours, self.metric)


def lat_weights(grid: GridSpec, mask: np.ndarray) -> np.ndarray:
    """cos(lat) weights over the mask, normalized to sum to 1.

    A mask consisting only of pole points (cos = 0) falls back to uniform
    weights so a single pole row stays evaluable.
    """
    if mask.shape != grid.shape:
        raise GridMismatchError("mask shape does not match grid")
    if not mask.any():
        raise EmptyMaskError("mask selects no grid points")
    w = np.cos(np.radians(grid.latitudes()))[:, np.newaxis] * np.ones(grid.nlon)
    w = np.where(mask, w, 0.0)
    total = w.sum(dtype=np.float64)
    if total <= 0.0:
        w = mask.astype(np.float64)
        total = w.sum(dtype=np.float64)
    return w / total


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, Field) else np.asarray(f)


def _check_shapes(*fields) -> None:
    grids = [f.grid for f in fields if isinstance(f, Field)]
    if grids and any(g != grids[0] for g in grids):
        raise GridMismatchError("fields are on different grids")
    shapes = {_values(f).shape for f in fields}
    if len(shapes) != 1:
        raise GridMismatchError(f"shape mismatch: {shapes}")


def rmse_weighted(forecast, truth, weights: np.ndarray) -> float:
    """sqrt(sum(w * (f - o)^2)) with float64 accumulation."""
    _check_shapes(forecast, truth)
    diff = _values(forecast).astype(np.float64) - _values(truth).astype(np.float64)
    return float(math.sqrt(np.sum(weights * diff * diff)))


def acc_weighted(forecast, truth, clim, weights: np.ndarray) -> float:
    """Weighted correlation of forecast and truth anomalies from clim."""
    _check_shapes(forecast, truth, clim)
    c = _values(clim).astype(np.float64)
    af = _values(forecast).astype(np.float64) - c
    ao = _values(truth).astype(np.float64) - c
    var_f = float(np.sum(weights * af * af))
    var_o = float(np.sum(weights * ao * ao))
    if var_f < ANOMALY_VARIANCE_FLOOR or var_o < ANOMALY_VARIANCE_FLOOR:
        raise DegenerateAnomalyError(
            f"anomaly variance too small (forecast {var_f:.3e}, truth {var_o:.3e})")
    cov = float(np.sum(weights * af * ao))
    return cov / math.sqrt(var_f * var_o)


def _report_value(var: Var, metric: str, value: float) -> float:
    # specific humidity displayed in g/kg; correlations are scale-free
    if var is Var.Q and metric == "RMSE":
        return value * 1000.0
    return value


def evaluate_run(forecasts: dict[int, StateSet], truths: dict[int, StateSet],
                 climatology: StateSet, regions: dict[str, RegionBox],
                 report_channels=None) -> tuple[list[MetricRecord], list[str]]:
    """Score a forecast series against a truth series.

    forecasts/truths map lead hours to states on one common grid. Returns
    (records, errors); a missing or mismatched truth at a lead is recorded
    as an error and the run continues.
    """
    if report_channels is None:
        report_channels = DEFAULT_REPORT_CHANNELS
    records: list[MetricRecord] = []
    errors: list[str] = []
    leads = sorted(forecasts)
    if not leads:
        return records, errors
    grid = forecasts[leads[0]].grid
    if climatology.grid != grid:
        raise GridMismatchError("climatology grid does not match forecast grid")
    weights = {name: lat_weights(grid, region_mask(grid, box))
               for name, box in regions.items()}
    for lead in leads:
        fc = forecasts[lead]
        init_time = fc.valid_time - timedelta(hours=lead)
        if lead not in truths:
            errors.append(f"lead {lead}: no truth state")
            continue
        tr = truths[lead]
        if tr.grid != grid:
            errors.append(f"lead {lead}: truth grid mismatch")
            continue
        for var, level in report_channels:
            f = fc.channel(var, level)
            o = tr.channel(var, level)
            c = climatology.channel(var, level)
            for name, w in weights.items():
                rmse = rmse_weighted(f, o, w)
                records.append(MetricRecord(
                    init_time=init_time, source_label=fc.source_label,
                    variable=var, level=level, region=name, lead_hours=lead,
                    metric="RMSE", value=_report_value(var, "RMSE", rmse)))
                try:
                    acc = acc_weighted(f, o, c, w)
                except DegenerateAnomalyError as exc:
                    errors.append(f"lead {lead} {channel_name(var, level)} "
                                  f"{name}: {exc}")
                    continue
                records.append(MetricRecord(
                    init_time=init_time, source_label=fc.source_label,
                    variable=var, level=level, region=name, lead_hours=lead,
                    metric="ACC", value=acc))
    records.sort(key=MetricRecord.sort_key)
    return records, errors
