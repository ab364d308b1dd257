"""Grid geometry, the canonical variable/level/channel scheme, and the
in-memory atmospheric state shared by every other module.

The model state is a fixed set of 69 channels on a regular lat/lon grid:
4 surface channels [MSLP, U10, V10, T2] followed by 65 upper-air channels,
variable-major [Z, Q, T, U, V] over 13 pressure levels (1000 hPa down to
50 hPa). Row 0 of every array is the northmost latitude; column 0 is
lon_start, increasing eastward.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np


class Var(enum.Enum):
    """Variable kinds with their archive codes."""

    MSLP = 0
    U10 = 1
    V10 = 2
    T2 = 3
    Z = 4
    Q = 5
    T = 6
    U = 7
    V = 8

    @property
    def is_surface(self) -> bool:
        return self in (Var.MSLP, Var.U10, Var.V10, Var.T2)


SURFACE_VARS = (Var.MSLP, Var.U10, Var.V10, Var.T2)
UPPER_VARS = (Var.Z, Var.Q, Var.T, Var.U, Var.V)

# Descending pressure; 0 denotes the surface.
LEVELS = (1000, 925, 850, 700, 600, 500, 400, 300, 250, 200, 150, 100, 50)
SURFACE_LEVEL = 0

# Canonical channel order: surface block then upper block.
CHANNELS: tuple[tuple[Var, int], ...] = tuple(
    [(v, SURFACE_LEVEL) for v in SURFACE_VARS]
    + [(v, p) for v in UPPER_VARS for p in LEVELS]
)
N_SURFACE = len(SURFACE_VARS)
N_UPPER = len(UPPER_VARS) * len(LEVELS)
N_CHANNELS = N_SURFACE + N_UPPER  # 69


class InvalidChannelError(ValueError):
    """Raised for an illegal (variable, level) combination."""


class GridMismatchError(ValueError):
    """Raised when two objects that must share a grid do not."""


def state_channel_index(variable: Var, level: int) -> tuple[str, int]:
    """Map a (variable, level) pair to its (block, index) position.

    Surface variables live at level 0; upper-air variables at one of the
    13 pressure levels. The mapping is a bijection over the 69 channels.
    """
    if variable.is_surface:
        if level != SURFACE_LEVEL:
            raise InvalidChannelError(f"{variable.name} is surface-only, got level {level}")
        return "surface", SURFACE_VARS.index(variable)
    if level not in LEVELS:
        raise InvalidChannelError(f"{variable.name} requires a pressure level, got {level}")
    return "upper", UPPER_VARS.index(variable) * len(LEVELS) + LEVELS.index(level)


def flat_channel_index(variable: Var, level: int) -> int:
    """Position of a channel in the flat canonical 0..68 order."""
    block, idx = state_channel_index(variable, level)
    return idx if block == "surface" else N_SURFACE + idx


def channel_name(variable: Var, level: int) -> str:
    """Display name: MSLP, T2, ... for surface; Z500, Q850, ... for upper."""
    return variable.name if variable.is_surface else f"{variable.name}{level}"


@dataclass(frozen=True)
class GridSpec:
    """Regular lat/lon grid: row 0 at lat_start (northmost), stepping south
    by dlat; column 0 at lon_start, stepping east by dlon."""

    nlat: int
    nlon: int
    lat_start: float = 90.0
    dlat: float = 0.25
    lon_start: float = 0.0
    dlon: float = 0.25

    def __post_init__(self):
        if self.nlat < 1 or self.nlon < 1:
            raise ValueError("grid must have at least one row and column")
        if self.dlat <= 0 or self.dlon <= 0:
            raise ValueError("dlat and dlon must be positive")
        if self.lat_start > 90.0 or self.lat_start - (self.nlat - 1) * self.dlat < -90.0 - 1e-9:
            raise ValueError("latitude rows must lie within [-90, 90]")
        if not (0.0 <= self.lon_start < 360.0):
            raise ValueError("lon_start must lie in [0, 360)")
        if self.nlon * self.dlon > 360.0 + 1e-9:
            raise ValueError("longitudes overlap after wrap")

    @classmethod
    def canonical(cls) -> "GridSpec":
        """The 0.25-degree 721x1440 model grid."""
        return cls(nlat=721, nlon=1440, lat_start=90.0, dlat=0.25, lon_start=0.0, dlon=0.25)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nlat, self.nlon)

    def latitudes(self) -> np.ndarray:
        return self.lat_start - self.dlat * np.arange(self.nlat)

    def longitudes(self) -> np.ndarray:
        return (self.lon_start + self.dlon * np.arange(self.nlon)) % 360.0

    def coords(self, i: int, j: int) -> tuple[float, float]:
        """(lat, lon) of grid point (i, j)."""
        if not (0 <= i < self.nlat and 0 <= j < self.nlon):
            raise IndexError(f"grid index ({i}, {j}) out of range for {self.shape}")
        return (self.lat_start - i * self.dlat, (self.lon_start + j * self.dlon) % 360.0)

    def is_cyclic(self) -> bool:
        """True when the columns cover the full circle of longitude."""
        return abs(self.nlon * self.dlon - 360.0) <= 1e-6


def grid_coords(grid: GridSpec, i: int, j: int) -> tuple[float, float]:
    return grid.coords(i, j)


@dataclass(frozen=True)
class RegionBox:
    """Inclusive lat/lon rectangle. No dateline-crossing boxes."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (-90.0 <= self.lat_min <= self.lat_max <= 90.0):
            raise ValueError("latitude bounds must satisfy -90 <= lat_min <= lat_max <= 90")
        if not (0.0 <= self.lon_min <= self.lon_max <= 360.0):
            raise ValueError("longitude bounds must satisfy 0 <= lon_min <= lon_max <= 360")


EAST_ASIA = RegionBox(lat_min=-10.0, lat_max=60.0, lon_min=60.0, lon_max=150.0)
GLOBAL = RegionBox(lat_min=-90.0, lat_max=90.0, lon_min=0.0, lon_max=360.0)


@dataclass(frozen=True)
class Field:
    """One 2D channel plane. Values are float32, row 0 = northmost row."""

    variable: Var
    level: int
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        state_channel_index(self.variable, self.level)  # legality check
        vals = np.ascontiguousarray(self.values, dtype=np.float32)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "values", vals)


def _as_utc(t: datetime) -> datetime:
    if t.tzinfo is None:
        return t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


@dataclass(frozen=True)
class StateSet:
    """One timestamped 69-channel global state.

    Channels are stored as a single (69, nlat, nlon) float32 array in the
    canonical order; `field()` exposes individual planes.
    """

    valid_time: datetime
    source_label: str
    grid: GridSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "valid_time", _as_utc(self.valid_time))
        d = np.ascontiguousarray(self.data, dtype=np.float32)
        if d.ndim != 3 or d.shape[1:] != self.grid.shape:
            raise ValueError(f"data shape {d.shape} incompatible with grid {self.grid.shape}")
        object.__setattr__(self, "data", d)

    @classmethod
    def from_fields(cls, valid_time: datetime, source_label: str,
                    fields: list[Field]) -> "StateSet":
        """Assemble from the 69 Fields; every Field must share one grid."""
        if len(fields) != N_CHANNELS:
            raise ValueError(f"expected {N_CHANNELS} fields, got {len(fields)}")
        grid = fields[0].grid
        data = np.empty((N_CHANNELS, grid.nlat, grid.nlon), dtype=np.float32)
        for f in fields:
            if f.grid != grid:
                raise GridMismatchError(
                    f"field {channel_name(f.variable, f.level)} is on a different grid")
            data[flat_channel_index(f.variable, f.level)] = f.values
        return cls(valid_time=valid_time, source_label=source_label, grid=grid, data=data)

    def channel(self, variable: Var, level: int = SURFACE_LEVEL) -> np.ndarray:
        return self.data[flat_channel_index(variable, level)]

    def field(self, variable: Var, level: int = SURFACE_LEVEL) -> Field:
        return Field(variable=variable, level=level, grid=self.grid,
                     values=self.channel(variable, level))

    def replace(self, **kwargs) -> "StateSet":
        args = dict(valid_time=self.valid_time, source_label=self.source_label,
                    grid=self.grid, data=self.data)
        args.update(kwargs)
        return StateSet(**args)


# Sanity gates applied at ingestion (harness-chosen, not physical constants).
RANGE_CHECKS: dict[Var, tuple[float, float]] = {
    Var.T2: (150.0, 350.0),
    Var.T: (150.0, 350.0),
    Var.MSLP: (85000.0, 110000.0),
    Var.Q: (0.0, 0.05),
    Var.U10: (-150.0, 150.0),
    Var.V10: (-150.0, 150.0),
    Var.U: (-150.0, 150.0),
    Var.V: (-150.0, 150.0),
}


def validate_state(state: StateSet, check_ranges: bool = True) -> list[str]:
    """Return a list of violation messages; empty means the state is clean.

    Checks channel count, grid consistency, NaN/Inf, and per-channel
    physical ranges. Range checks can be disabled (e.g. for raw backend
    outputs).
    """
    problems: list[str] = []
    if state.data.shape[0] != N_CHANNELS:
        problems.append(f"channel-count: expected {N_CHANNELS}, got {state.data.shape[0]}")
        return problems
    if state.data.shape[1:] != state.grid.shape:
        problems.append(f"grid-consistency: data shape {state.data.shape[1:]} "
                        f"!= grid shape {state.grid.shape}")
        return problems
    for k, (var, level) in enumerate(CHANNELS):
        plane = state.data[k]
        name = channel_name(var, level)
        if not np.isfinite(plane).all():
            problems.append(f"non-finite: {name} contains NaN/Inf")
            continue
        if check_ranges and var in RANGE_CHECKS:
            lo, hi = RANGE_CHECKS[var]
            pmin, pmax = float(plane.min()), float(plane.max())
            if pmin < lo or pmax > hi:
                problems.append(f"range: {name} in [{pmin:.6g}, {pmax:.6g}] "
                                f"outside [{lo:g}, {hi:g}]")
    return problems
