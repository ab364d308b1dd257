"""Bit-exact binary archive for state sets (.nws files) and ingestion of
headerless float32 dumps exported from external NWP products.

Archive layout (all multi-byte values little-endian):

    magic        8 bytes  "NWPSTAT1"
    version      u32
    nlat, nlon   u32 each
    lat_start, dlat, lon_start, dlon   f64 each
    valid_time   i64   seconds since the Unix epoch, UTC
    source_label u16 length + UTF-8 bytes
    n_channels   u32
    per channel: var_code u16, level u16 (hPa, 0 = surface)
    payload:     n_channels planes of f32-le, each nlat*nlon row-major,
                 row 0 = northmost latitude

The channel list must be the canonical 69-channel order; anything else is
rejected on read.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import BinaryIO, Sequence, Union

import numpy as np

from .grids import (CHANNELS, N_CHANNELS, GridSpec, StateSet, Var,
                    channel_name, flat_channel_index, state_channel_index)

MAGIC = b"NWPSTAT1"
VERSION = 1

_FIXED_HEAD = struct.Struct("<8sIII4dq")   # magic, version, nlat, nlon, geo, time
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_CHAN = struct.Struct("<HH")

_CANONICAL_CODES = tuple((v.value, lvl) for v, lvl in CHANNELS)


class ArchiveError(Exception):
    """Base class for archive read/write failures."""


class FormatError(ArchiveError):
    """Bad magic, version, or header structure."""


class TruncationError(ArchiveError):
    """Payload shorter than the header promises."""


class UnsupportedLayoutError(ArchiveError):
    """Channel list is not the canonical order."""


def payload_size(grid: GridSpec, n_channels: int = N_CHANNELS) -> int:
    """Byte size of the channel planes following the header."""
    return n_channels * grid.nlat * grid.nlon * 4


def write_archive(state: StateSet, dest: Union[BinaryIO, str]) -> None:
    """Serialize a state to an archive. Byte output is a pure function of
    the state: identical inputs give identical files."""
    if isinstance(dest, (str, bytes)):
        with open(dest, "wb") as fh:
            write_archive(state, fh)
        return
    label = state.source_label.encode("utf-8")
    if len(label) > 0xFFFF:
        raise ValueError("source_label too long")
    g = state.grid
    epoch = int(state.valid_time.timestamp())
    dest.write(_FIXED_HEAD.pack(MAGIC, VERSION, g.nlat, g.nlon,
                                g.lat_start, g.dlat, g.lon_start, g.dlon, epoch))
    dest.write(_U16.pack(len(label)))
    dest.write(label)
    dest.write(_U32.pack(N_CHANNELS))
    for code, lvl in _CANONICAL_CODES:
        dest.write(_CHAN.pack(code, lvl))
    data = np.ascontiguousarray(state.data, dtype="<f4")
    dest.write(data.tobytes())


def _read_exact(src: BinaryIO, n: int, what: str) -> bytes:
    buf = src.read(n)
    if len(buf) != n:
        raise TruncationError(f"unexpected end of file while reading {what}")
    return buf


def read_archive(src: Union[BinaryIO, str]) -> StateSet:
    """Exact inverse of write_archive."""
    if isinstance(src, (str, bytes)):
        with open(src, "rb") as fh:
            return read_archive(fh)
    head = _read_exact(src, _FIXED_HEAD.size, "header")
    magic, version, nlat, nlon, lat_start, dlat, lon_start, dlon, epoch = \
        _FIXED_HEAD.unpack(head)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    (label_len,) = _U16.unpack(_read_exact(src, 2, "label length"))
    label = _read_exact(src, label_len, "source label").decode("utf-8")
    (n_channels,) = _U32.unpack(_read_exact(src, 4, "channel count"))
    codes = []
    for k in range(n_channels):
        codes.append(_CHAN.unpack(_read_exact(src, 4, f"channel descriptor {k}")))
    if tuple(codes) != _CANONICAL_CODES:
        raise UnsupportedLayoutError("channel list is not the canonical 69-channel order")
    grid = GridSpec(nlat=nlat, nlon=nlon, lat_start=lat_start, dlat=dlat,
                    lon_start=lon_start, dlon=dlon)
    plane_bytes = nlat * nlon * 4
    raw = src.read(n_channels * plane_bytes)
    if len(raw) != n_channels * plane_bytes:
        bad = len(raw) // plane_bytes
        var, lvl = CHANNELS[min(bad, n_channels - 1)]
        raise TruncationError(
            f"payload truncated in channel {channel_name(var, lvl)} "
            f"({len(raw)} of {n_channels * plane_bytes} bytes)")
    data = np.frombuffer(raw, dtype="<f4").reshape(n_channels, nlat, nlon)
    return StateSet(valid_time=datetime.fromtimestamp(epoch, tz=timezone.utc),
                    source_label=label, grid=grid, data=data.copy())


def read_header(src: Union[BinaryIO, str]) -> dict:
    """Parse only the header; used by the CLI `inspect` subcommand."""
    if isinstance(src, (str, bytes)):
        with open(src, "rb") as fh:
            return read_header(fh)
    head = _read_exact(src, _FIXED_HEAD.size, "header")
    magic, version, nlat, nlon, lat_start, dlat, lon_start, dlon, epoch = \
        _FIXED_HEAD.unpack(head)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    (label_len,) = _U16.unpack(_read_exact(src, 2, "label length"))
    label = _read_exact(src, label_len, "source label").decode("utf-8")
    (n_channels,) = _U32.unpack(_read_exact(src, 4, "channel count"))
    return {
        "version": version,
        "nlat": nlat, "nlon": nlon,
        "lat_start": lat_start, "dlat": dlat,
        "lon_start": lon_start, "dlon": dlon,
        "valid_time": datetime.fromtimestamp(epoch, tz=timezone.utc),
        "source_label": label,
        "n_channels": n_channels,
    }


ChannelList = Sequence[tuple[Var, int]]


@dataclass(frozen=True)
class RawDumpLayout:
    """Layout of a headerless f32-le dump.

    channel_order: "canonical" or an explicit (variable, level) sequence
    covering all 69 channels. scan: "north-first" rows as stored, or
    "south-first" rows to be reversed on ingest.
    """

    channel_order: Union[str, ChannelList] = "canonical"
    scan: str = "north-first"

    def __post_init__(self):
        if self.scan not in ("north-first", "south-first"):
            raise ValueError(f"unknown scan order {self.scan!r}")
        if isinstance(self.channel_order, str):
            if self.channel_order != "canonical":
                raise ValueError(f"unknown channel order {self.channel_order!r}")
        else:
            order = tuple(self.channel_order)
            for var, lvl in order:
                state_channel_index(var, lvl)
            if len(set(order)) != N_CHANNELS:
                raise ValueError("explicit channel order must cover all 69 channels once")
            object.__setattr__(self, "channel_order", order)


class LayoutError(ArchiveError):
    """Raw dump size does not match the declared layout."""


class DataError(ArchiveError):
    """Raw dump contains non-finite values."""


def ingest_raw(path: str, grid: GridSpec, layout: RawDumpLayout,
               valid_time: datetime, source_label: str,
               nan_policy: str = "error") -> StateSet:
    """Load a raw dump into a canonical-order, north-first state.

    nan_policy: "error" raises on NaN in the payload, "warn" only logs.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    expected = payload_size(grid)
    if len(raw) != expected:
        raise LayoutError(f"{path}: payload is {len(raw)} bytes, "
                          f"layout requires {expected}")
    data = np.frombuffer(raw, dtype="<f4").reshape(N_CHANNELS, grid.nlat, grid.nlon)
    if layout.channel_order != "canonical":
        perm = np.empty(N_CHANNELS, dtype=np.intp)
        for pos, (var, lvl) in enumerate(layout.channel_order):
            perm[flat_channel_index(var, lvl)] = pos
        data = data[perm]
    if layout.scan == "south-first":
        data = data[:, ::-1, :]
    if not np.isfinite(data).all():
        if nan_policy == "error":
            raise DataError(f"{path}: payload contains NaN/Inf")
        import logging
        logging.getLogger(__name__).warning("%s: payload contains NaN/Inf", path)
    return StateSet(valid_time=valid_time, source_label=source_label,
                    grid=grid, data=np.ascontiguousarray(data))


def archive_bytes(state: StateSet) -> bytes:
    """Serialize to bytes in memory (used for determinism hashing)."""
    buf = io.BytesIO()
    write_archive(state, buf)
    return buf.getvalue()
