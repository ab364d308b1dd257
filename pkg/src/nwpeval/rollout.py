"""Autoregressive forecast driver.

Decomposes a requested lead time into backend step sizes, invokes the
backend once per step, and collects the emitted states. Backends are
either builtin desk-scale surrogates (persistence, eastward advection)
or an external command speaking the subprocess protocol:

    <command> --in <state.nws> --out <state.nws> --step-hours <H>

The external process reads the input archive, writes the forecast state
for lead H as an archive on the same grid, and exits 0.
"""

from __future__ import annotations

import hashlib
import logging
import math
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Optional

import numpy as np

from .archive import archive_bytes, read_archive, write_archive
from .grids import GridSpec, StateSet

log = logging.getLogger(__name__)

DEFAULT_HORIZONS = frozenset({24})


class RolloutError(RuntimeError):
    """A backend step failed or produced an unusable state."""


class UnreachableLeadError(ValueError):
    """The requested lead cannot be decomposed into backend horizons."""


@dataclass(frozen=True)
class RolloutPlan:
    """Ordered step sizes in hours; they sum to the requested lead."""

    steps: tuple[int, ...]

    @property
    def lead_hours(self) -> int:
        return sum(self.steps)

    def cumulative_leads(self) -> tuple[int, ...]:
        out, acc = [], 0
        for s in self.steps:
            acc += s
            out.append(acc)
        return tuple(out)


@dataclass(frozen=True)
class BackendSpec:
    """Forecast backend description.

    kind: "builtin" or "external-command". Builtins: "persistence" or
    "advection" (circular eastward shift of advection_cells per step).
    External backends supply the command prefix as a string.
    """

    kind: str = "builtin"
    builtin: str = "persistence"
    advection_cells: int = 1
    command: Optional[str] = None
    horizons: frozenset = field(default_factory=lambda: DEFAULT_HORIZONS)

    def __post_init__(self):
        if self.kind not in ("builtin", "external-command"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "builtin" and self.builtin not in ("persistence", "advection"):
            raise ValueError(f"unknown builtin backend {self.builtin!r}")
        if self.kind == "external-command" and not self.command:
            raise ValueError("external backend requires a command")
        if not self.horizons:
            raise ValueError("backend must declare at least one horizon")
        object.__setattr__(self, "horizons", frozenset(int(h) for h in self.horizons))


def schedule_steps(lead: int, horizons) -> RolloutPlan:
    """Greedy largest-first decomposition of the lead into horizons.

    Minimizes the step count for divisor-chain horizon sets such as
    {24, 6, 3, 1}.
    """
    horizons = sorted({int(h) for h in horizons}, reverse=True)
    if not horizons:
        raise ValueError("horizons must be nonempty")
    if lead < 0:
        raise ValueError("lead must be >= 0")
    g = 0
    for h in horizons:
        g = math.gcd(g, h)
    if lead % g != 0:
        raise UnreachableLeadError(f"lead {lead} not divisible by gcd {g} of horizons")
    steps = []
    remaining = lead
    while remaining > 0:
        step = next((h for h in horizons if h <= remaining), None)
        if step is None:
            raise UnreachableLeadError(
                f"no decomposition of lead {lead} into horizons {horizons}")
        steps.append(step)
        remaining -= step
    return RolloutPlan(steps=tuple(steps))


def builtin_step(state: StateSet, backend: BackendSpec, step_hours: int) -> StateSet:
    """One builtin forecast step; advances valid_time by step_hours."""
    t = state.valid_time + timedelta(hours=step_hours)
    if backend.builtin == "persistence":
        return state.replace(valid_time=t)
    data = np.roll(state.data, backend.advection_cells, axis=2)
    return state.replace(valid_time=t, data=data)


def _external_step(state: StateSet, backend: BackendSpec, step_hours: int,
                   workdir: Path, step_no: int) -> StateSet:
    workdir.mkdir(parents=True, exist_ok=True)
    in_path = workdir / f"step{step_no:03d}_in.nws"
    out_path = workdir / f"step{step_no:03d}_out.nws"
    write_archive(state, str(in_path))
    cmd = shlex.split(backend.command) + [
        "--in", str(in_path), "--out", str(out_path), "--step-hours", str(step_hours)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.stderr:
        log.info("backend step %d stderr: %s", step_no, proc.stderr.strip())
    if proc.returncode != 0:
        raise RolloutError(f"backend failed at step {step_no} "
                           f"(+{step_hours}h): exit {proc.returncode}")
    try:
        out = read_archive(str(out_path))
    except Exception as exc:
        raise RolloutError(f"backend wrote a malformed archive at step {step_no}: {exc}")
    if out.grid != state.grid:
        raise RolloutError(f"backend changed the grid at step {step_no}")
    return out


def run_rollout(ic: StateSet, backend: BackendSpec, plan: RolloutPlan,
                emit_leads, verify_determinism: bool = False,
                workdir: Optional[str] = None) -> list[tuple[int, StateSet]]:
    """Drive the backend along the plan; return [(lead_hours, state), ...]
    for the requested leads in increasing order.

    External backends require the canonical 721x1440 grid. Every emitted
    state is checked for NaN/Inf.
    """
    emit_leads = set(int(h) for h in emit_leads)
    cumulative = plan.cumulative_leads()
    reachable = set(cumulative) | {0}
    bad = emit_leads - reachable
    if bad:
        raise ValueError(f"emit leads {sorted(bad)} are not on the plan {plan.steps}")
    if backend.kind == "external-command" and ic.grid != GridSpec.canonical():
        raise RolloutError("external backends require the canonical 721x1440 grid")

    series: list[tuple[int, StateSet]] = []
    if 0 in emit_leads:
        series.append((0, ic))
    tmp = None
    work = None
    if backend.kind == "external-command":
        if workdir is None:
            tmp = tempfile.TemporaryDirectory(prefix="nwpeval-rollout-")
            work = Path(tmp.name)
        else:
            work = Path(workdir)
            work.mkdir(parents=True, exist_ok=True)
    try:
        state = ic
        for n, (step, lead) in enumerate(zip(plan.steps, cumulative), start=1):
            if backend.kind == "builtin":
                state = builtin_step(state, backend, step)
            else:
                state = _external_step(state, backend, step, work, n)
            if verify_determinism and n == 1:
                if backend.kind == "builtin":
                    repeat = builtin_step(ic, backend, step)
                else:
                    repeat = _external_step(ic, backend, step, work / "redo", 1)
                h1 = hashlib.sha256(archive_bytes(state)).hexdigest()
                h2 = hashlib.sha256(archive_bytes(repeat)).hexdigest()
                if h1 != h2:
                    log.warning("backend is not deterministic: step-1 hashes "
                                "%s vs %s", h1, h2)
            if not np.isfinite(state.data).all():
                raise RolloutError(f"backend produced NaN/Inf at step {n} (+{step}h)")
            if lead in emit_leads:
                series.append((lead, state.replace(
                    valid_time=ic.valid_time + timedelta(hours=lead),
                    source_label=ic.source_label)))
    finally:
        if tmp is not None:
            tmp.cleanup()
    return series
