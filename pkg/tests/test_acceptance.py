"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Run with `pytest tests/test_acceptance.py -v -s`."""

import io
import itertools
import math
import time
from datetime import timedelta

import numpy as np
import pytest

from nwpeval.archive import archive_bytes, payload_size, read_archive, write_archive
from nwpeval.experiment import ExperimentConfig, ICSource, SpliceScenario, run_experiment
from nwpeval.grids import (EAST_ASIA, GLOBAL, N_SURFACE, GridSpec, RegionBox,
                           StateSet, Var)
from nwpeval.plots import read_metric_csv
from nwpeval.regrid import apply_plan, build_plan, regrid_state
from nwpeval.rollout import BackendSpec, schedule_steps
from nwpeval.splice import SpliceSpec, region_mask, splice_states
from nwpeval.synthetic import default_time, make_climatology, make_state, perturb
from nwpeval.verify import acc_weighted, lat_weights, rmse_weighted
from tests.conftest import random_state
from tests.test_verify import brute_force_acc, brute_force_rmse


def report(criterion: str, ok: bool):
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}")
    assert ok, criterion


def _random_grid(rng):
    nlat = int(rng.integers(2, 17))
    nlon = int(rng.integers(2, 33))
    return GridSpec(nlat=nlat, nlon=nlon, lat_start=90.0,
                    dlat=180.0 / max(nlat, 2), lon_start=0.0, dlon=360.0 / nlon)


def test_1_metric_oracle_equivalence():
    """200 random grids up to 16x32: both metrics match a brute-force f64
    loop within 1e-12 relative; runtime < 5 s."""
    rng = np.random.default_rng(2023)
    t0 = time.monotonic()
    ok = True
    for _ in range(200):
        g = _random_grid(rng)
        mask = rng.random(g.shape) < 0.6
        if not mask.any():
            mask[g.nlat // 2, 0] = True
        w = lat_weights(g, mask)
        f = rng.standard_normal(g.shape).astype(np.float32)
        o = rng.standard_normal(g.shape).astype(np.float32)
        c = rng.standard_normal(g.shape).astype(np.float32)
        want = brute_force_rmse(f, o, g, mask)
        ok &= abs(rmse_weighted(f, o, w) - want) <= 1e-12 * max(abs(want), 1.0)
        want = brute_force_acc(f, o, c, g, mask)
        ok &= abs(acc_weighted(f, o, c, w) - want) <= 1e-12 * max(abs(want), 1.0)
    elapsed = time.monotonic() - t0
    ok &= elapsed < 5.0
    report(f"1 metric-oracle-equivalence ({elapsed:.2f}s)", ok)


def test_2_constant_offset_rmse():
    """RMSE(o+c, o) = |c| within 1e-9 for global and East-Asia masks."""
    g = GridSpec(nlat=73, nlon=144, lat_start=90, dlat=2.5, lon_start=0, dlon=2.5)
    rng = np.random.default_rng(7)
    o = rng.standard_normal(g.shape)
    ok = True
    for box in (GLOBAL, EAST_ASIA):
        w = lat_weights(g, region_mask(g, box))
        for c in (-17.25, -1.0, 0.5, 3.0, 123.456):
            ok &= abs(rmse_weighted(o + c, o, w) - abs(c)) < 1e-9
    report("2 constant-offset-rmse", ok)


def test_3_acc_bounds_and_symmetry():
    """ACC in [-1,1] on random trials; ACC = 1 for a perfect forecast;
    negating one anomaly negates ACC within 1e-12."""
    rng = np.random.default_rng(11)
    ok = True
    for _ in range(100):
        g = _random_grid(rng)
        mask = rng.random(g.shape) < 0.8
        if not mask.any():
            mask[0, 0] = True
        w = lat_weights(g, mask)
        c = rng.standard_normal(g.shape)
        af = rng.standard_normal(g.shape)
        ao = rng.standard_normal(g.shape)
        acc = acc_weighted(c + af, c + ao, c, w)
        ok &= -1.0 - 1e-12 <= acc <= 1.0 + 1e-12
        ok &= abs(acc_weighted(c + ao, c + ao, c, w) - 1.0) < 1e-12
        ok &= abs(acc_weighted(c - af, c + ao, c, w) + acc) < 1e-12
    report("3 acc-bounds-and-symmetry", ok)


def test_4_regrid_exactness():
    """Identity regrid bitwise; affine fields within 1e-5 at interior
    points; partition of unity within 1e-12 on a canonical-grid plan;
    69-channel canonical plan build + apply < 30 s."""
    ok = True
    # identity, bitwise
    g = GridSpec(nlat=37, nlon=72, lat_start=90, dlat=5, lon_start=0, dlon=5)
    s = random_state(g, seed=40)
    plan = build_plan(g, g)
    ok &= np.array_equal(apply_plan(plan, s.field(Var.T2)).values,
                         s.channel(Var.T2))
    # affine exactness on a non-wrapping subregion
    src = GridSpec(nlat=25, nlon=31, lat_start=60, dlat=5, lon_start=0, dlon=5)
    dst = GridSpec(nlat=45, nlon=59, lat_start=57.5, dlat=2.5, lon_start=2.5, dlon=2.5)
    from nwpeval.grids import Field
    a, b = 2.0, 3.0
    fld = Field(variable=Var.T2, level=0, grid=src,
                values=(a * src.latitudes()[:, None] + b * src.longitudes()[None, :]))
    out = apply_plan(build_plan(src, dst), fld)
    expect = a * dst.latitudes()[:, None] + b * dst.longitudes()[None, :]
    ok &= float(np.max(np.abs(out.values - expect))) <= 1e-5
    # partition of unity on a canonical-grid plan
    coarse = GridSpec(nlat=181, nlon=360, lat_start=90, dlat=1, lon_start=0, dlon=1)
    plan_c = build_plan(coarse, GridSpec.canonical())
    w4 = (plan_c.wlat[:, None] * plan_c.wlon[None, :]
          + plan_c.wlat[:, None] * (1 - plan_c.wlon[None, :])
          + (1 - plan_c.wlat[:, None]) * plan_c.wlon[None, :]
          + (1 - plan_c.wlat[:, None]) * (1 - plan_c.wlon[None, :]))
    ok &= float(np.max(np.abs(w4 - 1.0))) <= 1e-12
    # timing: full 69-channel state to the canonical grid
    state = make_state(coarse, seed=41)
    t0 = time.monotonic()
    regridded = regrid_state(state, GridSpec.canonical())
    elapsed = time.monotonic() - t0
    ok &= regridded.grid == GridSpec.canonical()
    ok &= elapsed < 30.0
    report(f"4 regrid-exactness ({elapsed:.2f}s for 69 channels)", ok)


def test_5_splice_correctness():
    """East Asia mask count on the canonical grid; hard splice changes
    exactly 65 x mask-count values; locality and idempotence bitwise."""
    ok = True
    mask = region_mask(GridSpec.canonical(), EAST_ASIA)
    n_mask = int(mask.sum())
    ok &= n_mask == 281 * 361 == 101_441
    # counting on the small grid (donor differs everywhere by construction)
    g = GridSpec(nlat=73, nlon=144, lat_start=90, dlat=2.5, lon_start=0, dlon=2.5)
    base = random_state(g, seed=50, label="gfs")
    donor = base.replace(data=base.data + np.float32(1.0), source_label="ifs")
    spec = SpliceSpec(region=EAST_ASIA)
    out = splice_states(base, donor, spec)
    small_mask_n = int(region_mask(g, EAST_ASIA).sum())
    ok &= int((out.data != base.data).sum()) == 65 * small_mask_n
    # locality: outside the box everything is bitwise base
    outside = ~region_mask(g, EAST_ASIA)
    ok &= bool((out.data[:, outside] == base.data[:, outside]).all())
    # surface untouched
    ok &= bool((out.data[:N_SURFACE] == base.data[:N_SURFACE]).all())
    # idempotence
    again = splice_states(out, donor, spec)
    ok &= np.array_equal(again.data, out.data)
    report("5 splice-correctness", ok)


def test_6_scheduler():
    """schedule(240,{24}) = ten 24h steps; schedule(31,{24,6,3,1}) =
    [24,6,1], minimal by exhaustive search."""
    ok = schedule_steps(240, {24}).steps == (24,) * 10
    plan = schedule_steps(31, {24, 6, 3, 1})
    ok &= plan.steps == (24, 6, 1)
    best = None
    for n in range(1, 7):
        for combo in itertools.combinations_with_replacement((1, 3, 6, 24), n):
            if sum(combo) == 31:
                best = n
                break
        if best:
            break
    ok &= len(plan.steps) == best == 3
    report("6 scheduler", ok)


def test_7_regional_splice_improves_regional_forecast(tmp_path):
    """Synthetic reproduction of the regional-splice finding: with truth
    as donor, the spliced IC gives zero East-Asia RMSE for all upper
    channels at all ten leads, and strictly lower global RMSE than the
    noisy base IC. Full pipeline on a 73x144 grid < 60 s."""
    t0 = time.monotonic()
    g = GridSpec(nlat=73, nlon=144, lat_start=90, dlat=2.5, lon_start=0, dlon=2.5)
    leads = tuple(range(24, 241, 24))
    truth = make_state(g, seed=60, source_label="era5")
    for lead in leads:
        write_archive(truth.replace(valid_time=truth.valid_time + timedelta(hours=lead)),
                      str(tmp_path / f"truth_{lead}.nws"))
    write_archive(make_climatology(g), str(tmp_path / "clim.nws"))
    base = perturb(truth, seed=61, source_label="noisy")
    write_archive(base, str(tmp_path / "noisy.nws"))
    write_archive(truth.replace(source_label="clean"), str(tmp_path / "clean.nws"))

    upper_channels = tuple((v, l) for v in (Var.Z, Var.Q, Var.T, Var.U, Var.V)
                           for l in (1000, 925, 850, 700, 600, 500, 400, 300,
                                     250, 200, 150, 100, 50))
    config = ExperimentConfig(
        name="splice-acceptance",
        init_time=default_time(),
        ic_sources=(ICSource(label="noisy", path=str(tmp_path / "noisy.nws")),
                    ICSource(label="clean", path=str(tmp_path / "clean.nws"))),
        truth_pattern=str(tmp_path / "truth_{lead}.nws"),
        climatology_path=str(tmp_path / "clim.nws"),
        backend=BackendSpec(builtin="persistence"),
        output_dir=str(tmp_path / "out"),
        lead_hours=leads,
        splice_scenarios=(SpliceScenario(label="cleanpadnoisy",
                                         base_source="noisy",
                                         donor_source="clean",
                                         spec=SpliceSpec(region=EAST_ASIA)),),
        report_channels=upper_channels,
        model_grid=g,
        workers=2,
    )
    report_obj = run_experiment(config)
    ok = report_obj.failures == {}
    rows = read_metric_csv(str(report_obj.csv_path))
    rmse = {(r["source"], r["variable"], r["level"], r["region"],
             int(r["lead_hours"])): float(r["value"])
            for r in rows if r["metric"] == "RMSE"}
    for (v, l) in upper_channels:
        for lead in leads:
            ok &= rmse[("cleanpadnoisy", v.name, str(l), "east_asia", lead)] == 0.0
            ok &= rmse[("noisy", v.name, str(l), "east_asia", lead)] > 0.0
            ok &= (rmse[("cleanpadnoisy", v.name, str(l), "global", lead)]
                   < rmse[("noisy", v.name, str(l), "global", lead)])
    elapsed = time.monotonic() - t0
    ok &= elapsed < 60.0
    report(f"7 regional-splice-improves-regional-forecast ({elapsed:.1f}s)", ok)


def test_8_archive_round_trip():
    """100 random states survive read(write(s)) bitwise; canonical-grid
    payload size equals 69 planes of 721x1440 float32."""
    rng = np.random.default_rng(88)
    ok = True
    for n in range(100):
        nlat = int(rng.integers(2, 10))
        nlon = int(rng.integers(2, 14))
        g = GridSpec(nlat=nlat, nlon=nlon, lat_start=90.0,
                     dlat=180.0 / nlat, lon_start=0.0, dlon=360.0 / nlon)
        s = random_state(g, seed=int(rng.integers(0, 1 << 31)), label=f"s{n}")
        out = read_archive(io.BytesIO(archive_bytes(s)))
        ok &= (out.valid_time == s.valid_time and out.source_label == s.source_label
               and out.grid == s.grid and np.array_equal(out.data, s.data))
    # 69 * 721 * 1440 * 4 bytes of payload after the header
    ok &= payload_size(GridSpec.canonical()) == 69 * 721 * 1440 * 4 == 286_554_240
    report("8 archive-round-trip", ok)


def test_9_report_shape(tmp_path):
    """2 sources x 2 regions x 10 leads x 9 channels -> 720 CSV rows and
    36 SVG plots; rerunning produces byte-identical outputs."""
    g = GridSpec(nlat=37, nlon=72, lat_start=90, dlat=5, lon_start=0, dlon=5)
    leads = tuple(range(24, 241, 24))
    truth = make_state(g, seed=90, source_label="era5")
    for lead in leads:
        write_archive(truth.replace(valid_time=truth.valid_time + timedelta(hours=lead)),
                      str(tmp_path / f"truth_{lead}.nws"))
    write_archive(make_climatology(g), str(tmp_path / "clim.nws"))
    for label, seed in (("gfs", 91), ("ifs", 92)):
        write_archive(perturb(truth, seed=seed, source_label=label),
                      str(tmp_path / f"{label}.nws"))
    config = ExperimentConfig(
        name="shape-acceptance",
        init_time=default_time(),
        ic_sources=(ICSource(label="gfs", path=str(tmp_path / "gfs.nws")),
                    ICSource(label="ifs", path=str(tmp_path / "ifs.nws"))),
        truth_pattern=str(tmp_path / "truth_{lead}.nws"),
        climatology_path=str(tmp_path / "clim.nws"),
        backend=BackendSpec(builtin="persistence"),
        output_dir=str(tmp_path / "out"),
        lead_hours=leads,
        model_grid=g,
        workers=2,
    )
    r1 = run_experiment(config)
    ok = r1.failures == {}
    rows = read_metric_csv(str(r1.csv_path))
    ok &= len(rows) == 2 * 9 * 2 * 10 * 2 == 720
    ok &= len(r1.plot_files) == 9 * 2 * 2 == 36
    csv1 = r1.csv_path.read_bytes()
    svgs1 = {p.name: p.read_bytes() for p in r1.plot_files}
    r2 = run_experiment(config)
    ok &= r2.csv_path.read_bytes() == csv1
    ok &= all(p.read_bytes() == svgs1[p.name] for p in r2.plot_files)
    report("9 report-shape", ok)
