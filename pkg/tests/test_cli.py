import numpy as np
import pytest
import yaml

from nwpeval.archive import read_archive, read_header, write_archive
from nwpeval.cli import main
from nwpeval.grids import GridSpec
from nwpeval.synthetic import make_state
from tests.conftest import random_state


@pytest.fixture
def archive_path(tmp_path, small_grid):
    s = random_state(small_grid, seed=50, label="gfs")
    p = tmp_path / "state.nws"
    write_archive(s, str(p))
    return p


class TestInspect:
    def test_prints_header(self, archive_path, capsys):
        assert main(["inspect", str(archive_path)]) == 0
        out = capsys.readouterr().out
        assert "source_label: gfs" in out
        assert "n_channels: 69" in out

    def test_missing_file(self, tmp_path):
        assert main(["inspect", str(tmp_path / "nope.nws")]) == 2


class TestUsageErrors:
    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_flag_suggestion(self, archive_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["inspect", str(archive_path), "--verbos"])
        assert exc.value.code == 2
        assert "did you mean" in capsys.readouterr().err

    def test_run_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2


class TestIngestRegrid:
    def test_ingest_then_inspect(self, tmp_path, small_grid, capsys):
        s = random_state(small_grid, seed=51)
        raw = tmp_path / "dump.bin"
        raw.write_bytes(np.ascontiguousarray(s.data, dtype="<f4").tobytes())
        out = tmp_path / "out.nws"
        g = small_grid
        rc = main(["ingest", "--in", str(raw), "--out", str(out),
                   "--grid", f"{g.nlat},{g.nlon},{g.lat_start},{g.dlat},{g.lon_start},{g.dlon}",
                   "--valid-time", "2023-06-06T00:00:00Z", "--label", "gfs",
                   "--skip-validation"])
        assert rc == 0
        assert np.array_equal(read_archive(str(out)).data, s.data)

    def test_regrid_to_named_grid(self, archive_path, tmp_path):
        out = tmp_path / "regridded.nws"
        rc = main(["regrid", "--in", str(archive_path), "--out", str(out),
                   "--grid", "19,36,90,10,0,10"])
        assert rc == 0
        h = read_header(str(out))
        assert (h["nlat"], h["nlon"]) == (19, 36)


class TestSplice:
    def test_splice_label_and_values(self, tmp_path, small_grid, capsys):
        base = random_state(small_grid, seed=52, label="a")
        donor = random_state(small_grid, seed=53, label="b")
        bp, dp, op = (tmp_path / n for n in ("base.nws", "donor.nws", "out.nws"))
        write_archive(base, str(bp))
        write_archive(donor, str(dp))
        rc = main(["splice", "--base", str(bp), "--donor", str(dp),
                   "--box", "-10,60,60,150", "--out", str(op)])
        assert rc == 0
        assert main(["inspect", str(op)]) == 0
        assert "source_label: bpada" in capsys.readouterr().out


class TestRolloutEvaluatePlot:
    def test_end_to_end(self, tmp_path, small_grid, capsys):
        ic = make_state(small_grid, seed=54, source_label="gfs")
        icp = tmp_path / "ic.nws"
        write_archive(ic, str(icp))
        fdir = tmp_path / "fc"
        rc = main(["rollout", "--in", str(icp), "--out-dir", str(fdir),
                   "--lead", "72", "--emit-every", "24",
                   "--backend", "persistence"])
        assert rc == 0
        assert sorted(p.name for p in fdir.iterdir()) == [
            "forecast_024h.nws", "forecast_048h.nws", "forecast_072h.nws"]

        # truth = the IC itself (persistence is then a perfect forecast)
        from datetime import timedelta
        for lead in (24, 48, 72):
            t = ic.replace(valid_time=ic.valid_time + timedelta(hours=lead),
                           source_label="era5")
            write_archive(t, str(tmp_path / f"truth_{lead}.nws"))
        from nwpeval.synthetic import make_climatology
        write_archive(make_climatology(small_grid), str(tmp_path / "clim.nws"))
        csv = tmp_path / "metrics.csv"
        rc = main(["evaluate",
                   "--forecast-pattern", str(fdir / "forecast_{lead:03d}h.nws"),
                   "--truth-pattern", str(tmp_path / "truth_{lead}.nws"),
                   "--climatology", str(tmp_path / "clim.nws"),
                   "--leads", "24,48,72", "--out", str(csv)])
        assert rc == 0
        from nwpeval.plots import read_metric_csv
        rows = read_metric_csv(str(csv))
        assert len(rows) == 9 * 2 * 3 * 2
        assert all(float(r["value"]) == 0.0 for r in rows if r["metric"] == "RMSE")

        pdir = tmp_path / "plots"
        assert main(["plot", "--csv", str(csv), "--out-dir", str(pdir)]) == 0
        assert len(list(pdir.glob("*.svg"))) == 9 * 2 * 2


class TestRunSubcommand:
    def test_full_run(self, tmp_path, small_grid, capsys):
        from tests.test_experiment import build_inputs
        labels = build_inputs(tmp_path, small_grid)
        doc = {
            "name": "cli-run",
            "init_time": "2023-06-06T00:00:00Z",
            "grid": {"nlat": small_grid.nlat, "nlon": small_grid.nlon,
                     "lat_start": small_grid.lat_start, "dlat": small_grid.dlat,
                     "lon_start": small_grid.lon_start, "dlon": small_grid.dlon},
            "ic_sources": [{"label": lb, "path": f"{lb}.nws"} for lb in labels],
            "truth": "truth_{lead}.nws",
            "climatology": "clim.nws",
            "lead_hours": [24, 48],
            "output_dir": "out",
            "workers": 1,
        }
        cfg = tmp_path / "exp.yaml"
        cfg.write_text(yaml.safe_dump(doc))
        assert main(["run", "--config", str(cfg)]) == 0
        assert (tmp_path / "out" / "metrics.csv").exists()
        out = capsys.readouterr().out
        assert "config sha256" in out
