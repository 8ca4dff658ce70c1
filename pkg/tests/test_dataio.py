import json
import stat
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramanforge import dataio
from ramanforge.cli import main
from ramanforge.core import ExternalToolError, RngStream, Spectrum, ValidationError, default_grid, make_grid
from ramanforge.noisemodel import DarkStats, estimate_dark_stats
from ramanforge.synth import TargetRanges, gen_dataset


def _dark(grid, variance=3.0):
    return DarkStats(grid, np.zeros(grid.n_points), np.full(grid.n_points, variance), 0.1, 50)


finite_floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


class TestSpectrumFiles:
    @given(values=st.lists(finite_floats, min_size=2, max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_round_trip_bit_exact(self, values, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("rt")
        grid = make_grid(0, 10, len(values))
        s = Spectrum(grid, np.asarray(values))
        dataio.write_spectrum(tmp / "s.csv", s)
        back = dataio.read_spectrum(tmp / "s.csv")
        assert back.grid == grid
        assert np.array_equal(back.values, s.values)

    def test_batch_round_trip_bit_exact(self, tmp_path):
        grid = default_grid()
        rng = np.random.default_rng(0)
        batch = rng.standard_normal((7, 693)) * 10.0 ** rng.integers(-12, 12, size=(7, 1))
        dataio.write_batch(tmp_path / "b.csv", grid, batch)
        back_grid, back = dataio.read_batch(tmp_path / "b.csv")
        assert back_grid == grid
        assert np.array_equal(back, batch)

    def test_header_required(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("wn,value\n0,1\n1,2\n")
        with pytest.raises(ValidationError, match="header"):
            dataio.read_spectrum(p)

    def test_parse_error_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("wavenumber,intensity\n0,1\n1,oops\n")
        with pytest.raises(ValidationError, match="line 3"):
            dataio.read_spectrum(p)

    def test_column_count_error_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("wavenumber,spec_0\n0,1\n1,2,3\n")
        with pytest.raises(ValidationError, match="line 3"):
            dataio.read_batch(p)

    def test_decreasing_wavenumber_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("wavenumber,intensity\n1,1\n0,2\n")
        with pytest.raises(ValidationError, match="increasing"):
            dataio.read_spectrum(p)

    def test_nonuniform_grid_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("wavenumber,intensity\n0,1\n1,2\n3,3\n")
        with pytest.raises(ValidationError, match="uniform"):
            dataio.read_spectrum(p)


class TestDarkStatsFile:
    def test_round_trip(self, tmp_path):
        grid = default_grid()
        gen = RngStream(1).generator
        frames = [Spectrum(grid, gen.normal(10, 2, 693)) for _ in range(20)]
        stats = estimate_dark_stats(frames, 0.2)
        dataio.write_dark_stats(tmp_path / "d.json", stats)
        back = dataio.read_dark_stats(tmp_path / "d.json")
        assert back.grid == stats.grid
        assert np.array_equal(back.mean, stats.mean)
        assert np.array_equal(back.variance, stats.variance)
        assert back.integration_time == 0.2
        assert back.n_frames == 20

    def test_wrong_kind_rejected(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text(json.dumps({"kind": "other"}))
        with pytest.raises(ValidationError, match="dark_stats"):
            dataio.read_dark_stats(p)


@pytest.fixture
def dataset_dir(tmp_path):
    grid = default_grid()
    stats = _dark(grid)
    dataio.write_dark_stats(tmp_path / "dark.json", stats)
    examples = gen_dataset(4, grid, [stats], RngStream(42), n_workers=1)
    dataio.write_split(
        tmp_path, "test", examples, grid,
        root_seed=42, stream_base=0,
        dark_refs=[{"id": "0", "file": "dark.json", "integration_time": 0.1}],
        params=dataio.default_params(TargetRanges(), "gaussian", "raman"),
    )
    return tmp_path


class TestManifest:
    def test_valid_after_write(self, dataset_dir):
        manifest = dataio.read_manifest(dataset_dir)
        dataio.validate_manifest(manifest)  # must not raise
        assert manifest["splits"]["test"]["count"] == 4

    def test_missing_batch_file_named(self, dataset_dir):
        (dataset_dir / "pure_test.csv").unlink()
        manifest = dataio.read_manifest(dataset_dir)
        with pytest.raises(ValidationError, match="pure_test.csv"):
            dataio.validate_manifest(manifest)

    def test_unknown_dark_id_named(self, dataset_dir):
        manifest = dataio.read_manifest(dataset_dir)
        manifest["splits"]["test"]["examples"][2]["dark_id"] = "99"
        with pytest.raises(ValidationError, match="dark_id"):
            dataio.validate_manifest(manifest)

    def test_count_mismatch_detected(self, dataset_dir):
        manifest = dataio.read_manifest(dataset_dir)
        manifest["splits"]["test"]["count"] = 5
        with pytest.raises(ValidationError, match="count"):
            dataio.validate_manifest(manifest)

    def test_missing_dark_file_named(self, dataset_dir):
        (dataset_dir / "dark.json").unlink()
        manifest = dataio.read_manifest(dataset_dir)
        with pytest.raises(ValidationError, match="dark.json"):
            dataio.validate_manifest(manifest)


class TestMakeDenoiser:
    def test_identity_and_oracle(self):
        from ramanforge.evalkit import IdentityDenoiser, OracleDenoiser

        assert isinstance(dataio.make_denoiser("identity"), IdentityDenoiser)
        assert isinstance(dataio.make_denoiser("oracle"), OracleDenoiser)

    def test_sg_spec_applies(self):
        d = dataio.make_denoiser("sg:half_window=2,degree=2")
        grid = make_grid(0, 20, 21)
        x = 1.0 + 2.0 * grid.wavenumbers - 0.1 * grid.wavenumbers**2
        out = d(Spectrum(grid, x))
        assert np.abs(out.values - x).max() < 1e-9

    def test_unknown_method(self):
        with pytest.raises(ValidationError, match="unknown"):
            dataio.make_denoiser("fancy")

    def test_unknown_option(self):
        with pytest.raises(ValidationError):
            dataio.make_denoiser("sg:window=3")

    def test_bad_value(self):
        with pytest.raises(ValidationError):
            dataio.make_denoiser("wavelet:levels=abc")


EXT_OK = """#!{python}
import argparse, sys
sys.path[:0] = {path!r}
from ramanforge import dataio
p = argparse.ArgumentParser()
p.add_argument("--in", dest="inp"); p.add_argument("--out")
a = p.parse_args()
grid, batch = dataio.read_batch(a.inp)
dataio.write_batch(a.out, grid, batch * 0.5)
"""

EXT_BAD_SHAPE = """#!{python}
import argparse, sys
sys.path[:0] = {path!r}
from ramanforge import dataio
p = argparse.ArgumentParser()
p.add_argument("--in", dest="inp"); p.add_argument("--out")
a = p.parse_args()
grid, batch = dataio.read_batch(a.inp)
dataio.write_batch(a.out, grid, batch[:1])
"""

EXT_CRASH = """#!{python}
import sys
sys.exit(9)
"""


def _write_tool(tmp_path, name, template):
    tool = tmp_path / name
    tool.write_text(template.format(python=sys.executable, path=sys.path))
    tool.chmod(tool.stat().st_mode | stat.S_IEXEC)
    return tool


class TestExternalDenoiser:
    def test_round_trip_through_tool(self, tmp_path):
        tool = _write_tool(tmp_path, "half", EXT_OK)
        d = dataio.ExternalDenoiser([sys.executable, str(tool)])
        grid = make_grid(0, 9, 10)
        out = d.denoise_batch(np.ones((3, 10)), grid)
        assert np.allclose(out, 0.5)

    def test_shape_mismatch_names_file(self, tmp_path):
        tool = _write_tool(tmp_path, "bad", EXT_BAD_SHAPE)
        d = dataio.ExternalDenoiser([sys.executable, str(tool)])
        with pytest.raises(ExternalToolError, match="out.csv"):
            d.denoise_batch(np.ones((3, 10)), make_grid(0, 9, 10))

    def test_nonzero_exit(self, tmp_path):
        tool = _write_tool(tmp_path, "crash", EXT_CRASH)
        d = dataio.ExternalDenoiser([sys.executable, str(tool)])
        with pytest.raises(ExternalToolError, match="9"):
            d.denoise_batch(np.ones((2, 10)), make_grid(0, 9, 10))


class TestCli:
    def _make_dark(self, tmp_path):
        grid = default_grid()
        gen = RngStream(3).generator
        frames = gen.normal(10, 2, size=(50, 693))
        dataio.write_batch(tmp_path / "frames.csv", grid, frames)
        rc = main([
            "dark-stats", "--frames", str(tmp_path / "frames.csv"),
            "--itime", "0.1", "--out", str(tmp_path / "dark.json"),
        ])
        assert rc == 0
        return tmp_path / "dark.json"

    def test_dark_stats_roundtrip(self, tmp_path, capsys):
        dark_file = self._make_dark(tmp_path)
        stats = dataio.read_dark_stats(dark_file)
        assert stats.n_frames == 50
        assert stats.integration_time == 0.1

    def test_dark_stats_insufficient_frames(self, tmp_path):
        grid = default_grid()
        dataio.write_batch(tmp_path / "one.csv", grid, np.ones((1, 693)))
        rc = main([
            "dark-stats", "--frames", str(tmp_path / "one.csv"),
            "--itime", "0.1", "--out", str(tmp_path / "d.json"),
        ])
        assert rc == 1

    def test_simulate_requires_dark(self, tmp_path):
        rc = main([
            "simulate", "--count", "2", "--split", "train",
            "--seed", "1", "--out", str(tmp_path / "ds"),
        ])
        assert rc == 1

    def test_simulate_byte_identical(self, tmp_path):
        dark_file = self._make_dark(tmp_path)
        argv = lambda out: [
            "simulate", "--count", "5", "--split", "train",
            "--dark", str(dark_file), "--seed", "42", "--out", str(tmp_path / out),
        ]
        assert main(argv("a")) == 0
        assert main(argv("b")) == 0
        for name in ["manifest.json", "noisy_train.csv", "clean_train.csv", "pure_train.csv", "fluor_train.csv"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_missing_input_file_exit_2(self, tmp_path):
        rc = main([
            "denoise", "--method", "sg",
            "--in", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o.csv"),
        ])
        assert rc == 2

    def test_denoise_sg_reproduces_quadratic(self, tmp_path):
        grid = make_grid(0, 50, 51)
        x = grid.wavenumbers
        batch = np.stack([1 + x - 0.02 * x**2, 2 - 0.5 * x + 0.01 * x**2])
        dataio.write_batch(tmp_path / "q.csv", grid, batch)
        rc = main([
            "denoise", "--method", "sg", "--half-window", "2", "--degree", "2",
            "--in", str(tmp_path / "q.csv"), "--out", str(tmp_path / "o.csv"),
        ])
        assert rc == 0
        _, out = dataio.read_batch(tmp_path / "o.csv")
        assert np.abs(out - batch).max() < 1e-9

    def test_denoise_modpoly_baseline_only(self, tmp_path):
        grid = default_grid()
        t = (grid.wavenumbers - 600) / 1190.0
        batch = np.stack([5 + t - 0.5 * t**3, 2 + t**2])
        dataio.write_batch(tmp_path / "b.csv", grid, batch)
        rc = main([
            "denoise", "--method", "modpoly",
            "--in", str(tmp_path / "b.csv"), "--out", str(tmp_path / "o.csv"),
        ])
        assert rc == 0
        _, out = dataio.read_batch(tmp_path / "o.csv")
        assert np.abs(out).max() < 1e-5 * np.abs(batch).max()

    def test_denoise_external_failure_exit_3(self, tmp_path):
        tool = _write_tool(tmp_path, "crash", EXT_CRASH)
        grid = make_grid(0, 9, 10)
        dataio.write_batch(tmp_path / "in.csv", grid, np.ones((2, 10)))
        rc = main([
            "denoise", "--method", "external", "--cmd", f"{sys.executable} {tool}",
            "--in", str(tmp_path / "in.csv"), "--out", str(tmp_path / "o.csv"),
        ])
        assert rc == 3

    def test_eval_and_plot_pipeline(self, tmp_path):
        dark_file = self._make_dark(tmp_path)
        assert main([
            "simulate", "--count", "6", "--split", "test",
            "--dark", str(dark_file), "--seed", "7", "--out", str(tmp_path / "ds"),
        ]) == 0
        assert main([
            "eval", "snri", "--manifest", str(tmp_path / "ds"),
            "--denoiser", "identity", "--out", str(tmp_path / "r.json"), "--pairs", "3",
        ]) == 0
        report = json.loads((tmp_path / "r.json").read_text())
        assert all(rec["snri_db"] == 0.0 for rec in report["records"])
        assert main([
            "plot", "--report", str(tmp_path / "r.json"), "--out", str(tmp_path / "r.csv"),
        ]) == 0
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "r2f,snr_old,snr_new,snri_db"
        assert len(lines) == 4
        assert main([
            "eval", "peaks", "--manifest", str(tmp_path / "ds"),
            "--denoiser", "oracle", "--out", str(tmp_path / "p.json"),
        ]) == 0
        p = json.loads((tmp_path / "p.json").read_text())
        assert all(rec["missing_ratio"] == 0.0 for rec in p["records"])
        assert all(rec["artifact_ratio"] == 0.0 for rec in p["records"])

    def test_skin_pipeline(self, tmp_path):
        dark_file = self._make_dark(tmp_path)
        assert main(["make-basis", "--out", str(tmp_path / "basis")]) == 0
        assert main([
            "simulate-skin", "--count", "5", "--split", "test",
            "--basis", str(tmp_path / "basis"), "--dark", str(dark_file),
            "--seed", "11", "--out", str(tmp_path / "skinds"),
        ]) == 0
        assert main([
            "eval", "skin", "--manifest", str(tmp_path / "skinds"),
            "--denoiser", "oracle", "--out", str(tmp_path / "s.json"),
        ]) == 0
        report = json.loads((tmp_path / "s.json").read_text())
        assert report["mse"] == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(report["bands"]["all"]["slopes"], 1.0, atol=1e-6)
        assert main([
            "plot", "--report", str(tmp_path / "s.json"), "--out", str(tmp_path / "s.csv"),
        ]) == 0

    def test_plot_svg(self, tmp_path):
        dark_file = self._make_dark(tmp_path)
        assert main([
            "simulate", "--count", "4", "--split", "test",
            "--dark", str(dark_file), "--seed", "7", "--out", str(tmp_path / "ds"),
        ]) == 0
        assert main([
            "eval", "peaks", "--manifest", str(tmp_path / "ds"),
            "--denoiser", "identity", "--out", str(tmp_path / "p.json"),
        ]) == 0
        assert main([
            "plot", "--report", str(tmp_path / "p.json"), "--out", str(tmp_path / "p.svg"),
        ]) == 0
        assert (tmp_path / "p.svg").read_text()[:5] == "<?xml"
