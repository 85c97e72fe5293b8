import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from lpl import _backend, _fallback
from lpl.errors import ContractViolation
from lpl.harness import config as C
from lpl.harness import experiments as E
from lpl.harness import io
from lpl.harness.cli import main
from lpl.harness.parallel import pmap, worker_count


def small(experiment, tmp_path, **kw):
    return C.default_config(experiment).with_values(out=str(tmp_path), **kw)


SMALL = {
    "gmm2d": dict(steps=300, checkpoints=(100, 300), n_ref=300, n_sub=300, replicates=2, grid_cells=40, svg=True),
    "stability": dict(steps=2000, burn_in=200, chains=20, replicates=2),
    "discretization": dict(gammas=(0.1, 0.2), horizon=100.0, chains=20, replicates=2),
    "moreau": dict(gammas=(1e-1, 1e-2), grid_points=20001),
    "inpaint": dict(size=16, steps=60, burn_in=10, replicates=2),
}


class TestConfig:
    def test_defaults_cover_schema(self):
        for name in C.SCHEMAS:
            cfg = C.default_config(name)
            assert set(cfg.values) == set(C.schema(name))

    def test_parse(self):
        cfg = C.parse_config_text("gmm2d", "# comment\n\nsteps = 500  # short\np = 2\ny = 1.5, -0.5\nsvg = off\n")
        assert cfg.steps == 500 and cfg.p == (2,) and cfg.y == (1.5, -0.5) and cfg.svg is False

    @pytest.mark.parametrize("text, line, fragment", [
        ("steps = 10\nbogus = 1\n", 2, "unknown key"),
        ("steps = 10\n\nsteps = 20\n", 3, "duplicate key"),
        ("steps = ten\n", 1, "bad value"),
        ("steps\n", 1, "key = value"),
        ("steps = 1.5\n", 1, "bad value"),
    ])
    def test_errors_name_file_and_line(self, tmp_path, text, line, fragment):
        path = tmp_path / "run.cfg"
        path.write_text(text)
        with pytest.raises(ContractViolation) as info:
            C.load_config("gmm2d", path)
        assert f"{path}:{line}:" in str(info.value) and fragment in str(info.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ContractViolation, match="nope.cfg"):
            C.load_config("moreau", tmp_path / "nope.cfg")

    def test_unknown_experiment(self):
        with pytest.raises(ContractViolation):
            C.schema("nope")

    def test_validate_paths(self, tmp_path):
        cfg = small("gmm2d", tmp_path, prior=str(tmp_path / "missing.gmm"))
        with pytest.raises(ContractViolation, match="file not found"):
            cfg.validate_paths()


class TestCSV:
    def test_round_trip(self, tmp_path):
        rows = [(0.1, "a,b", 3), (1e-300, 'q"uote', np.int64(4)), (np.float64(2 / 3), "", -1)]
        io.write_csv(tmp_path / "t.csv", ("x", "s", "n"), rows)
        header, back = io.read_csv(tmp_path / "t.csv")
        assert header == ["x", "s", "n"]
        assert [float(r[0]) for r in back] == [0.1, 1e-300, 2 / 3]
        assert [r[1] for r in back] == ["a,b", 'q"uote', ""]

    def test_samples(self, tmp_path):
        s = np.arange(6.0).reshape(3, 2) / 7
        io.write_samples_csv(tmp_path / "s.csv", s)
        header, back = io.read_csv(tmp_path / "s.csv")
        assert header == ["x_0", "x_1"]
        assert np.array_equal(np.array(back, dtype=float), s)


class TestPGM:
    def image(self):
        return np.arange(35).reshape(5, 7) / 34.0

    def test_binary_round_trip(self, tmp_path):
        io.write_pgm(tmp_path / "a.pgm", self.image())
        back = io.read_pgm(tmp_path / "a.pgm")
        assert back.shape == (5, 7)
        assert np.abs(back - self.image()).max() <= 0.5 / 255 + 1e-12

    def test_ascii_matches_binary(self, tmp_path):
        io.write_pgm(tmp_path / "b.pgm", self.image())
        io.write_pgm_ascii(tmp_path / "a.pgm", self.image())
        assert np.array_equal(io.read_pgm(tmp_path / "a.pgm"), io.read_pgm(tmp_path / "b.pgm"))

    def test_comments_and_maxval(self, tmp_path):
        (tmp_path / "c.pgm").write_bytes(b"P2\n# made by hand\n2 1\n# max\n15\n0 15\n")
        assert np.array_equal(io.read_pgm(tmp_path / "c.pgm"), [[0.0, 1.0]])

    @pytest.mark.parametrize("data", [b"P6\n1 1\n255\n\x00", b"P5\n2 2\n255\n\x00", b"P2\n1 1\n", b"P2\n1 1\n9\n10\n",
                                      b"P2\nx 1\n255\n0\n", b"P2\n1 1\n65535\n0\n"])
    def test_rejects(self, tmp_path, data):
        (tmp_path / "bad.pgm").write_bytes(data)
        with pytest.raises(ContractViolation):
            io.read_pgm(tmp_path / "bad.pgm")

    def test_missing(self, tmp_path):
        with pytest.raises(ContractViolation):
            io.read_pgm(tmp_path / "none.pgm")


class TestContours:
    def test_circle(self):
        xs = ys = np.linspace(-2, 2, 81)
        v = xs[:, None] ** 2 + ys[None, :] ** 2
        segs = io.marching_squares(v, 1.0, xs, ys)
        pts = np.array([p for s in segs for p in s])
        assert len(segs) > 50
        assert np.abs(np.hypot(pts[:, 0], pts[:, 1]) - 1).max() < 1e-2

    def test_flat(self):
        assert io.marching_squares(np.zeros((4, 4)), 1.0, range(4), range(4)) == []

    def test_svg_well_formed(self, tmp_path):
        from lpl.metrics import Grid, GridDensity
        dens = GridDensity.from_log_function(lambda p: -0.5 * np.sum(p * p, axis=1), Grid(((-3, 3), (-3, 3)), (30, 30)))
        pts = np.random.default_rng(0).normal(size=(50, 2))
        io.write_scatter_svg(tmp_path / "s.svg", pts, ((-3, 3), (-3, 3)), dens, levels=(0.05, 0.1), title="a < b")
        root = ET.parse(tmp_path / "s.svg").getroot()
        tags = [el.tag.split("}")[1] for el in root.iter()]
        assert tags[0] == "svg" and "path" in tags and tags.count("circle") <= 50


class TestThreads:
    @pytest.mark.parametrize("raw", ["0", "-2", "four"])
    def test_invalid(self, monkeypatch, raw):
        monkeypatch.setenv("LPL_THREADS", raw)
        with pytest.raises(ContractViolation, match="LPL_THREADS"):
            worker_count()

    def test_valid_and_ordered(self, monkeypatch):
        monkeypatch.setenv("LPL_THREADS", "3")
        assert worker_count() == 3
        assert pmap(lambda x: x * x, range(10)) == [x * x for x in range(10)]

    def test_thread_count_does_not_change_results(self, monkeypatch, tmp_path):
        out = {}
        for n in ("1", "2"):
            monkeypatch.setenv("LPL_THREADS", n)
            res = E.exp_stability_sweep(small("stability", tmp_path / n, **SMALL["stability"]))
            out[n] = [(r.metric, r.param, r.value, r.se) for r in res.sorted_rows()]
        assert out["1"] == out["2"]


class TestBackendParity:
    def test_gmm_score(self, gmm3):
        x = np.random.default_rng(1).normal(size=(50, 2)) * 3
        a = _fallback.gmm_score(x, gmm3._k_means, gmm3._k_precs, gmm3._k_lognorm)
        b = _backend.gmm_score(x, gmm3._k_means, gmm3._k_precs, gmm3._k_lognorm)
        assert np.allclose(a[0], b[0], rtol=1e-12, atol=1e-12) and np.allclose(a[1], b[1], rtol=1e-12)

    def test_tv(self):
        img = np.random.default_rng(2).random((12, 9))
        assert np.allclose(_fallback.tv_dual_prox(img, 0.1, 30), _backend.tv_dual_prox(img, 0.1, 30), atol=1e-12)

    def test_transport(self):
        rng = np.random.default_rng(3)
        cost = rng.integers(0, 10 ** 9, size=(9, 6)).astype(np.int64)
        sup, dem = np.full(9, 2.0), np.full(6, 3.0)
        fa, ua, va = _fallback.transport_ssp(cost, sup, dem)
        fb, ub, vb = _backend.transport_ssp(cost, sup, dem)
        assert np.sum(fa * cost) == np.sum(fb * cost)
        for f in (fa, fb):
            assert np.allclose(f.sum(axis=1), sup) and np.allclose(f.sum(axis=0), dem)


class TestExperiments:
    @pytest.mark.parametrize("name", sorted(SMALL))
    def test_rerun_is_byte_identical(self, tmp_path, name):
        blobs = []
        for run in ("a", "b"):
            cfg = small(name, tmp_path / run, **SMALL[name])
            E.EXPERIMENTS[name](cfg)
            files = sorted(f for f in os.listdir(tmp_path / run) if not f.endswith("_timings.csv"))
            blobs.append({f: (tmp_path / run / f).read_bytes() for f in files})
        assert blobs[0].keys() == blobs[1].keys() and "sweep.csv" in blobs[0]
        assert blobs[0] == blobs[1]

    def test_sweep_csv_header(self, tmp_path):
        E.exp_moreau_sweep(small("moreau", tmp_path, **SMALL["moreau"]))
        header, rows = io.read_csv(tmp_path / "sweep.csv")
        assert header == list(E.SweepResult.HEADER)
        assert all(r[0] == "moreau" and r[1] == "gamma" for r in rows)

    def test_moreau_zero_regularizer(self, tmp_path):
        res = E.exp_moreau_sweep(small("moreau", tmp_path, g="zero", **SMALL["moreau"]))
        assert res.checks["identical_laws"][0]

    def test_moreau_grid_too_narrow(self, tmp_path):
        with pytest.raises(ContractViolation, match="grid_half_width"):
            E.exp_moreau_sweep(small("moreau", tmp_path, grid_half_width=1.0, **SMALL["moreau"]))

    def test_gmm_single_mode_and_outputs(self, tmp_path):
        E.exp_gmm2d(small("gmm2d", tmp_path, prior="single_mode", **SMALL["gmm2d"]))
        names = set(os.listdir(tmp_path))
        assert {"sweep.csv", "metrics.csv", "observation.csv", "posterior.gmm"} <= names
        assert any(n.endswith(".svg") for n in names)
        header, rows = io.read_csv(tmp_path / "observation.csv")
        assert [float(v) for v in rows[0][:2]] == [-1.0, -1.0]

    def test_gmm_suite(self, tmp_path):
        cfg = small("gmm2d", tmp_path, prior="all", **dict(SMALL["gmm2d"], svg=False, replicates=2))
        suite = E.exp_gmm2d(cfg)
        metrics = {r.metric for r in suite.rows}
        assert any(m.startswith("unweighted_mean.") for m in metrics)

    def test_stability_zero_shift(self, tmp_path):
        res = E.exp_stability_sweep(small("stability", tmp_path, **SMALL["stability"]))
        assert res.row(0.0, "W1").value == 0.0

    def test_inpaint_noiseless_full_observation(self, tmp_path):
        cfg = small("inpaint", tmp_path, size=24, mask_fraction=0.0, sigma=1 / 255, eps=2 / 255, steps=200,
                    burn_in=50, replicates=2)
        res = E.exp_inpaint_tv(cfg)
        assert res.row(0.0, "rmse_observed_pixels").value < 2 / 255

    def test_inpaint_half_mask(self, tmp_path):
        cfg = small("inpaint", tmp_path, size=32, steps=300, burn_in=50, replicates=2)
        res = E.exp_inpaint_tv(cfg)
        p = cfg.mask_fraction
        assert res.row(p, "psnr_mean").value >= res.row(p, "psnr_zero_filled").value + 3
        assert res.row(p, "std_hidden").value > res.row(p, "std_observed").value
        assert io.read_pgm(tmp_path / "posterior_mean.pgm").shape == (32, 32)

    def test_inpaint_unstable_step(self, tmp_path):
        with pytest.raises(ContractViolation):
            E.exp_inpaint_tv(small("inpaint", tmp_path, sigma=1 / 255, **SMALL["inpaint"]))


class TestCLI:
    def test_proxcheck(self, capsys):
        assert main(["proxcheck", "--seed", "1"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_usage(self, capsys):
        assert main(["gmm2d", "--bogus"]) == 64
        assert main([]) == 64
        assert main(["nope"]) == 64

    def test_help(self, capsys):
        assert main(["moreau", "--help"]) == 0
        assert "grid_points" in capsys.readouterr().out

    def test_missing_config(self, tmp_path, capsys):
        assert main(["moreau", "--config", str(tmp_path / "x.cfg")]) == 1
        assert "x.cfg" in capsys.readouterr().err

    def test_bad_config_line(self, tmp_path, capsys):
        (tmp_path / "x.cfg").write_text("gammas = 0.1\nwat = 1\n")
        assert main(["moreau", "--config", str(tmp_path / "x.cfg")]) == 1
        assert "x.cfg:2" in capsys.readouterr().err

    def test_divergence(self, tmp_path, capsys):
        (tmp_path / "x.cfg").write_text("ula_gamma = 50\nreplicates = 1\nn_ref = 100\n")
        code = main(["gmm2d", "--config", str(tmp_path / "x.cfg"), "--steps", "200", "--out", str(tmp_path)])
        assert code == 2
        assert "diverg" in capsys.readouterr().err

    def test_bad_steps(self, tmp_path):
        assert main(["gmm2d", "--steps", "0", "--out", str(tmp_path)]) == 1

    def test_gmm_short_run(self, tmp_path, capsys):
        import time
        t0 = time.perf_counter()
        assert main(["gmm2d", "--steps", "100", "--out", str(tmp_path)]) == 0
        if _backend.BACKEND == "cython":
            # the numpy transport solver is roughly 30x slower
            assert time.perf_counter() - t0 < 5.0
        assert (tmp_path / "sweep.csv").exists()
