import numpy as np
import pytest

from roughcal.cli import main
from roughcal.config import (
    build_curve,
    build_model,
    build_schedule,
    load_config,
    require,
)
from roughcal.curves import NelsonSiegelCurve, PiecewiseConstantCurve
from roughcal.errors import ConfigError


BASE = """
[model]
xi0 = 0.055225
hurst = 0.07
rho = -0.9
eta = 1.9

[grid]
n = 16
maturities = 0.25,0.5

[run]
seed = 42
m = 512
eps = 1e-2
chunk_size = 256
"""


def write_cfg(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadConfig:
    def test_round_trip(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path, BASE))
        assert cfg["model"]["hurst"] == 0.07
        assert cfg["grid"]["maturities"] == [0.25, 0.5]
        assert cfg["run"]["m"] == 512

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_cfg(tmp_path, BASE + "\n[plotting]\nstyle = dark\n"))

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_cfg(tmp_path, BASE + "\n[smile]\nstrikes = 1.0\n"))

    def test_bad_value(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_cfg(tmp_path, BASE.replace("hurst = 0.07", "hurst = soon")))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "nope.ini"))

    def test_require(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path, BASE))
        assert require(cfg, "run", "m") == 512
        with pytest.raises(ConfigError):
            require(cfg, "run", "scheme")
        with pytest.raises(ConfigError):
            require(cfg, "barrier", "kinds")


class TestBuilders:
    def test_build_model(self, tmp_path):
        params = build_model(load_config(write_cfg(tmp_path, BASE)))
        assert params.hurst == 0.07 and params.rho == -0.9
        assert params.xi0(0.1) == 0.055225

    def test_build_pwc_curve(self):
        curve = build_curve({"curve": "pwc", "pillars": [0.0, 0.5, 1.0], "levels": [0.04, 0.09]})
        assert isinstance(curve, PiecewiseConstantCurve)
        assert curve(0.7) == 0.09

    def test_build_ns_curve(self):
        curve = build_curve(
            {"curve": "ns", "beta0": 0.02, "beta1": 0.03, "beta2": 0.6, "tau_ns": 0.2}
        )
        assert isinstance(curve, NelsonSiegelCurve)

    def test_curve_errors(self):
        with pytest.raises(ConfigError):
            build_curve({"curve": "spline"})
        with pytest.raises(ConfigError):
            build_curve({"curve": "constant"})
        with pytest.raises(ConfigError):
            build_curve({"curve": "constant", "xi0": -0.1})
        with pytest.raises(ConfigError):
            build_curve({"curve": "ns", "beta0": 0.02})

    def test_build_schedule(self, tmp_path):
        sch = build_schedule(load_config(write_cfg(tmp_path, BASE)))
        assert sch.n == 16
        both = BASE.replace("n = 16", "n = 16\ntau = 0.03125")
        with pytest.raises(ConfigError):
            build_schedule(load_config(write_cfg(tmp_path, both, "b.ini")))
        with pytest.raises(ConfigError):
            build_schedule({"grid": {"maturities": [0.5]}})

    def test_invalid_model_maps_to_config_error(self, tmp_path):
        bad = BASE.replace("rho = -0.9", "rho = 0.9")
        with pytest.raises(ConfigError):
            build_model(load_config(write_cfg(tmp_path, bad)))


class TestCliGenNodes:
    def test_flags_only(self, tmp_path, capsys):
        code = main([
            "gen-nodes", "--hurst", "0.07", "--delta", "0.0078125",
            "--horizon", "1.0", "--eps", "1e-2", "--out-dir", str(tmp_path),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "N: " in out and "sup_error: " in out
        assert (tmp_path / "nodes.csv").exists()
        assert (tmp_path / "manifest.txt").exists()

    def test_delta_not_below_horizon(self, tmp_path, capsys):
        code = main([
            "gen-nodes", "--hurst", "0.07", "--delta", "2.0",
            "--horizon", "1.0", "--eps", "1e-2", "--out-dir", str(tmp_path),
        ])
        assert code == 2

    def test_missing_argument(self, tmp_path):
        code = main(["gen-nodes", "--hurst", "0.07", "--out-dir", str(tmp_path)])
        assert code == 2

    def test_unreachable_eps_is_numerical(self, tmp_path):
        code = main([
            "gen-nodes", "--hurst", "0.07", "--delta", "1e-6",
            "--horizon", "10.0", "--eps", "1e-14", "--out-dir", str(tmp_path),
        ])
        assert code == 3


class TestCliSmile:
    def smile_cfg(self, tmp_path, extra=""):
        return write_cfg(tmp_path, BASE + "\n[smile]\nlog_strikes = -0.1,0.0,0.1\n" + extra)

    def test_runs_and_reruns_identically(self, tmp_path):
        cfg = self.smile_cfg(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["smile", "--config", cfg, "--out-dir", str(out1)]) == 0
        assert main(["smile", "--config", cfg, "--out-dir", str(out2)]) == 0
        assert (out1 / "smile_msoe.csv").read_bytes() == (out2 / "smile_msoe.csv").read_bytes()
        lines = (out1 / "smile_msoe.csv").read_text().splitlines()
        assert lines[0] == "T,k,strike,price,stderr,iv,valid"
        assert len(lines) == 1 + 2 * 3  # two maturities x three strikes

    def test_benchmark_summary(self, tmp_path, capsys):
        cfg = self.smile_cfg(tmp_path, "benchmark = cholesky\n")
        out = tmp_path / "bench"
        assert main(["smile", "--config", cfg, "--out-dir", str(out)]) == 0
        assert (out / "smile_cholesky.csv").exists()
        summary = (out / "smile_summary.csv").read_text().splitlines()
        assert summary[0] == "scheme,benchmark,max_rel_error"
        assert summary[1].startswith("msoe,cholesky,")

    def test_threads_env(self, tmp_path, monkeypatch):
        cfg = self.smile_cfg(tmp_path)
        out1, out2 = tmp_path / "t1", tmp_path / "t2"
        assert main(["smile", "--config", cfg, "--out-dir", str(out1)]) == 0
        monkeypatch.setenv("ROUGHCAL_THREADS", "3")
        assert main(["smile", "--config", cfg, "--out-dir", str(out2)]) == 0
        assert (out1 / "smile_msoe.csv").read_bytes() == (out2 / "smile_msoe.csv").read_bytes()
        assert "threads: 3" in (out2 / "manifest.txt").read_text()

    def test_bad_threads_env(self, tmp_path, monkeypatch):
        cfg = self.smile_cfg(tmp_path)
        monkeypatch.setenv("ROUGHCAL_THREADS", "many")
        assert main(["smile", "--config", cfg, "--out-dir", str(tmp_path / "x")]) == 2

    def test_missing_config_flag(self, tmp_path):
        assert main(["smile", "--out-dir", str(tmp_path)]) == 2

    def test_seed_flag_changes_output(self, tmp_path):
        cfg = self.smile_cfg(tmp_path)
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert main(["smile", "--config", cfg, "--out-dir", str(out1)]) == 0
        assert main(["smile", "--config", cfg, "--seed", "7", "--out-dir", str(out2)]) == 0
        assert (out1 / "smile_msoe.csv").read_bytes() != (out2 / "smile_msoe.csv").read_bytes()
        assert "seed: 7" in (out2 / "manifest.txt").read_text()


class TestCliCalibrate:
    def test_short_run(self, tmp_path):
        from roughcal.calibration import synthesize_market
        from roughcal.curves import ConstantCurve
        from roughcal.paths import GridSchedule, ModelParams
        from roughcal.wasserstein import write_market_samples

        sch = GridSchedule.from_horizon(16, 0.5, [0.25, 0.5])
        truth = ModelParams(ConstantCurve(0.09), 0.07, -0.9, 1.9)
        market = synthesize_market(truth, sch, 512, 1e-2, seed=1, chunk_size=256)
        market_file = tmp_path / "market.csv"
        write_market_samples(market_file, market)

        cfg = write_cfg(
            tmp_path,
            BASE.replace("xi0 = 0.055225", "xi0 = 0.06")
            + f"\n[calibrate]\nmarket_file = {market_file}\nkernel_eps = 1e-2\nmax_iters = 3\n"
            + "\n[truth]\nxi0 = 0.09\nhurst = 0.07\nrho = -0.9\neta = 1.9\n",
            "calib.ini",
        )
        out = tmp_path / "calib"
        assert main(["calibrate", "--config", cfg, "--out-dir", str(out)]) == 0
        traj = (out / "trajectory.csv").read_text().splitlines()
        assert traj[0] == "iter,loss,lr,N,H,rho,eta,xi0"
        assert len(traj) == 4
        summary = (out / "summary.txt").read_text()
        assert "stop_reason: max-iters" in summary
        assert "ape_H:" in summary

    def test_missing_market_file(self, tmp_path):
        cfg = write_cfg(
            tmp_path, BASE + "\n[calibrate]\nmarket_file = /does/not/exist.csv\n"
        )
        assert main(["calibrate", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 2


class TestCliBarrier:
    def test_default_grid(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE)
        out = tmp_path / "bar"
        assert main(["barrier", "--config", cfg, "--out-dir", str(out)]) == 0
        lines = (out / "barrier.csv").read_text().splitlines()
        assert lines[0] == "kind,T,K,B,price,stderr"
        # 2 maturities x (16 dop + 1 put + 16 uoc + 1 call).
        assert len(lines) == 1 + 2 * 34

    def test_bad_kind(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE + "\n[barrier]\nkinds = dip\n")
        assert main(["barrier", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 2


class TestCliLandscape:
    def test_small_grid(self, tmp_path):
        cfg = write_cfg(
            tmp_path,
            BASE + "\n[landscape]\nparams = hurst,eta\nrange1 = 0.05,0.09\n"
            "range2 = 1.5,2.3\ngrid = 3\n",
        )
        out = tmp_path / "land"
        assert main(["landscape", "--config", cfg, "--out-dir", str(out)]) == 0
        lines = (out / "landscape.csv").read_text().splitlines()
        assert lines[0] == "hurst,eta,loss,log10_loss"
        assert len(lines) == 10

    def test_bad_params(self, tmp_path):
        cfg = write_cfg(
            tmp_path,
            BASE + "\n[landscape]\nparams = hurst\nrange1 = 0.05,0.09\nrange2 = 1.5,2.3\n",
        )
        assert main(["landscape", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 2


class TestCliSurface:
    def test_small_surface(self, tmp_path):
        cfg = write_cfg(
            tmp_path,
            BASE + "\n[surface]\nmaturities = 0.25,0.5\nk_min = -0.1\nk_max = 0.05\n"
            "k_count = 4\nscale_by_sqrt_t = yes\n",
        )
        out = tmp_path / "surf"
        assert main(["surface", "--config", cfg, "--out-dir", str(out)]) == 0
        lines = (out / "surface_msoe.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 4
        # Log-strike columns scale with sqrt(T).
        ks = np.array([float(l.split(",")[1]) for l in lines[1:]])
        assert ks[0] == pytest.approx(-0.1 * np.sqrt(0.25))
        assert ks[4] == pytest.approx(-0.1 * np.sqrt(0.5))
