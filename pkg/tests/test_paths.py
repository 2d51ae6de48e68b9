import numpy as np
import pytest
from scipy.integrate import quad

from roughcal.curves import ConstantCurve, ground_truth_curve
from roughcal.errors import DomainError, SimulationError
from roughcal.kernels import SoeApprox, generate_soe
from roughcal.paths import (
    FrozenNoiseSimulator,
    GridSchedule,
    ModelParams,
    dump_paths,
    exact_cross_covariance,
    exact_volterra_covariance,
    second_moment_approx,
    simulate_paths,
    soe_second_moment,
)

CASE0_SMILE = dict(xi0=ConstantCurve(0.235**2), hurst=0.07, rho=-0.9, eta=1.9)


class TestModelParams:
    def test_accepts_plain_level(self):
        p = ModelParams(0.09, 0.07, -0.9, 1.9)
        assert isinstance(p.xi0, ConstantCurve)
        assert p.xi0(0.3) == 0.09

    def test_validation(self):
        with pytest.raises(DomainError):
            ModelParams(0.09, 0.6, -0.9, 1.9)
        with pytest.raises(DomainError):
            ModelParams(0.09, 0.07, 0.5, 1.9)
        with pytest.raises(DomainError):
            ModelParams(0.09, 0.07, -0.9, -1.0)
        with pytest.raises(DomainError):
            ModelParams(0.09, 0.07, -0.9, 1.9, s0=0.0)

    def test_eta_zero_allowed(self):
        assert ModelParams(0.09, 0.07, -0.9, 0.0).eta == 0.0


class TestGridSchedule:
    def test_from_horizon(self):
        sch = GridSchedule.from_horizon(128, 0.3, [0.15, 0.3])
        assert sch.tau == pytest.approx(0.3 / 128)
        assert list(sch.maturity_steps) == [64, 128]
        assert sch.times[0] == 0.0 and sch.times[-1] == pytest.approx(0.3)

    def test_from_step(self):
        sch = GridSchedule.from_step(1 / 500, [0.3, 0.5, 1.0])
        assert sch.n == 500
        assert list(sch.maturity_steps) == [150, 250, 500]

    def test_off_grid_maturity(self):
        with pytest.raises(DomainError):
            GridSchedule(n=100, tau=0.01, maturities=np.array([0.333, 1.0]))

    def test_grid_must_end_at_last_maturity(self):
        with pytest.raises(DomainError):
            GridSchedule(n=120, tau=0.01, maturities=np.array([1.0]))


class TestSecondMoments:
    def test_first_step_exact(self, soe_n8):
        tau = 1 / 128
        assert second_moment_approx(soe_n8, 0.07, tau, tau) == pytest.approx(
            tau**0.14, rel=1e-14
        )

    def test_no_nodes(self):
        empty = SoeApprox(np.array([]), np.array([]))
        assert second_moment_approx(empty, 0.07, 1 / 128, 0.5) == pytest.approx(
            0.5070, abs=5e-5
        )

    def test_monotone_in_time(self, soe_n8):
        tau = 1 / 128
        grid = np.arange(1, 129) * tau
        vals = second_moment_approx(soe_n8, 0.07, tau, grid)
        assert np.all(np.diff(vals) >= 0.0)

    def test_soe_second_moment_quadrature(self, soe_n8):
        # E[(sqrt(2H) sum w_k Y_k(t))^2] against its defining integral.
        t = 0.4
        ref, _ = quad(
            lambda s: (np.exp(-soe_n8.nodes * (t - s)) @ soe_n8.weights) ** 2, 0.0, t, limit=200
        )
        assert soe_second_moment(soe_n8, 0.07, t) == pytest.approx(2 * 0.07 * ref, rel=1e-8)

    def test_zero_node_limits(self):
        soe = SoeApprox(np.array([0.0]), np.array([1.0]))
        # (1 - e^0)/0 -> t  and (e^0 - e^0)/0 -> t - tau.
        assert soe_second_moment(soe, 0.07, 0.5) == pytest.approx(0.14 * 0.5)
        assert second_moment_approx(soe, 0.07, 0.1, 0.5) == pytest.approx(
            0.1**0.14 + 0.14 * 0.4
        )


class TestExactCovariances:
    def test_variance_closed_form(self):
        assert exact_volterra_covariance(0.07, 0.5, 0.5) == pytest.approx(
            0.5**0.14, rel=1e-12
        )

    def test_cross_closed_form(self):
        assert exact_cross_covariance(0.25, 1.0, 1.0) == pytest.approx(
            np.sqrt(0.5) / 0.75, rel=1e-12
        )

    def test_cross_saturates(self):
        a = exact_cross_covariance(0.25, 0.5, 2.0)
        b = exact_cross_covariance(0.25, 0.5, 0.5)
        assert a == b

    def test_off_diagonal_quadrature(self):
        hurst, ti, tj = 0.07, 0.3, 0.7
        ref, _ = quad(
            lambda u: (ti - u) ** (hurst - 0.5) * (tj - u) ** (hurst - 0.5),
            0.0, ti, points=[ti], limit=200,
        )
        assert exact_volterra_covariance(hurst, ti, tj) == pytest.approx(
            2 * hurst * ref, rel=1e-9
        )

    def test_symmetry_in_arguments(self):
        assert exact_volterra_covariance(0.1, 0.2, 0.9) == pytest.approx(
            exact_volterra_covariance(0.1, 0.9, 0.2), rel=1e-12
        )


class TestSimulatePaths:
    def test_eta_zero_schemes_agree(self, soe_smile):
        sch = GridSchedule.from_horizon(32, 0.5, [0.25, 0.5])
        p = ModelParams(ConstantCurve(0.0552), 0.07, -0.9, 0.0, r=0.01)
        a = simulate_paths(p, sch, soe_smile, "msoe", 4096, seed=5)
        b = simulate_paths(p, sch, soe_smile, "soe", 4096, seed=5)
        c = simulate_paths(p, sch, None, "cholesky", 4096, seed=5)
        # Common driving noise: mSOE and SOE agree bitwise at eta=0.
        assert np.array_equal(a.terminals, b.terminals)
        # All schemes: variance collapses to the deterministic curve.
        for batch in (a, b, c):
            assert np.allclose(batch.v_mean, 0.0552, rtol=0, atol=1e-14)
            assert np.max(batch.v_var) == 0.0
        # Same law: moments of the (lognormal-like) terminals agree across schemes.
        assert a.terminals[1].mean() == pytest.approx(c.terminals[1].mean(), abs=0.01)
        assert a.terminals[1].std() == pytest.approx(c.terminals[1].std(), rel=0.05)

    def test_thread_count_invariance(self, soe_smile):
        sch = GridSchedule.from_horizon(32, 0.5, [0.5])
        p = ModelParams(**CASE0_SMILE)
        one = simulate_paths(p, sch, soe_smile, "msoe", 3 * 8192 + 11, seed=9, threads=1)
        four = simulate_paths(p, sch, soe_smile, "msoe", 3 * 8192 + 11, seed=9, threads=4)
        assert np.array_equal(one.terminals, four.terminals)
        assert np.array_equal(one.running_min, four.running_min)
        assert np.array_equal(one.v_mean, four.v_mean)

    def test_compensator_keeps_mean_variance(self):
        soe = generate_soe(0.07, 0.3 / 64, 0.3, 1e-2)
        sch = GridSchedule.from_horizon(64, 0.3)
        p = ModelParams(**CASE0_SMILE)
        for scheme in ("msoe", "soe"):
            batch = simulate_paths(p, sch, soe, scheme, 1 << 16, seed=17)
            se = np.sqrt(batch.v_var / (1 << 16))
            dev = np.abs(batch.v_mean[1:] - 0.235**2) / se[1:]
            assert np.max(dev) < 4.5

    def test_price_mean_preserved(self, soe_smile):
        sch = GridSchedule.from_horizon(32, 0.5)
        p = ModelParams(**CASE0_SMILE)
        batch = simulate_paths(p, sch, soe_smile, "msoe", 1 << 16, seed=23)
        st = batch.terminals[0]
        assert abs(st.mean() - 1.0) < 4.5 * st.std() / np.sqrt(st.size)

    def test_extrema_bracket_terminals(self, soe_smile):
        sch = GridSchedule.from_horizon(32, 0.5, [0.25, 0.5])
        p = ModelParams(**CASE0_SMILE)
        batch = simulate_paths(p, sch, soe_smile, "msoe", 2048, seed=1)
        assert np.all(batch.running_min <= batch.terminals)
        assert np.all(batch.terminals <= batch.running_max)
        assert np.all(batch.terminals > 0.0)
        # Extrema accumulate: later-maturity min <= earlier-maturity min.
        assert np.all(batch.running_min[1] <= batch.running_min[0])
        assert np.all(batch.running_max[1] >= batch.running_max[0])

    def test_time_dependent_curve(self, soe_smile):
        sch = GridSchedule.from_horizon(32, 0.5)
        p = ModelParams(ground_truth_curve(2), 0.07, -0.9, 1.9)
        batch = simulate_paths(p, sch, soe_smile, "msoe", 1 << 15, seed=3)
        curve_vals = ground_truth_curve(2)(sch.times)
        se = np.sqrt(batch.v_var / (1 << 15))
        dev = np.abs(batch.v_mean[1:] - curve_vals[1:]) / se[1:]
        assert np.max(dev) < 4.5

    def test_cholesky_cap(self):
        sch = GridSchedule.from_horizon(600, 0.5)
        with pytest.raises(DomainError):
            simulate_paths(ModelParams(**CASE0_SMILE), sch, None, "cholesky", 8, seed=0)

    def test_missing_soe(self):
        sch = GridSchedule.from_horizon(16, 0.5)
        with pytest.raises(DomainError):
            simulate_paths(ModelParams(**CASE0_SMILE), sch, None, "msoe", 8, seed=0)

    def test_unknown_scheme(self, soe_smile):
        sch = GridSchedule.from_horizon(16, 0.5)
        with pytest.raises(DomainError):
            simulate_paths(ModelParams(**CASE0_SMILE), sch, soe_smile, "euler", 8, seed=0)

    def test_path_dump(self, tmp_path, soe_smile):
        sch = GridSchedule.from_horizon(8, 0.5)
        p = ModelParams(**CASE0_SMILE)
        batch = simulate_paths(p, sch, soe_smile, "msoe", 4, seed=2, record_paths=True)
        assert batch.s_paths.shape == (4, 9)
        out = tmp_path / "paths.csv"
        dump_paths(out, batch, sch.tau)
        lines = out.read_text().splitlines()
        assert lines[0] == "path,step,t,S,V"
        assert len(lines) == 1 + 4 * 9
        plain = simulate_paths(p, sch, soe_smile, "msoe", 4, seed=2)
        with pytest.raises(DomainError):
            dump_paths(out, plain, sch.tau)


class TestKernelAccuracyConvergence:
    def test_smile_gap_shrinks_with_eps(self):
        # mSOE approaches the exact-Cholesky law as the kernel tightens.
        from roughcal.blackscholes import max_rel_error, smile_from_batch

        sch = GridSchedule.from_horizon(64, 0.5)
        p = ModelParams(**CASE0_SMILE)
        ks = np.linspace(-0.2, 0.1, 7)
        bench = simulate_paths(p, sch, None, "cholesky", 1 << 17, seed=31)
        ref = smile_from_batch(bench, 0.5, ks, 1.0, 0.0)
        def gap(soe):
            batch = simulate_paths(p, sch, soe, "msoe", 1 << 17, seed=31)
            return max_rel_error(smile_from_batch(batch, 0.5, ks, 1.0, 0.0), ref)

        # A deliberately crude one-term kernel distorts the smile badly ...
        assert gap(SoeApprox(np.array([1.0]), np.array([1.0]))) > 0.1
        # ... while certified kernels sit at the Monte-Carlo noise floor.
        for eps in (1e-1, 1e-3):
            assert gap(generate_soe(0.07, 0.5 / 64, 0.5, eps)) < 0.02


class TestFrozenNoiseSimulator:
    def test_matches_simulate_paths(self, soe_smile):
        sch = GridSchedule.from_horizon(32, 0.5, [0.25, 0.5])
        sim = FrozenNoiseSimulator(sch, 4096)
        sim.load_noise(soe_smile, seed=5)
        for p in (
            ModelParams(ConstantCurve(0.0552), 0.07, -0.9, 1.9, r=0.01),
            ModelParams(ConstantCurve(0.04), 0.07, -0.5, 1.0),   # cached drivers
            ModelParams(ConstantCurve(0.04), 0.08, -0.5, 1.0),   # fresh H
        ):
            ref = simulate_paths(p, sch, soe_smile, "msoe", 4096, seed=5)
            assert np.array_equal(sim.terminals(p), ref.terminals)

    def test_requires_loaded_noise(self, soe_smile):
        sim = FrozenNoiseSimulator(GridSchedule.from_horizon(8, 0.5), 16)
        with pytest.raises(SimulationError):
            sim.terminals(ModelParams(**CASE0_SMILE))

    def test_overflow_guard(self, soe_smile):
        sch = GridSchedule.from_horizon(8, 0.5)
        sim = FrozenNoiseSimulator(sch, 16)
        sim.load_noise(soe_smile, seed=1)
        p = ModelParams(**CASE0_SMILE)
        dW, driver, comp = sim._drivers(p.hurst)
        sim._driver_cache[p.hurst] = (dW, driver + 1e6, comp)
        with pytest.raises(SimulationError):
            sim.terminals(p)
