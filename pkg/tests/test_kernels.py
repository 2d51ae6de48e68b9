import math

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from roughcal.errors import DomainError, KernelError, ParseError
from roughcal.kernels import (
    SoeApprox,
    bernstein_weight,
    eval_fractional_kernel,
    eval_soe,
    generate_soe,
    read_soe,
    sup_error,
    write_soe,
)


class TestKernelValues:
    def test_published_values(self):
        # Hand-checkable kernel values.
        assert eval_fractional_kernel(0.5, 0.07) == pytest.approx(1.3472, abs=5e-5)
        assert eval_fractional_kernel(4.0, 0.25) == pytest.approx(0.70711, abs=5e-6)
        assert eval_fractional_kernel(1.0, 0.3) == 1.0

    def test_bernstein_weight(self):
        assert bernstein_weight(1.0, 0.25) == pytest.approx(0.27582, abs=5e-6)
        # Definition check at another point.
        h = 0.07
        assert bernstein_weight(2.0, h) == pytest.approx(
            2.0 ** (-h - 0.5) / gamma_fn(0.5 - h), rel=1e-14
        )

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            eval_fractional_kernel(1.0, 0.5)
        with pytest.raises(DomainError):
            eval_fractional_kernel(-1.0, 0.1)
        with pytest.raises(DomainError):
            bernstein_weight(0.0, 0.1)


class TestSoeApprox:
    def test_table_eval(self, soe_n4):
        # Frozen: published N=4 set evaluated at t=1 reproduces the kernel
        # value 1 to ~7.4%; the stored digits are a regression oracle.
        assert eval_soe(soe_n4, 1.0) == pytest.approx(0.9257073559838191, rel=1e-12)
        assert eval_soe(soe_n4, 1.0) == pytest.approx(0.92571, abs=5e-6)

    def test_empty_soe(self):
        empty = SoeApprox(np.array([]), np.array([]))
        assert empty.n_terms == 0
        assert eval_soe(empty, 0.3) == 0.0
        # sup over [1/128, 1] is the kernel value at delta; frozen oracle.
        err = sup_error(empty, 0.07, 1 / 128, 1.0)
        assert err == pytest.approx(8.055644400453751, rel=1e-12)
        assert err == pytest.approx(8.056, abs=5e-4)

    def test_table_n4_sup_error(self, soe_n4):
        # The published 4-term set is inaccurate near delta; frozen measurement.
        assert sup_error(soe_n4, 0.07, 1 / 128, 1.0) == pytest.approx(0.9056, abs=5e-4)

    def test_validation(self):
        with pytest.raises(DomainError):
            SoeApprox(np.array([1.0]), np.array([1.0, 2.0]))
        with pytest.raises(DomainError):
            SoeApprox(np.array([-1.0]), np.array([1.0]))
        with pytest.raises(DomainError):
            SoeApprox(np.array([1.0]), np.array([-1.0]))
        with pytest.raises(DomainError):
            SoeApprox(np.array([1.0]), np.array([1.0]), valid_from=1.0, valid_to=0.5)

    def test_zero_node_allowed(self):
        soe = SoeApprox(np.array([0.0]), np.array([2.0]))
        assert eval_soe(soe, 5.0) == 2.0


class TestGenerateSoe:
    def test_certificate(self):
        soe = generate_soe(0.07, 1 / 128, 1.0, 1e-3)
        assert soe.n_terms >= 1
        assert sup_error(soe, 0.07, 1 / 128, 1.0) <= 1e-3

    def test_monotonic_in_eps(self):
        n_loose = generate_soe(0.07, 1 / 128, 1.0, 1e-3).n_terms
        n_tight = generate_soe(0.07, 1 / 128, 1.0, 1e-5).n_terms
        assert n_tight >= n_loose

    def test_monotonic_in_delta(self):
        n_fine = generate_soe(0.07, 1 / 128, 1.0, 1e-3).n_terms
        n_coarse = generate_soe(0.07, 1 / 64, 1.0, 1e-3).n_terms
        assert n_fine >= n_coarse

    def test_monotonic_in_horizon(self):
        n_long = generate_soe(0.07, 1 / 128, 2.0, 1e-3).n_terms
        n_short = generate_soe(0.07, 1 / 128, 1.0, 1e-3).n_terms
        assert n_long >= n_short

    def test_deterministic(self):
        a = generate_soe(0.1, 1 / 100, 1.0, 1e-3)
        b = generate_soe(0.1, 1 / 100, 1.0, 1e-3)
        assert np.array_equal(a.nodes, b.nodes)
        assert np.array_equal(a.weights, b.weights)

    def test_invalid_args(self):
        with pytest.raises(DomainError):
            generate_soe(0.6, 1 / 128, 1.0, 1e-3)
        with pytest.raises(DomainError):
            generate_soe(0.1, 2.0, 1.0, 1e-3)
        with pytest.raises(DomainError):
            generate_soe(0.1, 1 / 128, 1.0, 0.0)

    def test_unreachable_eps_reports_best(self):
        with pytest.raises(KernelError) as err:
            generate_soe(0.07, 1e-6, 10.0, 1e-14)
        assert err.value.best_error is not None
        assert math.isfinite(err.value.best_error)


class TestSoeIo:
    def test_round_trip(self, tmp_path):
        soe = generate_soe(0.07, 1 / 128, 1.0, 1e-3)
        path = tmp_path / "nodes.csv"
        write_soe(path, soe)
        back = read_soe(path)
        assert np.array_equal(back.nodes, soe.nodes)
        assert np.array_equal(back.weights, soe.weights)

    def test_byte_identical_rewrite(self, tmp_path):
        soe = generate_soe(0.07, 1 / 128, 1.0, 1e-3)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_soe(p1, soe)
        write_soe(p2, soe)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("lambda,omega\n")
        assert read_soe(path).n_terms == 0

    def test_parse_errors(self, tmp_path):
        bad_header = tmp_path / "h.csv"
        bad_header.write_text("nodes,weights\n1,1\n")
        with pytest.raises(ParseError) as err:
            read_soe(bad_header)
        assert err.value.line == 1

        bad_value = tmp_path / "v.csv"
        bad_value.write_text("lambda,omega\n1.0,1.0\nx,2.0\n")
        with pytest.raises(ParseError) as err:
            read_soe(bad_value)
        assert err.value.line == 3

        bad_sign = tmp_path / "s.csv"
        bad_sign.write_text("lambda,omega\n1.0,-1.0\n")
        with pytest.raises(ParseError):
            read_soe(bad_sign)
