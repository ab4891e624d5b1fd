import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clippair.gradcheck import (
    GradReport,
    certify_aux_loss,
    certify_boundary_loss,
    certify_clip_loss,
    check,
    finite_diff,
)


class TestFiniteDiff:
    def test_quadratic(self):
        grad = finite_diff(lambda x: float(x[0] ** 2), np.array([3.0]))
        assert abs(grad[0] - 6.0) < 1e-8

    def test_constant(self):
        grad = finite_diff(lambda x: 7.5, np.array([1.0, -2.0, 0.3]))
        np.testing.assert_array_equal(grad, 0.0)

    def test_linear_exact_for_any_step(self):
        coeff = np.array([0.3, -1.2, 0.9])
        x = np.array([0.1, 0.5, -0.4])
        for h in (1e-7, 1e-5, 1e-3):
            grad = finite_diff(lambda v: float(coeff @ v), x, h)
            np.testing.assert_allclose(grad, coeff, atol=1e-9)

    def test_preserves_input_shape(self):
        grad = finite_diff(lambda m: float(m.sum() ** 2), np.ones((2, 3)))
        assert grad.shape == (2, 3)

    def test_non_finite_probe_reported(self):
        def f(x):
            return float("nan") if x[1] > 1.0 else float(x.sum())

        with pytest.raises(ValueError, match="coordinate 1"):
            finite_diff(f, np.array([0.0, 1.0]))

    def test_invalid_step(self):
        with pytest.raises(ValueError):
            finite_diff(lambda x: 0.0, np.zeros(1), h=0.0)


class TestCheck:
    def test_identical_passes(self):
        report = check(np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        assert report.passed and report.max_rel_error == 0.0

    def test_boundary_case_passes(self):
        report = check(np.array([1.0]), np.array([1.00005]), tol_rel=1e-4)
        assert report.passed

    def test_failure_names_worst_coordinate(self):
        report = check(np.array([1.0]), np.array([1.1]), tol_rel=1e-4, tol_abs=1e-6)
        assert not report.passed and report.worst_coordinate == 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            check(np.zeros(2), np.zeros(3))

    def test_tiny_absolute_error_passes(self):
        report = check(np.array([0.0]), np.array([1e-9]))
        assert report.passed  # rel error is large but abs error under tol_abs

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=6))
    @settings(max_examples=40)
    def test_symmetric(self, values):
        a = np.array(values)
        b = a + 0.01
        one = check(a, b)
        two = check(b, a)
        assert one.max_rel_error == two.max_rel_error
        assert one.max_abs_error == two.max_abs_error
        assert one.passed == two.passed


class TestCertification:
    @pytest.mark.parametrize(
        "certify", [certify_clip_loss, certify_boundary_loss, certify_aux_loss]
    )
    def test_sample_seeds_pass(self, certify):
        for seed in range(10):
            report = certify(seed)
            assert isinstance(report, GradReport)
            assert report.passed, (certify.__name__, seed, report)
