"""
SK Thermography - Kernel Unit Tests

Tests for the kernel service:
- sinc and its series fallback
- Central B-splines, Fejer and Jackson-type kernels
- Product kernels and spec strings
- Numerical axiom checks

Run with: pytest backend/app/tests/test_kernels.py -v
"""

import math

import numpy as np
import pytest


# ===========================================
# Test Fixtures
# ===========================================

@pytest.fixture
def rng():
    """Seeded generator for randomized inputs."""
    return np.random.default_rng(7)


# ===========================================
# sinc Tests
# ===========================================

class TestSinc:
    """Tests for the sinc helper."""

    def test_sinc_at_origin(self):
        """sinc(0) should be exactly 1."""
        from app.services.kernel_service import sinc

        assert sinc(0.0) == 1.0

    def test_sinc_zeros_at_integers(self):
        """sinc should vanish at non-zero integers."""
        from app.services.kernel_service import sinc

        values = sinc(np.array([1.0, -2.0, 3.0, 10.0]))
        assert np.all(np.abs(values) < 1e-15)

    def test_series_fallback_is_continuous(self):
        """The series branch should match the quotient just outside the cutoff."""
        from app.services.kernel_service import sinc

        x = 1e-6
        expected = math.sin(math.pi * x) / (math.pi * x)
        assert sinc(x) == pytest.approx(expected, abs=1e-15)

    def test_scalar_input_returns_float(self):
        """Scalar arguments should give plain floats."""
        from app.services.kernel_service import sinc

        assert isinstance(sinc(0.3), float)


# ===========================================
# B-spline Tests
# ===========================================

class TestBSpline:
    """Tests for central B-spline kernels."""

    def test_hat_function_values(self):
        """M_2 is the hat function: 1 at 0, 0 at the support boundary."""
        from app.services.kernel_service import make_bspline

        m2 = make_bspline(2)
        assert m2.evaluate(0.0) == pytest.approx(1.0, abs=1e-15)
        assert m2.evaluate(1.0) == 0.0
        assert m2.evaluate(0.5) == pytest.approx(0.5, abs=1e-15)

    def test_quadratic_spline_peak(self):
        """M_3(0) should be 3/4."""
        from app.services.kernel_service import make_bspline

        assert make_bspline(3).evaluate(0.0) == pytest.approx(0.75, abs=1e-15)

    def test_cubic_spline_values(self):
        """M_4(0) = 2/3 and M_4(1) = 1/6."""
        from app.services.kernel_service import make_bspline

        m4 = make_bspline(4)
        assert m4.evaluate(0.0) == pytest.approx(2.0 / 3.0, abs=1e-14)
        assert m4.evaluate(1.0) == pytest.approx(1.0 / 6.0, abs=1e-14)

    def test_zero_outside_support(self):
        """evaluate(x) = 0 exactly for |x| > s/2."""
        from app.services.kernel_service import make_bspline

        for s in (1, 2, 3, 4, 5):
            kern = make_bspline(s)
            xs = np.array([s / 2.0 + 1e-9, s, -s / 2.0 - 0.3, 100.0])
            assert np.all(kern.evaluate(xs) == 0.0)
            assert kern.support_radius == s / 2.0

    def test_continuous_splines_vanish_at_support_edge(self):
        """From order 2 on the spline is continuous and zero at +-s/2."""
        from app.services.kernel_service import make_bspline

        for s in (2, 3, 4):
            assert make_bspline(s).evaluate(s / 2.0) == 0.0

    def test_box_spline_half_at_edges(self):
        """Order 1 takes 1/2 at +-1/2 so shifted copies still sum to one."""
        from app.services.kernel_service import make_bspline

        box = make_bspline(1)
        assert box.evaluate(0.5) == 0.5
        assert box.evaluate(-0.5) == 0.5
        assert box.evaluate(0.2) == 1.0

    def test_even_symmetry(self, rng):
        """B-splines are even functions."""
        from app.services.kernel_service import make_bspline

        xs = rng.uniform(-3, 3, size=50)
        kern = make_bspline(5)
        assert np.allclose(kern.evaluate(xs), kern.evaluate(-xs), atol=1e-15)

    @pytest.mark.parametrize("s", [0, -1, 2.5, True])
    def test_invalid_order(self, s):
        """Orders below one or non-integers are refused."""
        from app.errors import InvalidParameterError
        from app.services.kernel_service import make_bspline

        with pytest.raises(InvalidParameterError):
            make_bspline(s)


# ===========================================
# Fejer Tests
# ===========================================

class TestFejer:
    """Tests for the Fejer kernel."""

    def test_known_values(self):
        """F(0) = 1/2, F(1) = 2/pi^2, F(2) = 0."""
        from app.services.kernel_service import make_fejer

        fejer = make_fejer()
        assert fejer.evaluate(0.0) == pytest.approx(0.5, abs=1e-15)
        assert fejer.evaluate(1.0) == pytest.approx(2.0 / math.pi ** 2, abs=1e-14)
        assert fejer.evaluate(2.0) == pytest.approx(0.0, abs=1e-15)

    def test_unbounded(self):
        """Fejer has unbounded support."""
        from app.services.kernel_service import make_fejer

        fejer = make_fejer()
        assert not fejer.is_bounded
        assert fejer.spec == "fejer"


# ===========================================
# Jackson Tests
# ===========================================

class TestJackson:
    """Tests for Jackson-type kernels and their normalization."""

    def test_c2_closed_form(self):
        """c_2 = 3 / (8 pi) since the integral of sinc^4 is 2/3."""
        from app.services.kernel_service import make_jackson

        j2 = make_jackson(2)
        assert j2.normalization == pytest.approx(3.0 / (8.0 * math.pi), rel=1e-8)
        assert j2.evaluate(0.0) == pytest.approx(j2.normalization, rel=1e-15)

    def test_unit_integral_against_independent_quadrature(self):
        """J_2 should integrate to one on a fine independent grid."""
        from scipy.integrate import trapezoid

        from app.services.kernel_service import make_jackson

        j2 = make_jackson(2)
        xs = np.linspace(-20000.0, 20000.0, 2_000_001)
        assert trapezoid(j2.evaluate(xs), xs) == pytest.approx(1.0, abs=1e-4)

    def test_j12_unit_integral(self):
        """J_12 integrates to one; its tails are negligible well inside +-400."""
        from scipy.integrate import trapezoid

        from app.services.kernel_service import make_jackson

        j12 = make_jackson(12)
        xs = np.linspace(-400.0, 400.0, 160_001)
        assert trapezoid(j12.evaluate(xs), xs) == pytest.approx(1.0, abs=1e-8)

    def test_normalization_stable_under_refinement(self):
        """c_k changes below the relative tolerance when the step is halved."""
        from app.services.kernel_service import QuadratureSpec, _jackson_integral

        quad = QuadratureSpec()
        coarse, _, _ = _jackson_integral(3, 1.0, quad, refine=1)
        fine, _, _ = _jackson_integral(3, 1.0, quad, refine=2)
        assert abs(coarse - fine) / fine < quad.relative_tolerance

    def test_alpha_scales_integral(self):
        """c_k(alpha) = c_k(1) / alpha."""
        from app.services.kernel_service import jackson_normalization

        assert jackson_normalization(4, 2.0) == pytest.approx(jackson_normalization(4, 1.0) / 2.0, rel=1e-8)

    def test_order_one_normalizes(self):
        """The integral of sinc^2(x / 2 pi) is 2 pi, so c_1 = 1 / (2 pi)."""
        from app.services.kernel_service import make_jackson

        j1 = make_jackson(1)
        assert j1.normalization == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-9)
        assert j1.spec == "jackson:1:1"

    def test_closed_form_tail(self):
        """Beyond integer L the sinc^2 tails hold 1 / (pi^2 L)."""
        from app.services.kernel_service import _jackson_tail

        assert _jackson_tail(1, 50.0) == pytest.approx(1.0 / (math.pi ** 2 * 50.0), rel=1e-12)

    def test_clipped_window_keeps_accuracy(self):
        """A node cap below the tail bound clips the window without losing c_2."""
        from app.services.kernel_service import QuadratureSpec, jackson_normalization

        quad = QuadratureSpec(max_nodes=4001)
        assert jackson_normalization(2, 1.0, quad) == pytest.approx(3.0 / (8.0 * math.pi), rel=1e-9)

    def test_node_cap_below_one_period(self):
        from app.errors import NumericError
        from app.services.kernel_service import QuadratureSpec, make_jackson

        with pytest.raises(NumericError) as exc_info:
            make_jackson(2, quad=QuadratureSpec(max_nodes=3))
        assert exc_info.value.diagnostic["k"] == 2

    @pytest.mark.parametrize("k,alpha", [(0, 1.0), (2, 0.5), (2.5, 1.0)])
    def test_invalid_parameters(self, k, alpha):
        """k >= 1 integer and alpha >= 1 are required."""
        from app.errors import InvalidParameterError
        from app.services.kernel_service import make_jackson

        with pytest.raises(InvalidParameterError):
            make_jackson(k, alpha)

    def test_spec_string(self):
        """Jackson spec strings carry order and alpha."""
        from app.services.kernel_service import make_jackson

        assert make_jackson(12).spec == "jackson:12:1"


# ===========================================
# Product Kernel and Spec Tests
# ===========================================

class TestProductKernel:
    """Tests for tensor-product kernels."""

    def test_bspline_product_at_origin(self):
        """M_3 x M_3 at the origin equals 0.75^2."""
        from app.services.kernel_service import make_bspline, product_kernel

        kern = product_kernel([make_bspline(3), make_bspline(3)])
        assert kern.evaluate(0.0, 0.0) == pytest.approx(0.5625, abs=1e-15)

    def test_zero_outside_bounded_factor(self):
        """A coordinate outside a bounded factor's support zeroes the product."""
        from app.services.kernel_service import make_bspline, make_fejer, product_kernel

        kern = product_kernel([make_fejer(), make_bspline(2)])
        assert kern.evaluate(0.3, 1.5) == 0.0

    def test_single_factor_identity(self, rng):
        """A one-factor product behaves like the factor."""
        from app.services.kernel_service import make_bspline, product_kernel

        factor = make_bspline(4)
        xs = rng.uniform(-3, 3, size=20)
        assert np.array_equal(product_kernel([factor]).evaluate(xs), factor.evaluate(xs))

    def test_product_equals_factor_product(self, rng):
        """Evaluation is the exact product of factor evaluations."""
        from app.services.kernel_service import make_bspline, make_jackson, product_kernel

        fx, fy = make_jackson(2), make_bspline(3)
        kern = product_kernel([fx, fy])
        xs, ys = rng.uniform(-5, 5, size=30), rng.uniform(-2, 2, size=30)
        assert np.array_equal(kern.evaluate(xs, ys), fx.evaluate(xs) * fy.evaluate(ys))

    def test_empty_product_refused(self):
        from app.errors import InvalidParameterError
        from app.services.kernel_service import product_kernel

        with pytest.raises(InvalidParameterError):
            product_kernel([])

    def test_wrong_coordinate_count(self):
        """A bivariate kernel needs exactly two coordinates."""
        from app.errors import InvalidParameterError
        from app.services.kernel_service import bivariate_kernel

        with pytest.raises(InvalidParameterError):
            bivariate_kernel("bspline:2").evaluate(0.0)

    @pytest.mark.parametrize("spec,family,order", [
        ("bspline:3", "bspline", 3),
        ("BSpline:2", "bspline", 2),
        ("jackson:12", "jackson", 12),
        ("jackson:4:2", "jackson", 4),
        ("fejer", "fejer", 0),
    ])
    def test_parse_kernel_spec(self, spec, family, order):
        """Spec strings map to the matching kernel."""
        from app.services.kernel_service import parse_kernel_spec

        kern = parse_kernel_spec(spec)
        assert kern.family.value == family
        assert kern.order == order

    @pytest.mark.parametrize("spec", ["", "gauss:2", "bspline", "bspline:x", "fejer:1", "jackson:2:1:3"])
    def test_bad_specs(self, spec):
        """Malformed specs raise InvalidParameterError."""
        from app.errors import InvalidParameterError
        from app.services.kernel_service import parse_kernel_spec

        with pytest.raises(InvalidParameterError):
            parse_kernel_spec(spec)

    def test_bivariate_spec(self):
        """The image kernel reports its factor spec."""
        from app.services.kernel_service import bivariate_kernel

        kern = bivariate_kernel("bspline:3")
        assert kern.dimension == 2
        assert kern.spec == "bspline:3"
        assert kern.effective_support_radius == (1.5, 1.5)


# ===========================================
# Axiom Check Tests
# ===========================================

class TestAxioms:
    """Tests for the numerical kernel condition estimates."""

    @pytest.mark.parametrize("s", [2, 3, 4])
    def test_bspline_partition_of_unity_exact(self, s):
        """Bounded B-splines sum to one on every lattice shift."""
        from app.services.kernel_service import check_axioms, make_bspline

        report = check_axioms(make_bspline(s))
        assert report.partition_of_unity_max_deviation < 1e-12
        assert report.summability_estimate == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("k", [2, 12])
    def test_jackson_partition_of_unity(self, k):
        """Truncated Jackson sums stay within 1e-3 of one at k-range +-200."""
        from app.services.kernel_service import check_axioms, make_jackson

        report = check_axioms(make_jackson(k))
        assert report.partition_of_unity_max_deviation < 1e-3

    def test_bspline2_first_moment(self):
        """The first absolute moment of M_2 is at most one."""
        from app.services.kernel_service import check_axioms, make_bspline

        report = check_axioms(make_bspline(2), beta=1.0)
        assert report.moment_estimate <= 1.0 + 1e-12
        assert report.moment_beta == 1.0

    def test_unbounded_deviation_shrinks_with_range(self):
        """Fejer's truncated deviation decreases as the k-range grows."""
        from app.services.kernel_service import GridSpec, check_axioms, make_fejer

        fejer = make_fejer()
        deviations = [
            check_axioms(fejer, grid=GridSpec(u_step=0.05, k_range=r)).partition_of_unity_max_deviation
            for r in (10, 50, 200)
        ]
        assert deviations[0] > deviations[1] > deviations[2]

    def test_l1_and_origin_bound(self):
        """B-splines are non-negative: L1 norm one, bounded by their peak near 0."""
        from app.services.kernel_service import check_axioms, make_bspline

        report = check_axioms(make_bspline(3))
        assert report.l1_norm_estimate == pytest.approx(1.0, abs=1e-4)
        assert report.origin_bound == pytest.approx(0.75, abs=1e-12)

    def test_report_fields_finite(self):
        """Every report field is finite and non-negative."""
        from app.services.kernel_service import check_axioms, make_jackson

        report = check_axioms(make_jackson(2), beta=0.5)
        for key, value in report.to_dict().items():
            if key != "grid_spec":
                assert math.isfinite(value) and value >= 0

    def test_invalid_beta(self):
        from app.errors import InvalidParameterError
        from app.services.kernel_service import check_axioms, make_bspline

        with pytest.raises(InvalidParameterError):
            check_axioms(make_bspline(2), beta=0.0)
