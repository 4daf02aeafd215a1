import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from stefan2p.errors import DegenerateInterfaceError, GeometryError
from stefan2p.geometry import (HeightState, build_reference_geometry,
                               bump_normalization, coeff_samples, mollify,
                               mollifier_symbol, moving_normal,
                               regularized_height, tangential_derivative,
                               validate_height)


class TestReferenceGeometry:
    def test_circle_unit_norms(self, geom):
        assert np.max(np.abs(np.hypot(geom.N[:, 0], geom.N[:, 1]) - 1)) < 1e-12
        assert np.max(np.abs(np.hypot(geom.tau[:, 0], geom.tau[:, 1]) - 1)) < 1e-12
        assert np.max(np.abs(np.sum(geom.N * geom.tau, axis=1))) < 1e-12

    def test_circle_curvature_is_minus_one(self, geom):
        # counterclockwise circle: the curvature formula gives -1/R
        assert np.allclose(geom.H, -1.0, atol=1e-12)

    def test_curvature_scales_with_radius(self):
        g = build_reference_geometry(2.0, 4.0, 64)
        assert np.allclose(g.H, -0.5, atol=1e-12)

    def test_clockwise_flag_flips_curvature(self):
        g = build_reference_geometry(1.0, 2.0, 64, clockwise=True)
        assert np.allclose(g.H, 1.0, atol=1e-12)
        # outward normal either way
        assert np.all(np.sum(g.N * g.z, axis=1) > 0)

    def test_perturbed_curvature_vs_fine_difference_oracle(self):
        # refine-and-compare: 4th-order centered differences of the same
        # curvature formula on an 8x finer curve sampling
        perturb = [[3, 0.05, 0.0]]
        g = build_reference_geometry(1.0, 2.0, 256, perturb=perturb)
        gf = build_reference_geometry(1.0, 2.0, 2048, perturb=perturb)
        th = gf.theta
        dth = th[1] - th[0]
        z = gf.z

        def d1(f):
            return (-np.roll(f, -2) + 8 * np.roll(f, -1)
                    - 8 * np.roll(f, 1) + np.roll(f, 2)) / (12 * dth)

        def d2(f):
            return (-np.roll(f, -2) + 16 * np.roll(f, -1) - 30 * f
                    + 16 * np.roll(f, 1) - np.roll(f, 2)) / (12 * dth**2)

        zp = np.stack([d1(z[:, 0]), d1(z[:, 1])], axis=1)
        zpp = np.stack([d2(z[:, 0]), d2(z[:, 1])], axis=1)
        H_fd = (zp[:, 1] * zpp[:, 0] - zp[:, 0] * zpp[:, 1]) / np.hypot(
            zp[:, 0], zp[:, 1]) ** 3
        assert np.max(np.abs(H_fd[::8] - g.H)) < 1e-8

    def test_winding_and_closure(self, geom):
        ang = np.unwrap(np.arctan2(geom.z[:, 1], geom.z[:, 0]))
        winding = (ang[-1] - ang[0] + (ang[1] - ang[0])) / (2 * np.pi)
        assert abs(winding - 1.0) < 1e-10

    def test_rejects_bad_configs(self):
        with pytest.raises(GeometryError):
            build_reference_geometry(2.0, 1.0, 64)
        with pytest.raises(GeometryError):
            build_reference_geometry(1.0, 2.0, 48)   # not a power of two
        with pytest.raises(GeometryError):
            build_reference_geometry(1.0, 2.0, 64, perturb=[[2, 1.2, 0.0]])
        with pytest.raises(GeometryError):
            # touches the outer circle
            build_reference_geometry(1.0, 2.0, 64, perturb=[[1, 1.05, 0.0]])


class TestMollifier:
    def test_normalization_constant(self):
        mass, _ = quad(lambda x: np.exp(-1.0 / (1.0 - x * x)), -1, 1,
                       epsabs=1e-14, epsrel=1e-14)
        assert abs(bump_normalization() - 1.0 / mass) < 1e-14

    def test_preserves_constants(self, geom):
        f = 3.7 * np.ones(geom.n_theta)
        assert np.max(np.abs(mollify(f, 0.2) - f)) < 1e-13

    def test_cosine_multiplier_matches_quadrature(self, geom):
        sigma, k = 0.2, 1
        C = bump_normalization()
        val, _ = quad(lambda x: np.exp(-1.0 / (1 - x * x)) * np.cos(k * sigma * x),
                      -1, 1, epsabs=1e-14, epsrel=1e-14)
        m1 = C * val
        f = np.cos(k * geom.theta)
        assert np.max(np.abs(mollify(f, sigma) - m1 * f)) < 1e-12

    def test_symbol_properties(self):
        m = mollifier_symbol(0.3, 64)
        assert m[0] == 1.0
        assert np.all(np.abs(m) <= 1.0 + 1e-14)

    def test_rejects_large_sigma(self):
        with pytest.raises(GeometryError):
            mollifier_symbol(np.pi, 8)

    def test_double_smoothing_squares_the_symbol(self, geom):
        m = mollifier_symbol(0.25, geom.n_theta // 2)
        f = np.cos(5 * geom.theta)
        twice = mollify(mollify(f, 0.25), 0.25)
        assert np.max(np.abs(twice - m[5] ** 2 * f)) < 1e-12

    def test_self_adjoint_on_samples(self, geom):
        rng = np.random.default_rng(7)
        f = rng.standard_normal(geom.n_theta)
        g = rng.standard_normal(geom.n_theta)
        lhs = np.dot(mollify(f, 0.2), g)
        rhs = np.dot(f, mollify(g, 0.2))
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))

    def test_smoothing_error_shrinks_with_kappa(self, geom):
        f = np.cos(3 * geom.theta) + 0.5 * np.sin(5 * geom.theta)
        errs = [np.max(np.abs(mollify(f, k, power=2) - f))
                for k in (0.4, 0.2, 0.1)]
        assert errs[2] < errs[1] < errs[0]

    def test_commutes_with_tangential_derivative(self, geom):
        rng = np.random.default_rng(11)
        f = rng.standard_normal(geom.n_theta)
        a = tangential_derivative(geom, mollify(f, 0.15))
        b = mollify(tangential_derivative(geom, f), 0.15)
        assert np.max(np.abs(a - b)) < 1e-10

    @given(k=st.integers(min_value=0, max_value=20),
           s=st.floats(min_value=0.0, max_value=4.0))
    @settings(max_examples=20, deadline=None)
    def test_contraction_in_every_mode(self, k, s):
        m = mollifier_symbol(0.2, 32)
        # per-mode contraction implies contraction in every |.|_s norm
        assert abs(m[min(k, 32)]) <= 1.0 + 1e-14


class TestTangentialDerivative:
    def test_constant(self, geom):
        assert np.max(np.abs(tangential_derivative(geom, np.ones(256)))) < 1e-14

    def test_unit_circle_sine(self, geom):
        d = tangential_derivative(geom, np.sin(geom.theta))
        assert np.max(np.abs(d - np.cos(geom.theta))) < 1e-12

    def test_arclength_scaling(self):
        g = build_reference_geometry(2.0, 4.0, 128)
        d = tangential_derivative(g, np.sin(g.theta))
        assert np.max(np.abs(d - 0.5 * np.cos(g.theta))) < 1e-12


class TestMovingNormal:
    def test_zero_height(self, geom):
        h = HeightState.zero(geom.k_max)
        n, nt, g = moving_normal(geom, h)
        assert np.max(np.abs(n - geom.N)) < 1e-14
        assert np.max(np.abs(nt - geom.N)) < 1e-14
        assert np.max(np.abs(g - 1.0)) < 1e-14

    def test_constant_height(self, geom):
        c = 0.2
        h = HeightState.from_modes([[0, c, 0.0]], geom.k_max)
        n, nt, g = moving_normal(geom, h)
        assert np.max(np.abs(n - geom.N)) < 1e-13
        assert np.max(np.abs(g - (1 + geom.H * c) ** 2)) < 1e-13

    def test_first_mode_at_quarter_turn(self, geom):
        eps = 0.1
        h = HeightState.from_modes([[1, eps, 0.0]], geom.k_max)
        n, _, _ = moving_normal(geom, h)
        i = geom.n_theta // 4        # theta = pi/2: dbar h = -eps, 1 + Hh = 1
        expect = (eps * geom.tau[i] + geom.N[i]) / np.sqrt(1 + eps**2)
        assert np.max(np.abs(n[i] - expect)) < 1e-13

    def test_unit_normal_and_positive_projection(self, geom):
        h = HeightState.from_modes([[2, 0.1, 0.05], [5, 0.0, 0.02]], geom.k_max)
        n, nt, g = moving_normal(geom, h)
        assert np.max(np.abs(np.hypot(n[:, 0], n[:, 1]) - 1)) < 1e-13
        assert np.all(np.sum(n * geom.N, axis=1) > 0)
        hs = h.samples(geom.n_theta)
        proj = (1 + geom.H * hs) / np.sqrt(g)
        assert np.max(np.abs(np.sum(n * geom.N, axis=1) - proj)) < 1e-13

    def test_degenerate_interface_raises(self, geom):
        h = HeightState.from_modes([[0, 1.2, 0.0]], geom.k_max)
        with pytest.raises(DegenerateInterfaceError):
            moving_normal(geom, h.samples(geom.n_theta))


class TestHeightState:
    def test_samples_round_trip(self, geom):
        h = HeightState.from_modes([[2, 0.03, -0.01], [7, 0.0, 0.004]],
                                   geom.k_max)
        s = h.samples(geom.n_theta)
        h2 = HeightState.from_samples(s, geom.k_max)
        assert np.max(np.abs(h2.coeffs - h.coeffs)) < 1e-15

    def test_samples_are_real_modes(self, geom):
        h = HeightState.from_modes([[3, 0.1, 0.2]], geom.k_max)
        s = h.samples(geom.n_theta)
        expect = 0.1 * np.cos(3 * geom.theta) + 0.2 * np.sin(3 * geom.theta)
        assert np.max(np.abs(s - expect)) < 1e-14

    def test_validate_rejects_large_amplitude(self, geom):
        h = HeightState.from_modes([[0, 0.0, 0.0]], geom.k_max)
        h.coeffs[0] = 1.5  # larger than r_outer - r_gamma
        with pytest.raises(DegenerateInterfaceError):
            validate_height(geom, h)

    @given(amp=st.floats(min_value=-0.3, max_value=0.3),
           k=st.integers(min_value=0, max_value=8))
    @settings(max_examples=25, deadline=None)
    def test_regularization_contracts_every_norm(self, geom, amp, k):
        from stefan2p.diagnostics import boundary_sobolev_norm
        h = HeightState.from_modes([[k, amp, amp / 2]], geom.k_max)
        hk = regularized_height(h, 0.2)
        for s in (0.0, 1.0, 2.5):
            assert (boundary_sobolev_norm(hk, s)
                    <= boundary_sobolev_norm(h, s) + 1e-14)
