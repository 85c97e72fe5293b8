import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpl.errors import BoxTooSmallError, ContractViolation
from lpl.potentials import quadratic_potential, zero_potential
from lpl.proximal import (MoreauEnvelope, ShadowDrift, box_indicator, double_well_regularizer, l1_regularizer,
                          logcosh_regularizer, moreau_grad, moreau_value, prox_box_indicator, prox_bruteforce_oracle,
                          prox_fixed_point_check, prox_l1, prox_quadratic, prox_tv2d, quadratic_regularizer,
                          shadow_drift_eval, tv_energy, tv_value, zero_regularizer)

finite = st.floats(-50, 50, allow_nan=False)


class TestAnalyticProx:
    def test_quadratic(self):
        assert np.allclose(prox_quadratic(1.0, 1.0, np.array([2.0, 2.0])), [1.0, 1.0])
        assert np.allclose(prox_quadratic(3.0, 0.5, np.array([5.0])), [2.0])

    def test_quadratic_small_gamma(self):
        x = np.array([3.0, -4.0])
        assert np.linalg.norm(prox_quadratic(1.0, 1e-8, x) - x) <= 1e-7 * np.linalg.norm(x)

    def test_soft_threshold(self):
        assert np.allclose(prox_l1(1.0, 1.0, np.array([3.0, -0.5])), [2.0, 0.0])
        assert np.allclose(prox_l1(1.0, 1.0, np.zeros(3)), 0.0)
        assert np.allclose(prox_l1(2.0, 0.25, np.array([1.0])), [0.5])

    def test_box(self):
        lo, hi = np.zeros(2), np.ones(2)
        assert np.allclose(prox_box_indicator(lo, hi, 1.0, np.array([2.0, -1.0])), [1.0, 0.0])
        inside = np.array([0.3, 0.9])
        assert np.array_equal(prox_box_indicator(lo, hi, 1.0, inside), inside)
        x = np.array([-3.0, 0.5])
        assert np.array_equal(prox_box_indicator(lo, hi, 0.1, x), prox_box_indicator(lo, hi, 10.0, x))

    def test_box_bounds_reversed(self):
        with pytest.raises(ContractViolation):
            prox_box_indicator(np.array([1.0]), np.array([0.0]), 1.0, np.zeros(1))
        with pytest.raises(ContractViolation):
            box_indicator([1.0], [0.0])

    def test_weakly_convex_step_limit(self):
        g = double_well_regularizer(0.25)
        with pytest.raises(ContractViolation):
            g.prox(0.5, np.zeros(1))
        with pytest.raises(ContractViolation):
            MoreauEnvelope(g, 1.0)


class TestOracle:
    def test_quadratic(self):
        out = prox_bruteforce_oracle(lambda y: 0.5 * np.sum(y * y, axis=1), 1.0, np.array([2.0]), (-5, 5), 1e-2)
        assert out == pytest.approx([1.0], abs=1e-4)

    def test_absolute_value(self):
        out = prox_bruteforce_oracle(lambda y: np.sum(np.abs(y), axis=1), 1.0, np.array([3.0]), (-5, 5), 1e-2)
        assert out == pytest.approx([2.0], abs=1e-4)

    def test_double_well_ground_truth(self):
        c, gamma, x = 0.25, 0.1, 1.5
        out = prox_bruteforce_oracle(lambda y: c * np.sum((y * y - 1) ** 2, axis=1), gamma, np.array([x]), (-4, 4), 1e-2)
        y = out[0]
        # stationarity of |x - y|^2 / (2 gamma) + c (y^2 - 1)^2
        assert abs((y - x) / gamma + 4 * c * y * (y * y - 1)) < 1e-3
        assert double_well_regularizer(c).prox(gamma, np.array([x])) == pytest.approx(out, abs=1e-5)

    def test_box_too_small(self):
        with pytest.raises(BoxTooSmallError):
            prox_bruteforce_oracle(lambda y: np.zeros(len(y)), 1.0, np.array([10.0]), (-1, 1), 1e-2)

    def test_dimension_limit(self):
        with pytest.raises(ContractViolation):
            prox_bruteforce_oracle(lambda y: np.zeros(len(y)), 1.0, np.zeros(3), (-1, 1), 1e-1)

    @pytest.mark.parametrize("g, gamma", [(logcosh_regularizer(dim=2), 0.15), (l1_regularizer(0.7, 2), 0.8),
                                          (box_indicator([-1, 0], [1, 2]), 0.3)])
    def test_matches_analytic_2d(self, g, gamma, rng):
        for x in rng.uniform(-3, 3, size=(5, 2)):
            out = prox_bruteforce_oracle(g.value, gamma, x, (-6, 6), 2e-2)
            assert np.allclose(out, g.prox(gamma, x), atol=2e-5)


class TestTV:
    def test_constant_image_fixed(self):
        img = np.full((5, 7), 0.4)
        assert np.allclose(prox_tv2d(2.0, 0.5, img, 10), img, atol=1e-15)

    def test_two_pixel_image_against_oracle(self):
        a, b, lam, gamma = 0.2, 0.9, 0.5, 0.3
        out = prox_tv2d(lam, gamma, np.array([[a], [b]]), 200)
        ref = prox_bruteforce_oracle(lambda y: lam * np.abs(y[:, 1] - y[:, 0]), gamma, np.array([a, b]), (-1, 2), 1e-2)
        assert np.allclose(out.ravel(), ref, atol=1e-3)
        assert abs(out[1, 0] - out[0, 0]) < b - a

    def test_large_weight_flattens(self, rng):
        img = rng.random((4, 4))
        out = prox_tv2d(100.0, 1.0, img, 500)
        assert np.abs(out - img.mean()).max() < 1e-2

    def test_validation(self):
        with pytest.raises(ContractViolation):
            prox_tv2d(1.0, 1.0, np.array([[np.nan, 0.0]]), 10)
        with pytest.raises(ContractViolation):
            prox_tv2d(1.0, 1.0, np.zeros((2, 2)), 0)
        with pytest.raises(ContractViolation):
            prox_tv2d(1.0, 1.0, np.zeros(4), 10)

    def test_tv_value(self):
        img = np.array([[0.0, 1.0], [1.0, 1.0]])
        # forward differences with Neumann boundary: only pixel (0, 0) has a nonzero gradient
        assert tv_value(img) == pytest.approx(math.sqrt(2.0))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 8), st.integers(2, 8), st.floats(0.01, 5.0), st.floats(0.01, 2.0),
           st.integers(1, 30), st.integers(0, 2 ** 32 - 1))
    def test_energy_never_exceeds_input(self, h, w, lam, gamma, iters, seed):
        img = np.random.default_rng(seed).random((h, w))
        out = prox_tv2d(lam, gamma, img, iters)
        assert tv_energy(lam, gamma, img, out) <= tv_energy(lam, gamma, img, img) + 1e-12

    def test_deterministic(self, rng):
        img = rng.random((16, 16))
        assert np.array_equal(prox_tv2d(0.3, 0.5, img, 10), prox_tv2d(0.3, 0.5, img, 10))


class TestMoreau:
    def test_huber_branches(self):
        env = MoreauEnvelope(l1_regularizer(1.0), 1.0)
        assert moreau_value(env, np.array([0.5])) == pytest.approx(0.125)
        assert moreau_value(env, np.array([3.0])) == pytest.approx(2.5)
        assert moreau_grad(env, np.array([0.5])) == pytest.approx([0.5])
        assert moreau_grad(env, np.array([3.0])) == pytest.approx([1.0])

    def test_nonconvex_value_against_oracle(self, rng):
        g = double_well_regularizer(0.25)
        gamma = 0.25
        env = MoreauEnvelope(g, gamma)
        for x in rng.uniform(-2.5, 2.5, 10):
            y = prox_bruteforce_oracle(g.value, gamma, np.array([x]), (-5, 5), 1e-2)
            oracle = (x - y[0]) ** 2 / (2 * gamma) + float(g.value(y))
            assert moreau_value(env, np.array([x])) == pytest.approx(oracle, abs=1e-6)

    def test_nonconvex_gradient_finite_differences(self, rng):
        env = MoreauEnvelope(logcosh_regularizer(), 0.2)
        for x in rng.uniform(-3, 3, 20):
            h = 1e-5 * (1 + abs(x))
            fd = (env.value(np.array([x + h])) - env.value(np.array([x - h]))) / (2 * h)
            assert env.gradient(np.array([x]))[0] == pytest.approx(fd, rel=1e-5, abs=1e-8)

    @settings(max_examples=80, deadline=None)
    @given(st.lists(finite, min_size=2, max_size=2), st.floats(1e-3, 0.45), st.floats(1.01, 3.0))
    def test_monotone_in_gamma_and_below_g(self, x, gamma, factor):
        x = np.array(x)
        for g in (l1_regularizer(1.0, 2), logcosh_regularizer(dim=2), quadratic_regularizer(2.0, 2)):
            g1 = min(gamma, 0.9 / max(g.weak_convexity, 1e-9)) / factor
            g2 = g1 * factor
            v1 = MoreauEnvelope(g, g1).value(x)
            v2 = MoreauEnvelope(g, g2).value(x)
            tol = 1e-12 * (1 + abs(v1))
            assert v2 <= v1 + tol
            assert v1 <= float(g.value(x)) + tol

    def test_envelope_of_box_is_finite(self):
        env = MoreauEnvelope(box_indicator([0.0], [1.0]), 0.5)
        assert moreau_value(env, np.array([3.0])) == pytest.approx(4.0)

    def test_hessian_quadratic_exact(self):
        env = MoreauEnvelope(quadratic_regularizer(2.0, 3), 0.25)
        assert np.allclose(env.hessian(np.array([1.0, -2.0, 0.5])), 2.0 / 1.5 * np.eye(3), atol=1e-12)


class TestShadowDrift:
    def test_zero_regularizer(self, rng):
        f = quadratic_potential(1.5, center=[0.2, 0.1], dim=2)
        sd = ShadowDrift(f, zero_regularizer(2), 0.3)
        y = rng.normal(size=2)
        assert np.allclose(shadow_drift_eval(sd, y), f.gradient(y), atol=1e-15)

    def test_zero_potential(self, rng):
        g = l1_regularizer(1.0, 2)
        sd = ShadowDrift(zero_potential(2), g, 0.3)
        y = rng.normal(size=2)
        assert np.allclose(shadow_drift_eval(sd, y), moreau_grad(MoreauEnvelope(g, 0.3), y), atol=1e-15)

    def test_quadratic_pair_affine(self, rng):
        # f = a |y - c|^2 / 2 and g = b |y|^2 / 2: prox y / (1 + gamma b), so
        # b(y) = a (y / (1 + gamma b) - c) + b y / (1 + gamma b)
        a, b, gamma = 1.3, 0.7, 0.4
        c = np.array([0.5, -1.0])
        sd = ShadowDrift(quadratic_potential(a, center=c, dim=2), quadratic_regularizer(b, 2), gamma)
        y = rng.normal(size=2)
        expected = (a + b) / (1 + gamma * b) * y - a * c
        assert np.allclose(sd(y), expected, atol=1e-10)

    def test_two_forms_agree(self, rng):
        f = quadratic_potential(1.0, dim=1)
        g = double_well_regularizer(0.25)
        gamma = 0.3
        env = MoreauEnvelope(g, gamma)
        for y in rng.normal(size=(10, 1)) * 2:
            composed = f.gradient(y - gamma * env.gradient(y)) + env.gradient(y)
            assert np.allclose(ShadowDrift(f, g, gamma)(y), composed, atol=1e-12)


class TestFixedPoint:
    def test_quadratic(self, rng):
        g = quadratic_regularizer(1.7, 3)
        for x in rng.normal(size=(10, 3)):
            assert prox_fixed_point_check(g, 0.6, x) <= 1e-10 * (1 + np.linalg.norm(x))

    def test_nonconvex_half_modulus(self, rng):
        g = logcosh_regularizer()
        gamma = 0.5 / g.weak_convexity
        for x in rng.normal(size=(20, 1)) * 2:
            assert prox_fixed_point_check(g, gamma, x) <= 1e-6

    def test_nonsmooth_excluded(self):
        with pytest.raises(ContractViolation):
            prox_fixed_point_check(l1_regularizer(), 1.0, np.zeros(1))


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=1, max_size=1), st.lists(finite, min_size=1, max_size=1))
def test_prox_lipschitz_pairs(x, y):
    x, y = np.array(x), np.array(y)
    for g, gamma in ((double_well_regularizer(0.25), 0.25), (logcosh_regularizer(), 0.1),
                     (l1_regularizer(2.0), 0.5), (quadratic_regularizer(0.5), 2.0)):
        lip = g.prox_lipschitz(gamma)
        assert np.linalg.norm(g.prox(gamma, x) - g.prox(gamma, y)) <= lip * np.linalg.norm(x - y) + 1e-8


@settings(max_examples=100, deadline=None)
@given(st.floats(-30, 30), st.floats(1e-5, 0.1))
def test_lipschitz_rate_l1(x, gamma):
    g = l1_regularizer(1.0)
    gap = float(g.value(np.array([x]))) - MoreauEnvelope(g, gamma).value(np.array([x]))
    assert -1e-12 <= gap <= gamma / 2 + 1e-12
