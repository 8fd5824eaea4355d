import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from nodkit.core import default_eta, solve_C
from nodkit.probes import central_gradient
from nodkit.problems import (
    BilinearInstance,
    InstanceError,
    abs_sin_integral,
    h_prime,
    h_val,
    make_bilinear,
    make_instance,
    make_pure_convex,
    make_quadratic_skew,
    make_sin_coupling,
    random_bilinear,
    rotation_generator,
)

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def quad_abs_sin(w):
    # split at the kinks so the adaptive rule integrates smooth pieces
    pts = [k * math.pi for k in range(-10, 11) if min(0, w) < k * math.pi < max(0, w)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(lambda s: abs(math.sin(s)), 0, w, points=pts or None,
                                limit=200, epsabs=1e-14, epsrel=1e-14)
    return val


def quad_h(w):
    val, _ = integrate.quad(lambda t: 2 * t - quad_abs_sin(t), 0, w, limit=200,
                            epsabs=1e-13, epsrel=1e-13)
    return val


class TestQuadraticSkew:
    def test_rotation(self):
        p = make_quadratic_skew(np.eye(2), ROT)
        assert np.allclose(p.T(np.array([1.0, 0.0])), [1.0, -1.0])
        assert np.array_equal(p.z_star, [0.0, 0.0])

    def test_constants(self):
        p = make_quadratic_skew(np.diag([1.0, 4.0]), np.zeros((2, 2)))
        assert (p.mu, p.L_phi, p.L_S) == (1.0, 4.0, 0.0)

    def test_scaled_generator(self):
        p = make_quadratic_skew(np.eye(2), 8 * ROT)
        assert p.L_S == pytest.approx(8.0, rel=1e-14)
        assert default_eta(p.mu, p.L_phi, p.L_S) == pytest.approx(solve_C() / 64, rel=1e-14)

    @pytest.mark.parametrize("A,K", [
        (np.array([[1.0, 1.0], [0.0, 1.0]]), ROT),
        (np.eye(2), np.eye(2)),
        (np.diag([0.0, 1.0]), ROT),
        (-np.eye(2), ROT),
    ])
    def test_rejects(self, A, K):
        with pytest.raises(InstanceError):
            make_quadratic_skew(A, K)


class TestPureConvex:
    def test_origin(self):
        assert np.array_equal(make_pure_convex(np.eye(3)).z_star, np.zeros(3))

    def test_shifted(self):
        p = make_pure_convex(np.diag([1.0, 10.0]), [1.0, 0.0])
        assert np.allclose(p.z_star, [-1.0, 0.0], atol=1e-15)
        assert (p.mu, p.L_phi, p.L_S) == (1.0, 10.0, 0.0)

    def test_singular(self):
        with pytest.raises(InstanceError):
            make_pure_convex(np.diag([0.0, 1.0]))


class TestBilinear:
    def test_unit_scalar(self):
        inst = BilinearInstance([[1.0]], [0.0], [[1.0]], [0.0], [[1.0]])
        p = make_bilinear(inst)
        z = np.array([0.3, -0.7])
        assert np.allclose(p.S(z), [z[1], -z[0]])
        assert p.L_S == pytest.approx(1.0)
        assert np.allclose(p.z_star, 0.0)

    def test_scaled_constants(self):
        inst = BilinearInstance(np.diag([1.0, 2.0]), [0, 0], np.diag([4.0, 8.0]), [0, 0],
                                3.0 * np.eye(2))
        p = make_bilinear(inst)
        assert p.mu == 1.0
        assert p.L_phi == pytest.approx(2.0)
        assert p.L_S == pytest.approx(1.5)

    @pytest.mark.parametrize("seed", range(4))
    def test_z_star_by_dense_solve(self, seed):
        inst = random_bilinear(3, 2, 1.0, 2.0, 3.0, 5.0, 2.0, seed=seed)
        A = np.zeros((5, 5))
        A[:3, :3], A[:3, 3:] = inst.A_g, inst.M
        A[3:, :3], A[3:, 3:] = -inst.M.T, inst.A_h
        sol = np.linalg.lstsq(A, -np.concatenate([inst.b_g, inst.b_h]), rcond=None)[0]
        p = make_bilinear(inst)
        scale = np.array([1, 1, 1, math.sqrt(2), math.sqrt(2)])
        assert np.allclose(p.z_star, sol * scale, atol=1e-12)
        assert p.star_residual() <= 1e-9 * (1 + np.linalg.norm(p.z_star))

    def test_random_constants_exact(self):
        inst = random_bilinear(4, 3, 1.0, 2.0, 5.0, 7.0, 3.0, seed=11)
        assert inst.mu_x == pytest.approx(1.0) and inst.L_x == pytest.approx(5.0)
        assert inst.mu_y == pytest.approx(2.0) and inst.L_y == pytest.approx(7.0)
        assert inst.L_xy == pytest.approx(3.0)

    def test_understated_coupling_rejected(self):
        with pytest.raises(InstanceError):
            BilinearInstance([[1.0]], [0.0], [[1.0]], [0.0], [[2.0]], L_xy_claim=1.0)


class TestSinPotential:
    @pytest.mark.parametrize("w,expected", [
        (0.0, 0.0), (math.pi, 2.0), (2 * math.pi, 4.0), (math.pi / 2, 1.0),
    ])
    def test_abs_sin_integral(self, w, expected):
        assert abs_sin_integral(w) == pytest.approx(expected, abs=1e-12)
        assert abs_sin_integral(w) == pytest.approx(quad_abs_sin(w), abs=1e-12)

    @pytest.mark.parametrize("w", np.linspace(-10, 10, 41))
    def test_abs_sin_integral_vs_quadrature(self, w):
        assert abs_sin_integral(w) == pytest.approx(quad_abs_sin(w), abs=1e-11)

    def test_h_prime(self):
        assert h_prime(0.0) == 0.0
        assert h_prime(math.pi) == pytest.approx(2 * math.pi - 2, abs=1e-14)
        assert h_prime(math.pi / 2) == pytest.approx(math.pi - 1, abs=1e-14)

    def test_h_val(self):
        assert h_val(0.0) == 0.0
        assert h_val(math.pi) == pytest.approx(math.pi ** 2 - math.pi, abs=1e-13)
        assert h_val(-math.pi) == pytest.approx(math.pi ** 2 - math.pi, abs=1e-13)

    @pytest.mark.parametrize("w", np.linspace(-10, 10, 21))
    def test_h_val_vs_nested_quadrature(self, w):
        assert h_val(w) == pytest.approx(quad_h(w), abs=1e-10)

    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_h_prime_slope_band(self, a, b):
        if abs(a - b) < 1e-6:
            return
        slope = (h_prime(a) - h_prime(b)) / (a - b)
        assert 1 - 1e-7 <= slope <= 2 + 1e-7

    @given(st.floats(0, 50), st.floats(0, 50))
    def test_abs_sin_integral_monotone_one_lipschitz(self, a, b):
        lo, hi = min(a, b), max(a, b)
        diff = abs_sin_integral(hi) - abs_sin_integral(lo)
        assert -1e-12 <= diff <= (hi - lo) + 1e-12

    @given(st.floats(-100, 100))
    def test_abs_sin_integral_odd(self, w):
        assert abs_sin_integral(-w) == -abs_sin_integral(w)

    def test_vectorized(self):
        w = np.linspace(-5, 5, 11)
        assert np.allclose(h_val(w), [h_val(x) for x in w])
        assert np.allclose(h_prime(w), [h_prime(x) for x in w])


class TestSinCoupling:
    def test_origin(self):
        p = make_sin_coupling()
        assert np.array_equal(p.T(np.zeros(2)), np.zeros(2))
        assert p.star_residual() == 0.0

    def test_S_at_half_pi(self):
        p = make_sin_coupling()
        z = np.array([math.pi / 2, math.pi / 2])
        assert np.allclose(p.grad_phi(z), [math.pi - 1, math.pi - 1], atol=1e-14)
        assert np.allclose(p.S(z), [1.0, 1.0], atol=1e-14)

    def test_constants(self):
        p = make_sin_coupling()
        assert (p.mu, p.L_phi, p.L_S) == (1.0, 2.0, 2.0)

    def test_explicit_split_form(self):
        # S = (cos x sin y, -sin x cos y) + (I(x), I(y))
        p = make_sin_coupling()
        rng = np.random.default_rng(1)
        for x, y in rng.uniform(-10, 10, (100, 2)):
            explicit = [math.cos(x) * math.sin(y) + quad_abs_sin(x),
                        -math.sin(x) * math.cos(y) + quad_abs_sin(y)]
            assert np.allclose(p.S(np.array([x, y])), explicit, atol=1e-11)

    def test_reconstruction_exact(self):
        p = make_sin_coupling()
        rng = np.random.default_rng(2)
        for z in rng.uniform(-10, 10, (100, 2)):
            T = np.array([2 * z[0] + math.cos(z[0]) * math.sin(z[1]),
                          2 * z[1] - math.sin(z[0]) * math.cos(z[1])])
            assert np.max(np.abs(p.grad_phi(z) + p.S(z) - T)) <= 4 * np.finfo(float).eps * 20


def builtin_instances():
    return [
        make_pure_convex(np.diag([1.0, 10.0]), [1.0, -2.0]),
        make_quadratic_skew(np.diag([2.0, 3.0]), rotation_generator(2, 4.0)),
        make_sin_coupling(),
        make_bilinear(random_bilinear(2, 2, 1.0, 2.0, 2.0, 4.0, 3.0, seed=5)),
    ]


@pytest.mark.parametrize("prob", builtin_instances(), ids=lambda p: p.name)
def test_star_residual_invariant(prob):
    assert prob.star_residual() <= 1e-9 * (1 + np.linalg.norm(prob.z_star))


@pytest.mark.parametrize("prob", builtin_instances(), ids=lambda p: p.name)
def test_gradient_matches_finite_differences(prob):
    rng = np.random.default_rng(9)
    for z in rng.uniform(-5, 5, (100, prob.dim)):
        assert np.max(np.abs(prob.grad_phi(z) - central_gradient(prob.phi_val, z))) <= 1e-6


class TestMakeInstance:
    def test_kinds(self):
        assert make_instance({"kind": "sin_coupling"}).name == "sin_coupling"
        p = make_instance({"kind": "quadratic_skew", "omega": 4.0})
        assert p.L_S == pytest.approx(4.0)
        p = make_instance({"kind": "pure_convex", "A": [[1, 0], [0, 10]], "b": [1, 0]})
        assert np.allclose(p.z_star, [-1, 0])
        p = make_instance({"kind": "bilinear", "d_x": 2, "d_y": 2, "mu_x": 1, "mu_y": 2,
                           "L_x": 2, "L_y": 4, "L_xy": 3, "seed": 0})
        assert p.L_S == pytest.approx(3 / math.sqrt(2))

    def test_claims_override(self):
        p = make_instance({"kind": "quadratic_skew", "omega": 4.0, "L_S_claim": 1.0})
        assert p.L_S == 1.0

    def test_unknown(self):
        with pytest.raises(InstanceError):
            make_instance({"kind": "nope"})
        with pytest.raises(InstanceError):
            make_instance({"kind": "sin_coupling", "extra": 1})
        with pytest.raises(InstanceError):
            make_instance({"kind": "pure_convex"})
