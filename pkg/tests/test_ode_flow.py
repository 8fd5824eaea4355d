import math

import numpy as np
import pytest

from nodkit.core import step_plan
from nodkit.ode_flow import (
    FlowError,
    FlowState,
    gronwall_check,
    integrate,
    max_stable_dt,
    vector_field,
)
from nodkit.problems import make_pure_convex, make_quadratic_skew, make_sin_coupling, rotation_generator
from nodkit.solvers import SolverState, nod_step

ROT = rotation_generator(2, 1.0)


def scalar():
    return make_pure_convex(np.eye(1))


class TestVectorField:
    def test_equilibrium(self):
        p = make_sin_coupling()
        dz, dv = vector_field(FlowState(0.0, p.z_star, np.zeros(2)), p)
        assert np.array_equal(dz, [0, 0]) and np.array_equal(dv, [0, 0])

    def test_scalar(self):
        dz, dv = vector_field(FlowState(0.0, np.array([1.0]), np.array([0.0])), scalar())
        assert dz[0] == 0.0 and dv[0] == -1.0

    def test_rotation(self):
        p = make_quadratic_skew(np.eye(2), ROT)
        _, dv = vector_field(FlowState(0.0, np.array([1.0, 0.0]), np.zeros(2)), p)
        assert np.allclose(dv, [-1.0, 1.0])

    def test_shifted_argument(self):
        # S is evaluated at z + v / sqrt(mu), not at z
        p = make_quadratic_skew(4 * np.eye(2), ROT)
        z, v = np.array([0.0, 0.0]), np.array([1.0, 0.0])
        _, dv = vector_field(FlowState(0.0, z, v), p)
        assert np.allclose(dv, -4 * v - ROT @ (v / 2))

    def test_nonfinite(self):
        p = make_quadratic_skew(np.eye(2), ROT)
        with pytest.raises(FlowError), np.errstate(invalid="ignore"):
            vector_field(FlowState(0.0, np.array([np.inf, 0.0]), np.zeros(2)), p)


class TestIntegrate:
    def test_equilibrium(self):
        p = make_sin_coupling()
        tr = integrate(p, p.z_star, np.zeros(2), 1.0, max_stable_dt(p))
        assert np.all(tr.z == 0.0) and np.all(tr.psi == 0.0)
        assert gronwall_check(tr, p.mu)

    def test_scalar_envelope(self):
        p = scalar()
        tr = integrate(p, [1.0], [0.0], 10.0, max_stable_dt(p))
        assert tr.psi[0] == pytest.approx(2.0)
        assert np.all(tr.psi <= 2 * np.exp(-tr.t) * (1 + 1e-4))
        assert tr.t[-1] == pytest.approx(10.0)

    def test_scalar_matches_closed_form(self):
        # z'' + 2 z' + z = 0, z(0)=1, z'(0)=0 -> z = (1 + t) e^{-t}
        p = scalar()
        tr = integrate(p, [1.0], [0.0], 5.0, max_stable_dt(p))
        assert np.max(np.abs(tr.z[:, 0] - (1 + tr.t) * np.exp(-tr.t))) <= 1e-9

    def test_bad_dt(self):
        p = make_sin_coupling()
        with pytest.raises(ValueError):
            integrate(p, [1.0, 1.0], [0.0, 0.0], 1.0, 0.01)
        with pytest.raises(ValueError):
            integrate(p, [1.0, 1.0], [0.0, 0.0], 1.0, -1e-3)

    def test_fourth_order(self):
        p = make_quadratic_skew(np.eye(2), 4 * ROT)
        z0, v0 = np.array([1.0, -0.5]), np.zeros(2)
        t_end, dt = 2.0, 0.1

        def final(h):
            return integrate(p, z0, v0, t_end, h, check_dt=False).z[-1]

        ref = final(dt / 16)
        e1 = np.linalg.norm(final(dt) - ref)
        e2 = np.linalg.norm(final(dt / 2) - ref)
        assert 12 <= e1 / e2 <= 20

    def test_psi_nonincreasing(self):
        p = make_sin_coupling()
        tr = integrate(p, [2.0, -1.0], [0.5, 0.0], 5.0, max_stable_dt(p))
        assert np.all(np.diff(tr.psi) <= 1e-6 * tr.psi[0])

    def test_equilibrium_stability(self):
        p = make_sin_coupling()
        z0 = p.z_star + np.array([1e-8, 0.0])
        tr = integrate(p, z0, np.zeros(2), 10.0, max_stable_dt(p))
        assert np.max(np.linalg.norm(tr.z - p.z_star, axis=1)) <= 1e-6


def nod_vs_flow_gap(eta):
    # S = 0 quadratic: NOD iterate k is compared against the flow at t = k sqrt(eta)
    p = make_pure_convex(np.diag([1.0, 2.0]))
    z0 = np.array([1.0, 1.0])
    dt = max_stable_dt(p)
    flow = integrate(p, z0, np.zeros(2), 5.0, dt)
    plan = step_plan(eta, 1.0)
    s = SolverState.initial(z0)
    worst, k = 0.0, 0
    while k * math.sqrt(eta) <= 5.0:
        t = k * math.sqrt(eta)
        i = int(round(t / dt))
        worst = max(worst, float(np.linalg.norm(s.z_tilde - flow.z[i])))
        s = nod_step(s, plan, p)
        k += 1
    return worst


def test_time_scaling_trend():
    gaps = [nod_vs_flow_gap(eta) for eta in (0.01, 0.0025, 0.000625)]
    assert gaps[1] < 0.75 * gaps[0]
    assert gaps[2] < 0.75 * gaps[1]


class TestGronwallCheck:
    def test_corrupted(self):
        p = make_sin_coupling()
        tr = integrate(p, [1.0, 1.0], [0.0, 0.0], 1.0, max_stable_dt(p))
        assert gronwall_check(tr, p.mu)
        tr.psi[1] *= 2.0
        assert not gronwall_check(tr, p.mu)

    def test_lower_side(self):
        p = make_sin_coupling()
        tr = integrate(p, [1.0, 1.0], [0.0, 0.0], 0.5, max_stable_dt(p))
        tr.psi[-1] = 0.0
        assert not gronwall_check(tr, p.mu)

    def test_empty(self):
        p = make_sin_coupling()
        tr = integrate(p, [1.0, 1.0], [0.0, 0.0], 0.1, max_stable_dt(p))
        tr.t = tr.t[:0]
        with pytest.raises(ValueError):
            gronwall_check(tr, 1.0)
