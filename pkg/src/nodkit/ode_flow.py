"""Continuous-time NOD dynamics and its exponential Lyapunov envelope.

The second-order flow ``z'' + 2 sqrt(mu) z' + grad_phi(z) + S(z + z'/sqrt(mu)) = 0``
is integrated as a first-order system in ``(z, v = z')`` with classical
fixed-step RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nodkit.core import Vec
from nodkit.lyapunov import continuous_lyapunov
from nodkit.problems import DecomposedProblem

ENVELOPE_RTOL = 1e-4
ENVELOPE_ATOL = 1e-12
DIVERGENCE_FACTOR = 1e12


class FlowError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowState:
    t: float
    z: Vec
    v: Vec


@dataclass
class FlowTrace:
    t: np.ndarray
    z: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    z_star: np.ndarray

    def __len__(self):
        return len(self.t)

    def states(self):
        return [FlowState(float(t), z, v) for t, z, v in zip(self.t, self.z, self.v)]


def max_stable_dt(problem: DecomposedProblem) -> float:
    return 0.01 / max(1.0, problem.L_phi + problem.L_S)


def vector_field(state: FlowState, problem: DecomposedProblem) -> tuple[Vec, Vec]:
    sm = math.sqrt(problem.mu)
    dv = -2.0 * sm * state.v - problem.grad_phi(state.z) - problem.S(state.z + state.v / sm)
    if not np.all(np.isfinite(dv)):
        raise FlowError(f"non-finite vector field at t={state.t}")
    return state.v, dv


def _rk4(t, z, v, dt, problem):
    k1z, k1v = vector_field(FlowState(t, z, v), problem)
    h = 0.5 * dt
    k2z, k2v = vector_field(FlowState(t + h, z + h * k1z, v + h * k1v), problem)
    k3z, k3v = vector_field(FlowState(t + h, z + h * k2z, v + h * k2v), problem)
    k4z, k4v = vector_field(FlowState(t + dt, z + dt * k3z, v + dt * k3v), problem)
    z_next = z + dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    v_next = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return z_next, v_next


def integrate(problem: DecomposedProblem, z0, v0, t_end: float, dt: float,
              check_dt: bool = True) -> FlowTrace:
    """Integrate from ``(z0, v0)`` up to ``t_end``; every step is recorded with its Psi.

    ``check_dt`` enforces ``dt <= 0.01 / max(1, L_phi + L_S)``. Turning it off
    is meant for convergence-order studies.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if check_dt and dt > max_stable_dt(problem) * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the stability bound {max_stable_dt(problem)}")
    if problem.z_star is None:
        raise FlowError("flow monitoring needs a certified solution")
    n_steps = int(round(t_end / dt))
    z = np.array(z0, dtype=float)
    v = np.array(v0, dtype=float)
    ts = np.empty(n_steps + 1)
    zs = np.empty((n_steps + 1, z.size))
    vs = np.empty((n_steps + 1, z.size))
    psis = np.empty(n_steps + 1)
    scale0 = None
    for i in range(n_steps + 1):
        t = i * dt
        ts[i], zs[i], vs[i] = t, z, v
        psis[i] = continuous_lyapunov(z, v, problem)
        size = float(np.linalg.norm(z - problem.z_star) + np.linalg.norm(v))
        if scale0 is None:
            scale0 = size
        elif not math.isfinite(size) or size > DIVERGENCE_FACTOR * max(scale0, 1e-300):
            raise FlowError(f"flow diverged at t={t}")
        if i < n_steps:
            z, v = _rk4(t, z, v, dt, problem)
    return FlowTrace(ts, zs, vs, psis, np.array(problem.z_star, dtype=float))


def gronwall_check(trace: FlowTrace, mu: float) -> bool:
    """Both sides of ``mu |z - z*|^2 <= Psi_t <= Psi_0 exp(-sqrt(mu) t)`` on every row."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    psi0 = trace.psi[0]
    envelope = psi0 * np.exp(-math.sqrt(mu) * trace.t) * (1.0 + ENVELOPE_RTOL) + ENVELOPE_ATOL
    if np.any(trace.psi > envelope):
        return False
    d = trace.z - trace.z_star
    lower = mu * np.einsum("ij,ij->i", d, d)
    return bool(np.all(lower <= trace.psi * (1.0 + 1e-9) + ENVELOPE_ATOL))
