"""Discrete and continuous Lyapunov functions certifying NOD convergence.

All quantities are evaluated with the original oracles: the sum
``grad_phi + S`` coincides with its affinely shifted counterpart, so the
shifted monotone part never needs to be formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nodkit.core import StepPlan, Vec, compute_B, solve_C
from nodkit.problems import DecomposedProblem

SLACK = 1e-9


class LyapunovError(ValueError):
    pass


@dataclass(frozen=True)
class LyapunovSnapshot:
    psi: float
    anchor_sq: float
    gap: float
    field_prev_sq: float
    diff_prev_sq: float
    field_prev2_sq: float


def _require_star(problem: DecomposedProblem) -> Vec:
    if problem.z_star is None:
        raise LyapunovError(f"instance {problem.name!r} has no certified solution")
    return problem.z_star


def bregman_gap(problem: DecomposedProblem, z: Vec) -> float:
    """Bregman divergence of ``phi`` between ``z`` and the solution."""
    z_star = _require_star(problem)
    if problem.phi_val is None:
        raise LyapunovError(f"instance {problem.name!r} has no phi value oracle")
    g_star = problem.grad_phi(z_star)
    return problem.phi_val(z) - problem.phi_val(z_star) - float(g_star @ (z - z_star))


def _sq(v: Vec) -> float:
    return float(v @ v)


def _terms(state, plan: StepPlan, problem: DecomposedProblem):
    if state.k < 2:
        raise LyapunovError(f"Lyapunov function needs k >= 2, got k={state.k}")
    z_star = _require_star(problem)
    s = plan.sqrt_eta_mu
    anchor = state.z_tilde + (state.z_tilde - state.z) / s - z_star
    return (
        _sq(anchor),
        bregman_gap(problem, state.z_tilde_prev),
        _sq(state.field_prev),
        _sq(state.diff_prev),
        _sq(state.field_prev2),
    )


def discrete_lyapunov(state, plan: StepPlan, problem: DecomposedProblem,
                      B: float | None = None) -> LyapunovSnapshot:
    """Five-term energy ``Psi_k`` of a NOD state at ``k >= 2``.

    ``state`` needs ``k, z, z_tilde, z_tilde_prev, diff_prev, field_prev,
    field_prev2`` (see :class:`nodkit.solvers.SolverState`).
    """
    if B is None:
        B = compute_B(solve_C())
    eta, mu = plan.eta, plan.mu
    anchor_sq, gap, f1, d1, f2 = _terms(state, plan, problem)
    psi = (
        mu * anchor_sq
        + 2.0 * gap
        - eta * f1
        + (1.0 - eta * mu) * math.sqrt(mu / eta) * d1
        + B * eta * (1.0 - plan.sqrt_eta_mu) * (1.0 - eta * problem.L_phi) * f2
    )
    return LyapunovSnapshot(psi, anchor_sq, gap, f1, d1, f2)


def lyapunov_lower_bound(state, plan: StepPlan, problem: DecomposedProblem) -> float:
    eta, mu = plan.eta, plan.mu
    anchor_sq, gap, _, d1, _ = _terms(state, plan, problem)
    return 0.5 * mu * anchor_sq + gap + (1.0 - eta * mu) * math.sqrt(mu / eta) * d1


def contraction_check(psi_k: float, psi_k1: float, eta: float, mu: float) -> bool:
    return psi_k1 <= (1.0 - math.sqrt(eta * mu)) * psi_k + SLACK * (1.0 + psi_k)


def lower_bound_ok(psi: float, bound: float) -> bool:
    return psi >= bound - SLACK * (1.0 + abs(psi)) and bound >= -SLACK


def continuous_lyapunov(z: Vec, v: Vec, problem: DecomposedProblem) -> float:
    z_star = _require_star(problem)
    w = v + math.sqrt(problem.mu) * (z - z_star)
    return _sq(w) + 2.0 * bregman_gap(problem, z)
