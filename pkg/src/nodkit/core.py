"""Shared constants, step-size rules and oracle utilities for NOD."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cache
from typing import Callable

import numpy as np

Vec = np.ndarray

C_BRACKET = (1e-9, 0.04)


class DomainError(ValueError):
    """Raised when a scalar argument lies outside the admissible domain."""


def _c_residual(c: float) -> float:
    return 1.0 - c - math.sqrt(c) * (c + 6.0)


@cache
def solve_C() -> float:
    """Root of ``1 - C - sqrt(C) (C + 6) = 0`` by bisection on (1e-9, 0.04].

    The residual is strictly decreasing on (0, 1), so the root is unique.
    Bisection runs until the bracket cannot shrink any further in double
    precision.
    """
    lo, hi = C_BRACKET
    f_lo = _c_residual(lo)
    assert f_lo > 0.0 and _c_residual(hi) < 0.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = _c_residual(mid)
        if f_mid == 0.0:
            return mid
        if f_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return lo if abs(_c_residual(lo)) <= abs(_c_residual(hi)) else hi


def compute_B(C: float) -> float:
    if not 0.0 < C < 1.0:
        raise DomainError(f"C must lie in (0, 1), got {C}")
    return math.sqrt(C) / (1.0 - C)


@dataclass(frozen=True)
class Constants:
    C: float
    B: float

    @classmethod
    def default(cls) -> "Constants":
        C = solve_C()
        return cls(C=C, B=compute_B(C))


def default_eta(mu: float, L_phi: float, L_S: float) -> float:
    """Largest step size admitted by the contraction theorem.

    ``C * min(1 / L_phi, mu / L_S**2)``; with ``L_S == 0`` the second
    branch is dropped and the step is ``C / L_phi``.
    """
    if mu <= 0.0:
        raise DomainError(f"mu must be positive, got {mu}")
    if L_phi < mu:
        raise DomainError(f"L_phi ({L_phi}) must be >= mu ({mu})")
    if L_S < 0.0:
        raise DomainError(f"L_S must be nonnegative, got {L_S}")
    C = solve_C()
    if L_S == 0.0:
        return C / L_phi
    return C * min(1.0 / L_phi, mu / (L_S * L_S))


@dataclass(frozen=True)
class StepPlan:
    eta: float
    mu: float
    tau: float
    theta: float

    @property
    def sqrt_eta_mu(self) -> float:
        return math.sqrt(self.eta * self.mu)


def step_plan(eta: float, mu: float) -> StepPlan:
    em = eta * mu
    if not (eta > 0.0 and mu > 0.0 and em <= 1.0):
        raise DomainError(f"eta*mu must lie in (0, 1], got eta={eta}, mu={mu}")
    s = math.sqrt(em)
    return StepPlan(eta=eta, mu=mu, tau=(1.0 - s) / (1.0 + s), theta=1.0 / s - 1.0)


@dataclass(frozen=True)
class SmoothnessProfile:
    mu_x: float
    mu_y: float
    L_x: float
    L_y: float
    L_xy: float
    L_joint: float

    @classmethod
    def from_blocks(cls, mu_x: float, mu_y: float, L_x: float, L_y: float,
                    L_xy: float) -> "SmoothnessProfile":
        if min(mu_x, mu_y, L_x, L_y, L_xy) < 0.0:
            raise DomainError("smoothness constants must be nonnegative")
        if mu_x > L_x or mu_y > L_y:
            raise DomainError("strong-convexity modulus exceeds smoothness constant")
        return cls(mu_x, mu_y, L_x, L_y, L_xy, joint_smoothness(L_x, L_y, L_xy))


def joint_smoothness(L_x: float, L_y: float, L_xy: float) -> float:
    """Spectral norm of ``[[L_x, L_xy], [L_xy, L_y]]``."""
    if min(L_x, L_y, L_xy) < 0.0:
        raise DomainError("smoothness constants must be nonnegative")
    half_sum = (L_x + L_y) / 2.0
    half_diff = (L_x - L_y) / 2.0
    return half_sum + math.sqrt(half_diff * half_diff + L_xy * L_xy)


SaddleOracle = Callable[[Vec, Vec], tuple[Vec, Vec]]


def split_bilinear_oracle(saddle_grad: SaddleOracle, x: Vec, y: Vec):
    """Recover ``(grad g(x), grad h(y), M y, M^T x)`` from a saddle-gradient oracle.

    ``saddle_grad(x, y)`` must return ``(grad_x L, grad_y L)`` for a
    bilinearly coupled ``L(x, y) = g(x) - h(y) + x^T M y``. Three queries are
    made: at ``(x, y)``, ``(x, 2y)`` and ``(2x, y)``. The result is
    meaningless for non-bilinear couplings.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gx, gy = saddle_grad(x, y)
    gx_2y, _ = saddle_grad(x, 2.0 * y)
    _, gy_2x = saddle_grad(2.0 * x, y)
    My = gx_2y - gx
    grad_g = 2.0 * gx - gx_2y
    # grad_y L = -grad h(y) + M^T x
    Mtx = gy_2x - gy
    grad_h = gy_2x - 2.0 * gy
    return grad_g, grad_h, My, Mtx
