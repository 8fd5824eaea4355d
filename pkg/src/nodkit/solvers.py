"""NOD iteration, its bilinear specialization, NAG, and baseline methods."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from nodkit import lyapunov
from nodkit.core import Constants, StepPlan, Vec, default_eta, solve_C, step_plan
from nodkit.problems import BilinearInstance, DecomposedProblem, make_bilinear

DIVERGENCE_FACTOR = 1e12
CERTIFY_TOL = 1e-13


class DivergedError(RuntimeError):
    def __init__(self, k: int, trace: "SolverTrace"):
        super().__init__(f"iteration diverged at k={k}")
        self.k = k
        self.trace = trace


@dataclass(frozen=True)
class StoppingRule:
    max_iters: int = 1000
    tol: Optional[float] = None
    dist_tol: Optional[float] = None

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")


@dataclass(frozen=True)
class SolverState:
    """NOD state at iteration ``k`` plus the history the Lyapunov function reads.

    ``field_prev`` is ``grad_phi(z~_{k-1}) + S(z^_{k-1})``, ``field_prev2`` the
    same at ``k-2`` and ``diff_prev = z~_{k-1} - z_{k-1}``.
    """

    k: int
    z: Vec
    z_tilde: Vec
    z_hat: Vec
    z_tilde_prev: Optional[Vec] = None
    field_prev: Optional[Vec] = None
    field_prev2: Optional[Vec] = None
    diff_prev: Optional[Vec] = None

    @classmethod
    def initial(cls, z0) -> "SolverState":
        z0 = np.array(z0, dtype=float)
        return cls(0, z0, z0.copy(), z0.copy())


@dataclass
class TraceRecord:
    k: int
    residual: float
    dist_sq: Optional[float] = None
    psi: Optional[float] = None
    psi_ratio: Optional[float] = None
    contraction_ok: Optional[bool] = None
    psi_lower: Optional[float] = None


@dataclass
class SolverTrace:
    records: list[TraceRecord]
    meta: dict
    z: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    z_tilde: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    oracle_calls: dict = field(default_factory=dict)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                         for r in self.records], dtype=float)

    def all_contractions_ok(self) -> bool:
        return all(r.contraction_ok for r in self.records if r.contraction_ok is not None)


class _Counted:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, z):
        self.calls += 1
        return self.fn(z)


class _Monitor:
    """Builds the trace: residuals, distances, Lyapunov values, stop decisions."""

    def __init__(self, problem, plan, stop, meta, with_psi=True):
        self.problem = problem
        self.plan = plan
        self.stop = stop
        self.meta = meta
        self.with_psi = with_psi and problem.z_star is not None and problem.phi_val is not None
        self.B = Constants.default().B
        self.records: list[TraceRecord] = []
        self.zs: list[Vec] = []
        self.z_tildes: list[Vec] = []
        self.res0: Optional[float] = None

    def observe(self, k, field_k, z, z_tilde, dist_point, lyap_state=None) -> Optional[str]:
        residual = float(np.linalg.norm(field_k))
        rec = TraceRecord(k=k, residual=residual)
        if self.problem.z_star is not None:
            d = dist_point - self.problem.z_star
            rec.dist_sq = float(d @ d)
        if self.with_psi and lyap_state is not None and lyap_state.k >= 2:
            snap = lyapunov.discrete_lyapunov(lyap_state, self.plan, self.problem, self.B)
            rec.psi = snap.psi
            rec.psi_lower = lyapunov.lyapunov_lower_bound(lyap_state, self.plan, self.problem)
            prev = self.records[-1] if self.records else None
            if prev is not None and prev.psi is not None:
                prev.psi_ratio = rec.psi / prev.psi if prev.psi != 0.0 else None
                prev.contraction_ok = lyapunov.contraction_check(
                    prev.psi, rec.psi, self.plan.eta, self.plan.mu)
        self.records.append(rec)
        self.zs.append(np.array(z, dtype=float))
        self.z_tildes.append(np.array(z_tilde, dtype=float))

        if not (math.isfinite(residual) and np.all(np.isfinite(z_tilde))):
            raise DivergedError(k, self.trace("diverged"))
        if self.res0 is None:
            self.res0 = residual
        elif residual > DIVERGENCE_FACTOR * max(self.res0, 1e-300):
            raise DivergedError(k, self.trace("diverged"))
        if self.stop.tol is not None and residual <= self.stop.tol:
            return "tol"
        if self.stop.dist_tol is not None and rec.dist_sq is not None and rec.dist_sq <= self.stop.dist_tol:
            return "dist"
        if k >= self.stop.max_iters:
            return "budget"
        return None

    def trace(self, reason: str, calls: Optional[dict] = None) -> SolverTrace:
        meta = dict(self.meta, stop_reason=reason, iterations=len(self.records) - 1)
        return SolverTrace(self.records, meta, np.array(self.zs), np.array(self.z_tildes),
                           calls or {})


def _meta(problem, method, eta, mu, seed):
    return {"instance": problem.name, "method": method, "eta": eta, "mu": mu, "seed": seed,
            "self_certified": bool(problem.params.get("self_certified", False))}


def nod_step(state: SolverState, plan: StepPlan, problem: DecomposedProblem,
             field_k: Optional[Vec] = None) -> SolverState:
    """One NOD step; ``field_k`` may carry an already evaluated ``grad_phi(z~) + S(z^)``."""
    if field_k is None:
        field_k = problem.grad_phi(state.z_tilde) + problem.S(state.z_hat)
    if not np.all(np.isfinite(field_k)):
        raise DivergedError(state.k, SolverTrace([], {"stop_reason": "diverged"}))
    z_next = state.z_tilde - plan.eta * field_k
    zt_next = z_next + plan.tau * (z_next - state.z)
    zh_next = zt_next + plan.theta * (zt_next - state.z_tilde)
    return SolverState(
        k=state.k + 1,
        z=z_next,
        z_tilde=zt_next,
        z_hat=zh_next,
        z_tilde_prev=state.z_tilde,
        field_prev=field_k,
        field_prev2=state.field_prev,
        diff_prev=state.z_tilde - state.z,
    )


def self_certify(problem: DecomposedProblem, z0=None, max_iters: int = 1_000_000) -> DecomposedProblem:
    """Attach a numerically computed solution, flagged as self-certified."""
    z0 = np.zeros(problem.dim) if z0 is None else z0
    trace = nod_run(problem, None, z0, StoppingRule(max_iters=max_iters, tol=CERTIFY_TOL),
                    monitor=False)
    if trace.meta["stop_reason"] != "tol":
        raise RuntimeError("could not certify a solution to residual 1e-13")
    certified = problem.with_z_star(trace.z_tilde[-1])
    certified.params["self_certified"] = True
    return certified


def nod_run(problem: DecomposedProblem, eta: Optional[float], z0, stop: StoppingRule,
            seed: Optional[int] = None, monitor: bool = True,
            certify: bool = False) -> SolverTrace:
    """Run NOD from ``z0``; ``eta=None`` selects the largest admissible step."""
    if eta is None:
        eta = default_eta(problem.mu, problem.L_phi, problem.L_S)
    if certify and problem.z_star is None:
        problem = self_certify(problem, z0)
    plan = step_plan(eta, problem.mu)
    grad_phi, S = _Counted(problem.grad_phi), _Counted(problem.S)
    mon = _Monitor(problem, plan, stop, _meta(problem, "nod", eta, problem.mu, seed), monitor)
    state = SolverState.initial(z0)
    while True:
        field_k = grad_phi(state.z_tilde) + S(state.z_hat)
        reason = mon.observe(state.k, field_k, state.z, state.z_tilde, state.z_tilde, state)
        if reason is not None:
            break
        state = nod_step(state, plan, problem, field_k)
    return mon.trace(reason, {"grad_phi": grad_phi.calls, "S": S.calls})


def nag_run(problem: DecomposedProblem, eta: Optional[float], z0, stop: StoppingRule,
            seed: Optional[int] = None) -> SolverTrace:
    """Classical strongly convex NAG; only valid when ``S`` vanishes."""
    if problem.L_S > 0.0:
        raise ValueError("NAG needs L_S = 0")
    if eta is None:
        eta = default_eta(problem.mu, problem.L_phi, 0.0)
    plan = step_plan(eta, problem.mu)
    grad_phi = _Counted(problem.grad_phi)
    mon = _Monitor(problem, plan, stop, _meta(problem, "nag", eta, problem.mu, seed))
    y = np.array(z0, dtype=float)
    x = y.copy()
    state = SolverState.initial(z0)
    while True:
        g = grad_phi(y)
        reason = mon.observe(state.k, g, x, y, y, state)
        if reason is not None:
            break
        x_next = y - plan.eta * g
        y_next = x_next + plan.tau * (x_next - x)
        state = SolverState(state.k + 1, x_next, y_next, y_next, y, g, state.field_prev, y - x)
        x, y = x_next, y_next
    return mon.trace(reason, {"grad_phi": grad_phi.calls, "S": 0})


def bc_default_eta(inst: BilinearInstance) -> float:
    bounds = [inst.mu_x / inst.L_x, inst.mu_y / inst.L_y]
    if inst.L_xy > 0.0:
        bounds.append(inst.mu_x * inst.mu_y / inst.L_xy ** 2)
    return solve_C() * min(bounds)


def nod_bc_run(inst: BilinearInstance, eta: Optional[float], x0, y0, stop: StoppingRule,
               seed: Optional[int] = None) -> SolverTrace:
    """NOD written with saddle-gradient evaluations at mixed points.

    Iterates are stored in the original ``(x, y)`` coordinates. Trace columns
    (residual, distance, Lyapunov values) are those of the scaled problem
    ``make_bilinear(inst)``, so ``dist_sq = mu_x |x~ - x*|^2 + mu_y |y~ - y*|^2``.
    """
    if eta is None:
        eta = bc_default_eta(inst)
    scaled = make_bilinear(inst)
    plan = step_plan(eta, 1.0)
    eta_x, eta_y = eta / inst.mu_x, eta / inst.mu_y
    sx, sy = math.sqrt(inst.mu_x), math.sqrt(inst.mu_y)
    scale = np.concatenate([np.full(inst.d_x, sx), np.full(inst.d_y, sy)])
    mon = _Monitor(scaled, plan, stop, _meta(scaled, "nod_bc", eta, 1.0, seed))
    calls = {"grad_x": 0, "grad_y": 0}

    x = np.array(x0, dtype=float)
    y = np.array(y0, dtype=float)
    xt, yt = x.copy(), y.copy()
    xt_prev, yt_prev = xt, yt  # z~_{-1} := z~_0
    field_prev = field_prev2 = zt_prev_s = diff_prev = None
    k = 0
    while True:
        gx = inst.grad_x(xt, yt)
        gx_m = inst.grad_x(xt, yt_prev)
        gy = inst.grad_y(xt, yt)
        gy_m = inst.grad_y(xt_prev, yt)
        calls["grad_x"] += 2
        calls["grad_y"] += 2
        Fx = gx + plan.theta * (gx - gx_m)
        Fy = gy + plan.theta * (gy - gy_m)
        field_s = np.concatenate([Fx / sx, -Fy / sy])
        z = np.concatenate([x, y])
        zt = np.concatenate([xt, yt])
        view = SolverState(k, z * scale, zt * scale, zt * scale, zt_prev_s, field_prev,
                           field_prev2, diff_prev)
        reason = mon.observe(k, field_s, z, zt, zt * scale, view)
        if reason is not None:
            break
        x_next = xt - eta_x * Fx
        y_next = yt + eta_y * Fy
        xt_next = x_next + plan.tau * (x_next - x)
        yt_next = y_next + plan.tau * (y_next - y)
        field_prev2, field_prev = field_prev, field_s
        zt_prev_s, diff_prev = zt * scale, (zt - z) * scale
        xt_prev, yt_prev = xt, yt
        x, y, xt, yt = x_next, y_next, xt_next, yt_next
        k += 1
    return mon.trace(reason, calls)


def _baseline_constants(problem: DecomposedProblem) -> float:
    return problem.L_phi + problem.L_S


def forward_run(problem: DecomposedProblem, eta: Optional[float], z0, stop: StoppingRule,
                seed: Optional[int] = None) -> SolverTrace:
    """Forward (gradient) iteration ``z <- z - eta T(z)``, default ``eta = mu / L_T^2``."""
    if eta is None:
        eta = problem.mu / _baseline_constants(problem) ** 2
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    mon = _Monitor(problem, None, stop, _meta(problem, "forward", eta, problem.mu, seed),
                   with_psi=False)
    z = np.array(z0, dtype=float)
    k = 0
    while True:
        Tz = problem.T(z)
        reason = mon.observe(k, Tz, z, z, z)
        if reason is not None:
            break
        z = z - eta * Tz
        k += 1
    return mon.trace(reason, {"T": k + 1})


def extragradient_run(problem: DecomposedProblem, eta: Optional[float], z0, stop: StoppingRule,
                      seed: Optional[int] = None) -> SolverTrace:
    """Korpelevich extragradient, default ``eta = 1 / (2 L_T)``."""
    if eta is None:
        eta = 1.0 / (2.0 * _baseline_constants(problem))
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    mon = _Monitor(problem, None, stop, _meta(problem, "extragradient", eta, problem.mu, seed),
                   with_psi=False)
    z = np.array(z0, dtype=float)
    k = 0
    while True:
        Tz = problem.T(z)
        reason = mon.observe(k, Tz, z, z, z)
        if reason is not None:
            break
        z_half = z - eta * Tz
        z = z - eta * problem.T(z_half)
        k += 1
    return mon.trace(reason, {"T": 2 * k + 1})


SOLVERS = {
    "nod": nod_run,
    "nag": nag_run,
    "forward": forward_run,
    "extragradient": extragradient_run,
}
