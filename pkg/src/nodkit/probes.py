"""Sampled numerical evidence for operator properties.

Every probe here is a necessary-condition check over random pairs or grid
points, not a certificate. Reports label results as sampled evidence.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from nodkit.core import Vec
from nodkit.problems import DecomposedProblem, sin_saddle_T

Oracle = Callable[[Vec], Vec]

FD_STEP = 1e-5
GRID_OFFSET = 1e-3


def cube(lo: float, hi: float, dim: int) -> np.ndarray:
    return np.tile([lo, hi], (dim, 1)).astype(float)


def _pairs(box: np.ndarray, n: int, seed: int):
    box = np.asarray(box, dtype=float)
    rng = np.random.default_rng(seed)
    lo, hi = box[:, 0], box[:, 1]
    z1 = lo + (hi - lo) * rng.random((n, len(lo)))
    z2 = lo + (hi - lo) * rng.random((n, len(lo)))
    return z1, z2


def _pair_stats(op: Oracle, box, n: int, seed: int):
    if n < 2:
        raise ValueError("need at least two samples")
    z1, z2 = _pairs(box, n, seed)
    d = z1 - z2
    w = np.array([op(a) for a in z1]) - np.array([op(b) for b in z2])
    dd = np.einsum("ij,ij->i", d, d)
    keep = dd > 0.0
    return d[keep], w[keep], dd[keep]


def monotonicity_probe(op: Oracle, box, n: int, seed: int = 0) -> float:
    """Smallest sampled ``<op(z) - op(z'), z - z'> / |z - z'|^2``."""
    d, w, dd = _pair_stats(op, box, n, seed)
    return float(np.min(np.einsum("ij,ij->i", w, d) / dd))


def strong_monotonicity_probe(op: Oracle, box, n: int, seed: int = 0) -> float:
    # same pairing ratio; its infimum estimates the strong-monotonicity modulus
    return monotonicity_probe(op, box, n, seed)


def lipschitz_probe(op: Oracle, box, n: int, seed: int = 0) -> float:
    d, w, dd = _pair_stats(op, box, n, seed)
    return float(np.max(np.sqrt(np.einsum("ij,ij->i", w, w) / dd)))


def central_gradient(f: Callable[[Vec], float], z: Vec, step: float = FD_STEP) -> Vec:
    z = np.asarray(z, dtype=float)
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = step
        g[i] = (f(z + e) - f(z - e)) / (2.0 * step)
    return g


def fd_jacobian(op: Oracle, z: Vec, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian, ``J[i, j] = d op_i / d z_j``."""
    z = np.asarray(z, dtype=float)
    cols = []
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = step
        cols.append((op(z + e) - op(z - e)) / (2.0 * step))
    return np.column_stack(cols)


def grad_consistency(problem: DecomposedProblem, box, n: int, seed: int = 0,
                     step: float = FD_STEP) -> float:
    """Max sup-norm gap between ``grad_phi`` and central differences of ``phi_val``."""
    if problem.phi_val is None:
        raise ValueError(f"instance {problem.name!r} has no phi value oracle")
    rng = np.random.default_rng(seed)
    box = np.asarray(box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    worst = 0.0
    for z in lo + (hi - lo) * rng.random((n, len(lo))):
        err = np.max(np.abs(problem.grad_phi(z) - central_gradient(problem.phi_val, z, step)))
        worst = max(worst, float(err))
    return worst


def offset_grid(lo: float, hi: float, num: int, offset: float = GRID_OFFSET) -> np.ndarray:
    """2-D lattice over ``[lo, hi]^2`` shifted off the kink set of ``|sin|``."""
    ticks = np.linspace(lo, hi, num) + offset
    X, Y = np.meshgrid(ticks, ticks, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def symm_jacobian_min_eig(op: Oracle, grid, fd_step: float = FD_STEP):
    """Smallest eigenvalue of the symmetrized finite-difference Jacobian over ``grid``.

    Returns ``(min_eig, argmin_point)``; ties resolve to the first grid point.
    """
    if not 1e-7 <= fd_step <= 1e-4:
        raise ValueError("fd_step must lie in [1e-7, 1e-4]")
    best, where = math.inf, None
    for z in np.asarray(grid, dtype=float):
        J = fd_jacobian(op, z, fd_step)
        ev = np.linalg.eigvalsh(0.5 * (J + J.T))[0]
        if ev < best:
            best, where = float(ev), z.copy()
    return best, where


def sin_jacobian_norm(x, y):
    """Operator norm of the Jacobian of the sin-coupled saddle gradient."""
    cx, cy = np.cos(x), np.cos(y)
    out = np.sqrt(4.0 + cx * cx * cy * cy) + np.abs(np.sin(x) * np.sin(y))
    return float(out) if np.ndim(out) == 0 else out


def red_blue_points(per_segment: int = 25, span: int = 2):
    """Sample points of the two line families on which the symmetrized Jacobian
    of the sin-coupling monotone part loses its first (red) or second (blue)
    diagonal entry, over roughly ``[-span*pi, span*pi]^2``.
    """
    pi = math.pi
    t = np.linspace(0.0, 1.0, per_segment + 2)[1:-1]
    line = np.linspace(-span * pi, span * pi, 4 * span * per_segment + 1)
    # keep off the kink set of the other coordinate
    line = line[np.abs(np.remainder(line + pi / 2, pi) - pi / 2) > 1e-3]
    red, blue = [], []
    for n in range(-span, span + 1):
        red += [(n * pi, y) for y in line]
        blue += [(x, n * pi) for x in line]
    half = span // 2
    for n in range(-half, half + 1):
        for m in range(-half, half + 1):
            for s in t:
                red.append(((2 * n + s) * pi, (2 * m + 0.5) * pi))
                red.append(((2 * n - 1 + s) * pi, (2 * m - 0.5) * pi))
                blue.append(((2 * n - 0.5) * pi, (2 * m + s) * pi))
                blue.append(((2 * n + 0.5) * pi, (2 * m - 1 + s) * pi))
    return np.array(red), np.array(blue)


def redblue_structure(op: Oracle, fd_step: float = FD_STEP, per_segment: int = 25):
    """Largest magnitudes of the entries forced to vanish on the red and blue sets.

    Red points: entries (0, 0) and (0, 1) of the symmetrized Jacobian; blue
    points: entries (1, 1) and (0, 1).
    """
    red, blue = red_blue_points(per_segment)
    worst_red = worst_blue = 0.0
    for z in red:
        J = fd_jacobian(op, z, fd_step)
        Js = 0.5 * (J + J.T)
        worst_red = max(worst_red, abs(Js[0, 0]), abs(Js[0, 1]))
    for z in blue:
        J = fd_jacobian(op, z, fd_step)
        Js = 0.5 * (J + J.T)
        worst_blue = max(worst_blue, abs(Js[1, 1]), abs(Js[0, 1]))
    return worst_red, worst_blue


def _row(prop: str, claimed: Optional[float], observed: float, ok: bool) -> dict:
    return {"property": prop, "constant_claimed": claimed, "constant_observed": observed,
            "pass": bool(ok), "evidence": "sampled"}


def probe_battery(problem: DecomposedProblem, n: int = 10_000, seed: int = 0,
                  half_width: float = 10.0, grid_num: int = 201) -> list[dict]:
    """Check every claimed constant of ``problem`` against sampled evidence."""
    box = cube(-half_width, half_width, problem.dim)
    rows = []
    m = monotonicity_probe(problem.S, box, n, seed)
    rows.append(_row("S monotone", 0.0, m, m >= -1e-10))
    l_s = lipschitz_probe(problem.S, box, n, seed + 1)
    rows.append(_row("S Lipschitz", problem.L_S, l_s, l_s <= problem.L_S + 1e-9))
    mu = strong_monotonicity_probe(problem.grad_phi, box, n, seed + 2)
    rows.append(_row("grad_phi strongly monotone", problem.mu, mu, mu >= problem.mu - 1e-6))
    l_phi = lipschitz_probe(problem.grad_phi, box, n, seed + 3)
    rows.append(_row("grad_phi Lipschitz", problem.L_phi, l_phi, l_phi <= problem.L_phi + 1e-9))
    if problem.phi_val is not None:
        g = grad_consistency(problem, cube(-5.0, 5.0, problem.dim), min(n, 100), seed + 4)
        rows.append(_row("grad_phi matches phi", 1e-6, g, g <= 1e-6))
    if problem.z_star is not None:
        r = problem.star_residual()
        bound = 1e-9 * (1.0 + float(np.linalg.norm(problem.z_star)))
        rows.append(_row("z_star is a zero", bound, r, r <= bound))
    if problem.name == "sin_coupling":
        l_t = lipschitz_probe(sin_saddle_T, box, n, seed + 5)
        rows.append(_row("T Lipschitz (joint smoothness)", 3.0, l_t, l_t <= 3.0 + 1e-9))
        grid = offset_grid(-2 * math.pi, 2 * math.pi, grid_num)
        e, _ = symm_jacobian_min_eig(problem.S, grid)
        rows.append(_row("symm(DS) PSD on offset grid", 0.0, e, e >= -1e-5))
        ticks = np.linspace(-math.pi, math.pi, 401)
        X, Y = np.meshgrid(ticks, ticks)
        sup = float(np.max(sin_jacobian_norm(X, Y)))
        rows.append(_row("|DT| sup on grid", 3.0, sup, sup <= 3.0 + 1e-12))
        peak = sin_jacobian_norm(math.pi / 2, math.pi / 2)
        rows.append(_row("|DT| at (pi/2, pi/2)", 3.0, peak, peak == 3.0))
    return rows
