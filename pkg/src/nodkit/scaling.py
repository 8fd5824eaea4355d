"""Iteration-count sweeps against the accelerated complexity exponents."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from nodkit.problems import make_pure_convex, make_quadratic_skew, random_bilinear, rotation_generator
from nodkit.solvers import StoppingRule, nod_bc_run, nod_run

THEORY_SLOPES = {"L_S": 1.0, "L_phi": 0.5, "L_xy": 1.0}
SLOPE_BANDS = {"L_S": (0.8, 1.2), "L_phi": (0.4, 0.6), "L_xy": (0.8, 1.2)}
MAX_ITERS = 2_000_000


class SweepError(ValueError):
    pass


class NotConvergedError(RuntimeError):
    pass


@dataclass
class ScalingReport:
    axis: str
    points: list[tuple[float, int]]
    fitted_slope: float
    theory_slope: float
    eps: float
    band: tuple[float, float]

    @property
    def within_band(self) -> bool:
        lo, hi = self.band
        return lo <= self.fitted_slope <= hi

    def to_dict(self) -> dict:
        d = asdict(self)
        d["points"] = [list(p) for p in self.points]
        d["band"] = list(self.band)
        d["within_band"] = self.within_band
        return d


def iterations_to_eps(axis: str, value: float, eps: float, max_iters: int = MAX_ITERS) -> int:
    """First ``k`` with squared distance to the solution at most ``eps``."""
    stop = StoppingRule(max_iters=max_iters, dist_tol=eps)
    if axis == "L_S":
        prob = make_quadratic_skew(np.eye(2), rotation_generator(2, value))
        trace = nod_run(prob, None, np.ones(2), stop, monitor=False)
    elif axis == "L_phi":
        prob = make_pure_convex(np.diag([1.0, value]))
        trace = nod_run(prob, None, np.ones(2), stop, monitor=False)
    elif axis == "L_xy":
        inst = random_bilinear(1, 1, 1.0, 1.0, 1.0, 1.0, value, seed=0, with_linear=False)
        trace = nod_bc_run(inst, None, np.ones(1), np.ones(1), stop)
    else:
        raise SweepError(f"unknown axis {axis!r}")
    if trace.meta["stop_reason"] != "dist":
        raise NotConvergedError(f"{axis}={value} did not reach eps={eps} in {max_iters} iterations")
    return trace.meta["iterations"]


def check_sweep(values) -> list[float]:
    values = [float(v) for v in values]
    if len(values) < 5:
        raise SweepError("a sweep needs at least 5 values")
    if min(values) <= 0.0:
        raise SweepError("sweep values must be positive")
    if math.log10(max(values) / min(values)) < 1.5:
        raise SweepError("sweep must span at least 1.5 decades")
    return values


def fit_slope(values, counts) -> float:
    slope, _ = np.polyfit(np.log(values), np.log(counts), 1)
    return float(slope)


def scaling_study(axis: str, values, eps: float = 1e-10, threads: int | None = None) -> ScalingReport:
    if axis not in THEORY_SLOPES:
        raise SweepError(f"unknown axis {axis!r}")
    values = check_sweep(values)
    if threads is None:
        threads = int(os.environ.get("NOD_THREADS", os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        counts = list(pool.map(lambda v: iterations_to_eps(axis, v, eps), values))
    return ScalingReport(axis, list(zip(values, counts)), fit_slope(values, counts),
                         THEORY_SLOPES[axis], eps, SLOPE_BANDS[axis])
