"""Concrete decomposed problems ``T = grad(phi) + S`` with certified constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from nodkit.core import Vec

Oracle = Callable[[Vec], Vec]


class InstanceError(ValueError):
    """Raised when instance data violates its structural requirements."""


@dataclass(frozen=True)
class DecomposedProblem:
    """A strongly monotone operator split as a gradient plus a monotone part.

    ``grad_phi`` is the gradient of a ``mu``-strongly convex, ``L_phi``-smooth
    function ``phi`` (value oracle ``phi_val``) and ``S`` a monotone
    ``L_S``-Lipschitz operator. ``z_star`` is the zero of ``grad_phi + S``
    when it is known.
    """

    name: str
    dim: int
    grad_phi: Oracle
    S: Oracle
    phi_val: Optional[Callable[[Vec], float]]
    mu: float
    L_phi: float
    L_S: float
    z_star: Optional[Vec] = None
    saddle_split: Optional[tuple[int, int]] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.mu <= self.L_phi:
            raise InstanceError(f"need 0 < mu <= L_phi, got mu={self.mu}, L_phi={self.L_phi}")
        if self.L_S < 0.0:
            raise InstanceError(f"L_S must be nonnegative, got {self.L_S}")

    def T(self, z: Vec) -> Vec:
        return self.grad_phi(z) + self.S(z)

    def with_z_star(self, z_star: Vec) -> "DecomposedProblem":
        return DecomposedProblem(
            self.name, self.dim, self.grad_phi, self.S, self.phi_val, self.mu,
            self.L_phi, self.L_S, np.asarray(z_star, dtype=float),
            self.saddle_split, dict(self.params),
        )

    def star_residual(self) -> float:
        if self.z_star is None:
            return math.nan
        return float(np.linalg.norm(self.T(self.z_star)))


def _spectral_norm(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def _check_symmetric(A: np.ndarray, what: str) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InstanceError(f"{what} must be square, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise InstanceError(f"{what} must be symmetric")


def _sym_extremes(A: np.ndarray) -> tuple[float, float]:
    ev = np.linalg.eigvalsh(A)
    return float(ev[0]), float(ev[-1])


def make_quadratic_skew(A, K) -> DecomposedProblem:
    """``phi(z) = z^T A z / 2`` and the skew-linear ``S(z) = K z``; zero at the origin."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    _check_symmetric(A, "A")
    if K.shape != A.shape:
        raise InstanceError(f"K shape {K.shape} does not match A shape {A.shape}")
    if not np.allclose(K, -K.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(K).max())):
        raise InstanceError("K must be skew-symmetric")
    mu, L = _sym_extremes(A)
    if mu <= 0.0:
        raise InstanceError(f"A must be positive definite, lambda_min = {mu}")
    d = A.shape[0]
    return DecomposedProblem(
        name="quadratic_skew",
        dim=d,
        grad_phi=lambda z: A @ z,
        S=lambda z: K @ z,
        phi_val=lambda z: 0.5 * float(z @ (A @ z)),
        mu=mu,
        L_phi=L,
        L_S=_spectral_norm(K),
        z_star=np.zeros(d),
        params={"A": A.tolist(), "K": K.tolist()},
    )


def rotation_generator(d: int = 2, omega: float = 1.0) -> np.ndarray:
    """Block-diagonal skew matrix with 2x2 blocks ``omega * [[0, 1], [-1, 0]]``."""
    if d % 2:
        raise InstanceError("rotation generator needs an even dimension")
    K = np.zeros((d, d))
    for i in range(0, d, 2):
        K[i, i + 1] = omega
        K[i + 1, i] = -omega
    return K


def make_pure_convex(A, b=None) -> DecomposedProblem:
    """Strongly convex quadratic with ``S = 0``, on which NOD is plain NAG."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    _check_symmetric(A, "A")
    d = A.shape[0]
    b = np.zeros(d) if b is None else np.asarray(b, dtype=float).reshape(d)
    mu, L = _sym_extremes(A)
    if mu <= 0.0:
        raise InstanceError(f"A must be positive definite, lambda_min = {mu}")
    z_star = np.linalg.solve(A, -b)
    zero = np.zeros(d)
    return DecomposedProblem(
        name="pure_convex",
        dim=d,
        grad_phi=lambda z: A @ z + b,
        S=lambda z: zero.copy(),
        phi_val=lambda z: 0.5 * float(z @ (A @ z)) + float(b @ z),
        mu=mu,
        L_phi=L,
        L_S=0.0,
        z_star=z_star,
        params={"A": A.tolist(), "b": b.tolist()},
    )


@dataclass(frozen=True)
class BilinearInstance:
    """Quadratic saddle ``L(x, y) = g(x) - h(y) + x^T M y``.

    ``g(x) = x^T A_g x / 2 + b_g^T x`` and ``h(y) = y^T A_h y / 2 + b_h^T y``.
    """

    A_g: np.ndarray
    b_g: np.ndarray
    A_h: np.ndarray
    b_h: np.ndarray
    M: np.ndarray
    L_xy_claim: Optional[float] = None

    def __post_init__(self):
        for name in ("A_g", "b_g", "A_h", "b_h", "M"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "A_g", np.atleast_2d(self.A_g))
        object.__setattr__(self, "A_h", np.atleast_2d(self.A_h))
        object.__setattr__(self, "M", np.atleast_2d(self.M).reshape(self.d_x, self.d_y))
        _check_symmetric(self.A_g, "A_g")
        _check_symmetric(self.A_h, "A_h")
        if self.mu_x <= 0.0 or self.mu_y <= 0.0:
            raise InstanceError("A_g and A_h must be positive definite")
        if self.L_xy_claim is not None and self.L_xy_claim < _spectral_norm(self.M) * (1 - 1e-12):
            raise InstanceError("claimed L_xy is below the spectral norm of M")

    @property
    def d_x(self) -> int:
        return self.A_g.shape[0]

    @property
    def d_y(self) -> int:
        return self.A_h.shape[0]

    @property
    def mu_x(self) -> float:
        return _sym_extremes(self.A_g)[0]

    @property
    def L_x(self) -> float:
        return _sym_extremes(self.A_g)[1]

    @property
    def mu_y(self) -> float:
        return _sym_extremes(self.A_h)[0]

    @property
    def L_y(self) -> float:
        return _sym_extremes(self.A_h)[1]

    @property
    def L_xy(self) -> float:
        return self.L_xy_claim if self.L_xy_claim is not None else _spectral_norm(self.M)

    def grad_g(self, x: Vec) -> Vec:
        return self.A_g @ x + self.b_g

    def grad_h(self, y: Vec) -> Vec:
        return self.A_h @ y + self.b_h

    def grad_x(self, x: Vec, y: Vec) -> Vec:
        return self.grad_g(x) + self.M @ y

    def grad_y(self, x: Vec, y: Vec) -> Vec:
        return -self.grad_h(y) + self.M.T @ x

    def saddle_grad(self, x: Vec, y: Vec) -> tuple[Vec, Vec]:
        return self.grad_x(x, y), self.grad_y(x, y)

    def solution(self) -> tuple[Vec, Vec]:
        """Saddle point from the dense optimality system."""
        K = np.block([[self.A_g, self.M], [-self.M.T, self.A_h]])
        rhs = -np.concatenate([self.b_g, self.b_h])
        sol = np.linalg.solve(K, rhs)
        return sol[: self.d_x], sol[self.d_x:]


def random_bilinear(d_x: int, d_y: int, mu_x: float, mu_y: float, L_x: float,
                    L_y: float, L_xy: float, seed: int = 0,
                    with_linear: bool = True) -> BilinearInstance:
    """Random quadratic saddle whose blocks hit the requested constants exactly."""
    rng = np.random.default_rng(seed)

    def spd(d, lo, hi):
        if d == 1 and lo != hi:
            raise InstanceError("a 1-dimensional block cannot have distinct mu and L")
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        ev = np.sort(rng.uniform(lo, hi, d))
        ev[0], ev[-1] = lo, hi
        return (Q * ev) @ Q.T

    A_g = spd(d_x, mu_x, L_x)
    A_h = spd(d_y, mu_y, L_y)
    A_g = 0.5 * (A_g + A_g.T)
    A_h = 0.5 * (A_h + A_h.T)
    M = rng.standard_normal((d_x, d_y))
    M *= L_xy / _spectral_norm(M)
    b_g = rng.standard_normal(d_x) if with_linear else np.zeros(d_x)
    b_h = rng.standard_normal(d_y) if with_linear else np.zeros(d_y)
    return BilinearInstance(A_g, b_g, A_h, b_h, M)


def make_bilinear(inst: BilinearInstance) -> DecomposedProblem:
    """Scaled saddle operator of a bilinear instance, with ``mu = 1``.

    Coordinates are ``(u, v) = (sqrt(mu_x) x, sqrt(mu_y) y)``.
    """
    mu_x, mu_y = inst.mu_x, inst.mu_y
    sx, sy = math.sqrt(mu_x), math.sqrt(mu_y)
    sxy = math.sqrt(mu_x * mu_y)
    dx = inst.d_x

    def grad_phi(z):
        u, v = z[:dx], z[dx:]
        return np.concatenate([inst.grad_g(u / sx) / sx, inst.grad_h(v / sy) / sy])

    def S(z):
        u, v = z[:dx], z[dx:]
        return np.concatenate([inst.M @ v, -(inst.M.T @ u)]) / sxy

    def phi_val(z):
        u, v = z[:dx] / sx, z[dx:] / sy
        g = 0.5 * float(u @ (inst.A_g @ u)) + float(inst.b_g @ u)
        h = 0.5 * float(v @ (inst.A_h @ v)) + float(inst.b_h @ v)
        return g + h

    x_star, y_star = inst.solution()
    z_star = np.concatenate([sx * x_star, sy * y_star])
    return DecomposedProblem(
        name="bilinear",
        dim=dx + inst.d_y,
        grad_phi=grad_phi,
        S=S,
        phi_val=phi_val,
        mu=1.0,
        L_phi=max(inst.L_x / mu_x, inst.L_y / mu_y),
        L_S=inst.L_xy / sxy,
        z_star=z_star,
        saddle_split=(dx, inst.d_y),
        params={"scale": [sx, sy]},
    )


# Closed forms for the sin-coupled saddle x^2 - y^2 + sin x sin y.

def abs_sin_integral(w):
    """``I(w)``, the integral of ``|sin|`` over ``[0, w]``; odd in ``w``."""
    w = np.asarray(w, dtype=float)
    a = np.abs(w)
    n = np.floor(a / math.pi)
    r = a - n * math.pi
    out = np.sign(w) * (2.0 * n + 1.0 - np.cos(r))
    return float(out) if out.ndim == 0 else out


def _iterated_abs_sin(w):
    # J(w) = int_0^w I(t) dt, even in w
    a = np.abs(np.asarray(w, dtype=float))
    n = np.floor(a / math.pi)
    r = a - n * math.pi
    return n * n * math.pi + (2.0 * n + 1.0) * r - np.sin(r)


def h_prime(w):
    """Derivative ``2w - I(w)`` of the sin-coupling potential; slope in [1, 2]."""
    out = 2.0 * np.asarray(w, dtype=float) - abs_sin_integral(w)
    return float(out) if np.ndim(out) == 0 else out


def h_val(w):
    """``h(w) = w^2 - J(w)``, the double integral of ``2 - |sin|``."""
    w = np.asarray(w, dtype=float)
    out = w * w - _iterated_abs_sin(w)
    return float(out) if out.ndim == 0 else out


def sin_saddle_T(z: Vec) -> Vec:
    x, y = z[0], z[1]
    return np.array([2.0 * x + math.cos(x) * math.sin(y), 2.0 * y - math.sin(x) * math.cos(y)])


def make_sin_coupling() -> DecomposedProblem:
    """Non-bilinear saddle ``x^2 - y^2 + sin x sin y`` with an explicit Asplund split."""

    def grad_phi(z):
        return np.array([h_prime(z[0]), h_prime(z[1])])

    def S(z):
        return sin_saddle_T(z) - grad_phi(z)

    return DecomposedProblem(
        name="sin_coupling",
        dim=2,
        grad_phi=grad_phi,
        S=S,
        phi_val=lambda z: h_val(z[0]) + h_val(z[1]),
        mu=1.0,
        L_phi=2.0,
        L_S=2.0,
        z_star=np.zeros(2),
        saddle_split=(1, 1),
    )


def make_instance(spec: dict) -> DecomposedProblem:
    """Build an instance from a tagged config mapping (``{"kind": ..., ...}``)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "sin_coupling":
            if spec:
                raise InstanceError(f"unexpected keys for sin_coupling: {sorted(spec)}")
            return make_sin_coupling()
        if kind == "quadratic_skew":
            A = spec.pop("A", None)
            if "omega" in spec:
                d = int(spec.pop("dim", 2))
                K = rotation_generator(d, float(spec.pop("omega")))
                A = np.eye(d) if A is None else A
            else:
                K = spec.pop("K")
            prob = make_quadratic_skew(A, K)
        elif kind == "pure_convex":
            prob = make_pure_convex(spec.pop("A"), spec.pop("b", None))
        elif kind == "bilinear":
            if "A_g" in spec:
                inst = BilinearInstance(spec.pop("A_g"), spec.pop("b_g"), spec.pop("A_h"),
                                        spec.pop("b_h"), spec.pop("M"))
            else:
                keys = ("d_x", "d_y", "mu_x", "mu_y", "L_x", "L_y", "L_xy")
                args = [spec.pop(k) for k in keys]
                inst = random_bilinear(*args, seed=int(spec.pop("seed", 0)))
            prob = make_bilinear(inst)
        else:
            raise InstanceError(f"unknown problem kind {kind!r}")
    except KeyError as exc:
        raise InstanceError(f"missing key {exc.args[0]!r} for problem kind {kind!r}") from None
    claims = {k: spec.pop(k) for k in ("L_S_claim", "L_phi_claim", "mu_claim") if k in spec}
    if spec:
        raise InstanceError(f"unexpected keys for {kind}: {sorted(spec)}")
    if claims:
        prob = DecomposedProblem(
            prob.name, prob.dim, prob.grad_phi, prob.S, prob.phi_val,
            claims.get("mu_claim", prob.mu), claims.get("L_phi_claim", prob.L_phi),
            claims.get("L_S_claim", prob.L_S), prob.z_star, prob.saddle_split, prob.params,
        )
    return prob


def bilinear_instance_from_spec(spec: dict) -> BilinearInstance:
    spec = dict(spec)
    spec.pop("kind", None)
    if "A_g" in spec:
        return BilinearInstance(spec["A_g"], spec["b_g"], spec["A_h"], spec["b_h"], spec["M"])
    keys = ("d_x", "d_y", "mu_x", "mu_y", "L_x", "L_y", "L_xy")
    return random_bilinear(*[spec[k] for k in keys], seed=int(spec.get("seed", 0)))
