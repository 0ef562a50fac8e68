"""Problem families consumed by the solvers, plus seeded generators.

Every generator records the arguments it was called with in the problem's
``recipe`` dict, so ``problem_from_dict(problem_to_dict(p))`` rebuilds ``p``
exactly.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import oracles
from .errors import InvalidArgument, NumericFailure


# --------------------------------------------------------------------------
# function types

@dataclass(frozen=True)
class SmoothFn:
    """Differentiable function with ``lipschitz``-Lipschitz gradient.

    ``prox`` is optional and only needed when the function is used as the
    smooth block of ADMM; ``prox(v, step)`` minimizes
    ``step * fn(u) + |u - v|^2 / 2``.
    """
    eval: Callable
    grad: Callable
    lipschitz: float
    prox: Optional[Callable] = None
    is_convex: bool = False


@dataclass(frozen=True)
class ProxFn:
    """Closed, possibly nonconvex function with a closed-form prox.

    ``prox(x, step)`` returns a global minimizer of
    ``step * fn(y) + |y - x|^2 / 2``.
    """
    eval: Callable
    prox: Callable
    is_convex: bool


@dataclass(frozen=True)
class CouplingFn:
    """Smooth coupling term ``H(y, z)`` with partial gradients."""
    eval: Callable
    grad_y: Callable
    grad_z: Callable


@dataclass(frozen=True)
class ScalarConvex:
    """Separable convex ``g`` applied per coordinate, with Lipschitz modulus.

    ``prox(v, weights, step)`` is the prox of ``step * weights_i * g``
    applied to each ``v_i``.
    """
    eval: Callable
    prox: Callable
    lipschitz: float


@dataclass(frozen=True)
class ScalarConcave:
    """Concave differentiable ``h`` with ``lipschitz``-Lipschitz derivative."""
    eval: Callable
    deriv: Callable
    lipschitz: float


# --------------------------------------------------------------------------
# problem types

@dataclass(frozen=True)
class CompositeProblem:
    f: SmoothFn
    g: ProxFn
    dimension: int
    recipe: Optional[dict] = field(default=None, compare=False)

    def objective(self, x):
        return self.f.eval(x) + self.g.eval(x)


@dataclass(frozen=True)
class BlockProblem:
    f: ProxFn
    g: ProxFn
    H: CouplingFn
    M: float
    N: float
    L: float
    dim_y: int
    dim_z: int
    recipe: Optional[dict] = field(default=None, compare=False)

    def objective(self, y, z):
        return self.f.eval(y) + self.H.eval(y, z) + self.g.eval(z)


@dataclass(frozen=True)
class ReweightedProblem:
    f: SmoothFn
    g_scalar: ScalarConvex
    h_scalar: ScalarConcave
    dimension: int
    recipe: Optional[dict] = field(default=None, compare=False)

    def objective(self, x):
        return self.f.eval(x) + np.sum(self.h_scalar.eval(self.g_scalar.eval(x)))


@dataclass(frozen=True)
class DCProblem:
    f: SmoothFn
    g: ProxFn
    h: SmoothFn
    dimension: int
    recipe: Optional[dict] = field(default=None, compare=False)

    def objective(self, x):
        return self.f.eval(x) + self.g.eval(x) - self.h.eval(x)


@dataclass(frozen=True)
class AdmmProblem:
    """``min f(x) + g(y)`` subject to ``x + y = 0``."""
    f: ProxFn
    g: SmoothFn
    sigma0: float
    dimension: int
    recipe: Optional[dict] = field(default=None, compare=False)

    def augmented_lagrangian(self, x, y, dual, beta):
        r = x + y
        return self.f.eval(x) + self.g.eval(y) + float(dual @ r) + 0.5 * beta * float(r @ r)


PROBLEM_TYPES = {
    "composite": CompositeProblem,
    "block": BlockProblem,
    "reweighted": ReweightedProblem,
    "dc": DCProblem,
    "admm": AdmmProblem,
}


def problem_type(problem):
    for name, cls in PROBLEM_TYPES.items():
        if isinstance(problem, cls):
            return name
    raise InvalidArgument(f"not a problem: {type(problem).__name__}")


# --------------------------------------------------------------------------
# building blocks

def least_squares(A, y):
    """``f(x) = |Ax - y|^2 / 2`` with ``L = lambda_max(A^T A)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    L = power_iteration(A)

    def value(x):
        r = A @ x - y
        return 0.5 * float(r @ r)

    def grad(x):
        return A.T @ (A @ x - y)

    return SmoothFn(value, grad, L, is_convex=True)


def squared_distance(center, weight=1.0):
    """``weight * |x - center|^2 / 2``, with a closed-form prox."""
    center = np.asarray(center, dtype=float)

    def value(x):
        d = x - center
        return 0.5 * weight * float(d @ d)

    def grad(x):
        return weight * (x - center)

    def prox(v, step):
        return (v + step * weight * center) / (1.0 + step * weight)

    return SmoothFn(value, grad, float(weight), prox=prox, is_convex=True)


def zero_smooth():
    return SmoothFn(lambda x: 0.0, lambda x: np.zeros_like(x, dtype=float), 0.0,
                    prox=lambda v, step: np.array(v, dtype=float), is_convex=True)


def huber(weight=1.0, delta=1.0):
    """``weight * sum_i huber_delta(x_i)``; gradient is ``weight * clip(x, -delta, delta)``."""
    def value(x):
        a = np.abs(x)
        return weight * float(np.sum(np.where(a <= delta, 0.5 * x * x, delta * (a - 0.5 * delta))))

    def grad(x):
        return weight * np.clip(x, -delta, delta)

    return SmoothFn(value, grad, float(weight), is_convex=True)


def zero_prox():
    return ProxFn(lambda x: 0.0, lambda x, step: np.array(x, dtype=float), True)


def l1_norm(weight):
    # sum(weight*|x|) rather than weight*sum(|x|): keeps PIRE with a linear
    # penalty bit-identical to this composite objective
    return ProxFn(lambda x: float(np.sum(weight * np.abs(x))),
                  lambda x, step: oracles.prox_l1(x, step * weight), True)


def l0_norm(weight, tie_policy="zero"):
    """``weight * #nonzeros``; exact zeros only, no thresholding of tiny values."""
    return ProxFn(lambda x: weight * float(np.count_nonzero(x)),
                  lambda x, step: oracles.prox_l0(x, step * weight, tie_policy), False)


def box_indicator(lo, hi):
    def value(x):
        return 0.0 if np.all((x >= lo) & (x <= hi)) else np.inf

    return ProxFn(value, lambda x, step: oracles.prox_box(x, lo, hi), True)


def squared_norm_prox(weight=1.0):
    """``weight * |x|^2 / 2`` as a ProxFn."""
    return ProxFn(lambda x: 0.5 * weight * float(x @ x),
                  lambda x, step: np.asarray(x, dtype=float) / (1.0 + step * weight), True)


def abs_value():
    """``g(t) = |t|``, Lipschitz modulus 1."""
    return ScalarConvex(np.abs, oracles.prox_weighted_l1, 1.0)


def log_penalty(weight, eps):
    """``h(s) = weight * log(1 + s/eps)``: ``h' = weight/(eps + s)``, ``L_h = weight/eps^2`` on s >= 0."""
    return ScalarConcave(lambda s: weight * np.log1p(s / eps),
                         lambda s: weight / (eps + s),
                         weight / eps ** 2)


def linear_penalty(weight):
    """``h(s) = weight * s``: constant weights, reduces PIRE to weighted-l1 IPG."""
    return ScalarConcave(lambda s: weight * s,
                         lambda s: np.full_like(np.asarray(s, dtype=float), weight),
                         0.0)


# --------------------------------------------------------------------------
# numerics

def power_iteration(A, tol=1e-8, max_iter=10_000):
    """Largest eigenvalue of ``A^T A`` by power iteration.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    v = np.random.default_rng(0).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        lam_new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


def check_gradient(fn, point, step=1e-6):
    """Max over coordinates of ``|fd_i - grad_i| / (1 + |grad_i|)`` with central differences."""
    if not step > 0:
        raise InvalidArgument("step must be positive")
    point = np.asarray(point, dtype=float)
    if not np.all(np.isfinite(point)):
        raise InvalidArgument("point must be finite")
    g = np.asarray(fn.grad(point), dtype=float)
    worst = 0.0
    for i in range(point.size):
        e = np.zeros_like(point)
        e[i] = step
        hi, lo = fn.eval(point + e), fn.eval(point - e)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericFailure(f"non-finite value near coordinate {i}")
        fd = (hi - lo) / (2 * step)
        worst = max(worst, abs(fd - g[i]) / (1.0 + abs(g[i])))
    return worst


def lipschitz_ratio(grad, dimension, n_pairs=1000, scale=1.0, seed=0):
    """Largest sampled ``|grad(u) - grad(v)| / |u - v|`` over random pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        u = scale * rng.standard_normal(dimension)
        v = scale * rng.standard_normal(dimension)
        d = np.linalg.norm(u - v)
        if d > 0:
            worst = max(worst, np.linalg.norm(grad(u) - grad(v)) / d)
    return worst


def prox_optimality_gap(J, x, step, probes):
    """Min over probes of ``[step*J(y) + |y-x|^2/2] - [step*J(z) + |z-x|^2/2]`` at ``z = prox``.

    Nonnegative iff the prox output beats every probe.
    """
    z = J.prox(x, step)
    at_z = step * J.eval(z) + 0.5 * float((z - x) @ (z - x))
    gaps = [step * J.eval(y) + 0.5 * float((y - x) @ (y - x)) - at_z for y in probes]
    return min(gaps), at_z


# --------------------------------------------------------------------------
# generators

def _check_dims(*dims):
    for d in dims:
        if int(d) < 1:
            raise InvalidArgument("dimensions must be positive")


def _sparse_vector(rng, n, sparsity):
    x = np.zeros(n)
    support = rng.choice(n, size=sparsity, replace=False)
    x[support] = rng.standard_normal(sparsity)
    return x


def make_sparse_regression(n_rows, n_cols, sparsity, reg_weight, reg_kind="l1", seed=0,
                           noise_std=0.01):
    """Least squares with an l1 or l0 penalty on a Gaussian design.

    ``A`` has i.i.d. standard normal entries and ``y = A x_true + noise`` with
    ``x_true`` having ``sparsity`` nonzeros, all drawn from ``seed``.
    """
    _check_dims(n_rows, n_cols)
    if not 0 <= sparsity <= n_cols:
        raise InvalidArgument("need 0 <= sparsity <= n_cols")
    if reg_kind not in ("l1", "l0"):
        raise InvalidArgument(f"reg_kind must be 'l1' or 'l0', got {reg_kind!r}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_rows, n_cols))
    x_true = _sparse_vector(rng, n_cols, sparsity)
    y = A @ x_true + noise_std * rng.standard_normal(n_rows)
    g = l1_norm(reg_weight) if reg_kind == "l1" else l0_norm(reg_weight)
    recipe = dict(kind="sparse_regression", n_rows=n_rows, n_cols=n_cols, sparsity=sparsity,
                reg_weight=reg_weight, reg_kind=reg_kind, seed=seed, noise_std=noise_std)
    return CompositeProblem(least_squares(A, y), g, n_cols, recipe)


def make_zero_problem(dimension=1):
    """``F == 0``: the inexact iteration is a pure accumulation of noise."""
    _check_dims(dimension)
    return CompositeProblem(zero_smooth(), zero_prox(), dimension,
                            dict(kind="zero", dimension=dimension))


def make_block_consensus(dimension=1):
    """``H(y, z) = |y - z|^2 / 2`` with ``f = g = 0``.

    Partial constants ``M = N = 1``; the joint constant of ``grad_y H`` in
    ``(y, z)`` is ``sqrt(2)``.
    """
    _check_dims(dimension)
    H = CouplingFn(lambda y, z: 0.5 * float((y - z) @ (y - z)),
                   lambda y, z: y - z,
                   lambda y, z: z - y)
    return BlockProblem(zero_prox(), zero_prox(), H, 1.0, 1.0, float(np.sqrt(2.0)),
                        dimension, dimension, dict(kind="block_consensus", dimension=dimension))


def make_block_regression(n_rows, dim_y, dim_z, reg_y=0.1, reg_z=0.05, seed=0):
    """``|A y + B z - c|^2 / 2 + reg_y |y|_1 + reg_z |z|_0``.

    ``M = lambda_max(A^T A)``, ``N = lambda_max(B^T B)`` and ``L`` is the
    spectral norm of ``A^T [A B]`` (joint constant of ``grad_y H``).
    """
    _check_dims(n_rows, dim_y, dim_z)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_rows, dim_y))
    B = rng.standard_normal((n_rows, dim_z))
    c = A @ _sparse_vector(rng, dim_y, max(1, dim_y // 4)) \
        + B @ _sparse_vector(rng, dim_z, max(1, dim_z // 4)) \
        + 0.01 * rng.standard_normal(n_rows)

    def value(y, z):
        r = A @ y + B @ z - c
        return 0.5 * float(r @ r)

    H = CouplingFn(value,
                   lambda y, z: A.T @ (A @ y + B @ z - c),
                   lambda y, z: B.T @ (A @ y + B @ z - c))
    M = power_iteration(A)
    N = power_iteration(B)
    L = float(np.sqrt(power_iteration((A.T @ np.hstack([A, B])).T)))
    recipe = dict(kind="block_regression", n_rows=n_rows, dim_y=dim_y, dim_z=dim_z,
                reg_y=reg_y, reg_z=reg_z, seed=seed)
    return BlockProblem(l1_norm(reg_y), l0_norm(reg_z), H, M, N, L, dim_y, dim_z, recipe)


def make_reweighted_regression(n_rows, n_cols, sparsity, reg_weight=0.1, eps=1.0,
                               penalty="log", seed=0, noise_std=0.01):
    """Least squares plus ``sum_i h(|x_i|)`` with a log (or linear) penalty ``h``."""
    _check_dims(n_rows, n_cols)
    if not 0 <= sparsity <= n_cols:
        raise InvalidArgument("need 0 <= sparsity <= n_cols")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_rows, n_cols))
    y = A @ _sparse_vector(rng, n_cols, sparsity) + noise_std * rng.standard_normal(n_rows)
    if penalty == "log":
        h = log_penalty(reg_weight, eps)
    elif penalty == "linear":
        h = linear_penalty(reg_weight)
    else:
        raise InvalidArgument(f"penalty must be 'log' or 'linear', got {penalty!r}")
    recipe = dict(kind="reweighted_regression", n_rows=n_rows, n_cols=n_cols, sparsity=sparsity,
                reg_weight=reg_weight, eps=eps, penalty=penalty, seed=seed, noise_std=noise_std)
    return ReweightedProblem(least_squares(A, y), abs_value(), h, n_cols, recipe)


def make_dc_huber(dimension=5, h_weight=4.0, reg_weight=0.1, seed=0):
    """``|x - c|^2/2 + reg |x|_1 - h_weight * huber(x)``.

    ``L_f = 1`` and ``L_h = h_weight``; the quadratic dominates the linear
    growth of the Huber term, so the objective is coercive for any weight.
    """
    _check_dims(dimension)
    center = 2.0 * np.random.default_rng(seed).standard_normal(dimension)
    recipe = dict(kind="dc_huber", dimension=dimension, h_weight=h_weight,
                reg_weight=reg_weight, seed=seed)
    return DCProblem(squared_distance(center), l1_norm(reg_weight), huber(h_weight),
                     dimension, recipe)


def make_admm_quadratic(target, dimension=1):
    """``f(x) = |x|^2/2``, ``g(y) = |y - target*1|^2/2``; ``L_g = 1``, ``sigma0 = 1/2``.

    ``g - |grad g|^2/2`` vanishes identically, so the boundedness condition
    holds with ``sigma0 = 1/2``. The constrained optimum is
    ``x = -target/2``, ``y = target/2``.
    """
    _check_dims(dimension)
    return AdmmProblem(squared_norm_prox(), squared_distance(np.full(dimension, float(target))),
                       0.5, dimension, dict(kind="admm_quadratic", target=target,
                                            dimension=dimension))


GENERATORS = {
    "sparse_regression": (make_sparse_regression, "composite"),
    "zero": (make_zero_problem, "composite"),
    "block_consensus": (make_block_consensus, "block"),
    "block_regression": (make_block_regression, "block"),
    "reweighted_regression": (make_reweighted_regression, "reweighted"),
    "dc_huber": (make_dc_huber, "dc"),
    "admm_quadratic": (make_admm_quadratic, "admm"),
}


def problem_to_dict(problem):
    if problem.recipe is None:
        raise InvalidArgument("problem was not built by a generator and cannot be serialized")
    return dict(problem.recipe)


def problem_from_dict(recipe):
    recipe = dict(recipe)
    kind = recipe.pop("kind", None)
    if kind not in GENERATORS:
        raise InvalidArgument(f"unknown problem kind {kind!r}")
    make, _ = GENERATORS[kind]
    return make(**recipe)
