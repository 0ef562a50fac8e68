"""Inexact first-order schemes with per-iterate subgradient witnesses.

Each ``run_*`` function injects the noise inside the prox argument,
records one entry per iteration and returns the trace together with the
constants ``(a, b, c, d)`` of the pseudo sufficient descent and pseudo
relative error inequalities it satisfies::

    obj(k) - obj(k+1)  >=  a * step_norm(k)**2 - b * eta(k)**2
    witness_norm(k+1)  <=  c * step_norm(k) + d * eta(k)

``witness_norm(k+1)`` is the norm of an explicitly assembled element of the
limiting subdifferential at the new iterate, hence an upper bound on the
distance from zero to it.

Iteration ``k`` (0-based) uses the schedule at index ``k + start_index``.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np

from .errors import InvalidConfig, ModelViolation, NumericFailure
from .noise import NoiseSchedule, draw_noise, eta as noise_eta
from .problems import (AdmmProblem, BlockProblem, CompositeProblem, DCProblem,
                       ReweightedProblem)


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters shared by all schemes.

    ``step`` is h (IPG), mu (PIRE) or gamma (DC); PALM uses ``step_y`` and
    ``step_z``; ADMM uses ``alpha``/``beta`` and draws ``x``-noise from
    ``noise`` and ``y``-noise from ``noise_y``.
    """
    step: Optional[float] = None
    step_y: Optional[float] = None
    step_z: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    max_iters: int = 1000
    stop_tol: float = 0.0
    noise: NoiseSchedule = field(default_factory=NoiseSchedule.zero)
    noise_y: Optional[NoiseSchedule] = None
    seed: int = 0


@dataclass(frozen=True)
class LemmaConstants:
    a: float
    b: float
    c: float
    d: float
    tau: int = 0

    def to_dict(self):
        return dict(a=self.a, b=self.b, c=self.c, d=self.d, tau=self.tau)

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["a"]), float(d["b"]), float(d["c"]), float(d["d"]), int(d.get("tau", 0)))


@dataclass(frozen=True)
class IterateRecord:
    k: int
    x: np.ndarray
    obj: float
    step_norm: float
    eta: float
    witness_norm: float
    extras: dict


@dataclass
class IterateTrace:
    """Append-only per-iteration history.

    ``obj``, ``witness_norm`` and ``points`` are indexed by iterate
    (``K + 1`` entries, ``witness_norm[0]`` is NaN); ``step_norm``, ``eta``
    and every ``extras`` column are indexed by iteration (``K`` entries).
    ``schedule`` reproduces ``eta``: ``eta(schedule, k + noise_offset) == eta[k]``.
    """
    scheme: str
    points: list = field(default_factory=list)
    obj: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    witness_norm: list = field(default_factory=list)
    extras: Dict[str, list] = field(default_factory=dict)
    blocks: Dict[str, tuple] = field(default_factory=dict)
    schedule: Optional[NoiseSchedule] = None
    noise_offset: int = 1
    stopped_early: bool = False

    def __len__(self):
        return len(self.step_norm)

    def arrays(self):
        """``(obj, step_norm, eta, witness_norm)`` as float arrays."""
        return (np.asarray(self.obj, dtype=float), np.asarray(self.step_norm, dtype=float),
                np.asarray(self.eta, dtype=float), np.asarray(self.witness_norm, dtype=float))

    def block(self, name, k=-1):
        lo, hi = self.blocks[name]
        return self.points[k][lo:hi]

    def records(self):
        K = len(self)
        for k in range(K + 1):
            last = k == K
            yield IterateRecord(
                k, self.points[k] if self.points else None, self.obj[k],
                math.nan if last else self.step_norm[k],
                math.nan if last else self.eta[k],
                self.witness_norm[k],
                {n: (math.nan if last else col[k]) for n, col in self.extras.items()})


class _Recorder:
    def __init__(self, trace, keep_points):
        self.trace = trace
        self.keep_points = keep_points

    def start(self, point, obj):
        self._check(obj, 0)
        if self.keep_points:
            self.trace.points.append(np.array(point, copy=True))
        self.trace.obj.append(float(obj))
        self.trace.witness_norm.append(math.nan)

    def step(self, point, obj, step_norm, eta, witness_norm, **extras):
        self._check(obj, len(self.trace.obj))
        if self.keep_points:
            self.trace.points.append(np.array(point, copy=True))
        self.trace.obj.append(float(obj))
        self.trace.step_norm.append(float(step_norm))
        self.trace.eta.append(float(eta))
        self.trace.witness_norm.append(float(witness_norm))
        for name, value in extras.items():
            self.trace.extras.setdefault(name, []).append(float(value))

    def _check(self, obj, k):
        if not np.isfinite(obj):
            raise NumericFailure(f"non-finite objective at iterate {k}", trace=self.trace)


def _stop(config, witness):
    return config.stop_tol > 0 and witness <= config.stop_tol


def _initial(x0, dimension):
    if x0 is None:
        return np.zeros(dimension)
    x = np.array(x0, dtype=float).reshape(-1)
    if x.size != dimension:
        raise InvalidConfig(f"initial point has size {x.size}, need {dimension}")
    return x


def _require_step(value, curvature, name, bound_text):
    """Require ``0 < value < 1/curvature`` (any positive value when curvature is 0)."""
    if value is None or not value > 0 or not value * curvature < 1:
        raise InvalidConfig(f"{name}={value!r} must satisfy {bound_text}")


def _forward(x, step, grad, e):
    return x - step * grad + e


# --------------------------------------------------------------------------
# proximal gradient

def run_ipg(problem: CompositeProblem, config: SolverConfig, x0=None, keep_points=True):
    """Inexact proximal gradient ``x+ = prox_{h g}(x - h grad f(x) + e)``, ``0 < h < 1/L``."""
    h, L = config.step, problem.f.lipschitz
    _require_step(h, L, "step", "0 < h < 1/L")
    f, g = problem.f, problem.g
    trace = IterateTrace("ipg", schedule=config.noise, noise_offset=config.noise.start_index,
                         blocks={"x": (0, problem.dimension)})
    rec = _Recorder(trace, keep_points)
    x = _initial(x0, problem.dimension)
    grad = f.grad(x)
    rec.start(x, f.eval(x) + g.eval(x))
    for k in range(config.max_iters):
        n = k + config.noise.start_index
        e = draw_noise(config.noise, n, problem.dimension, config.seed)
        x_new = g.prox(_forward(x, h, grad, e), h)
        grad_new = f.grad(x_new)
        witness = (x - x_new) / h + grad_new - grad + e / h
        w = float(np.linalg.norm(witness))
        rec.step(x_new, f.eval(x_new) + g.eval(x_new), np.linalg.norm(x_new - x),
                 noise_eta(config.noise, n), w)
        x, grad = x_new, grad_new
        if _stop(config, w):
            trace.stopped_early = True
            break
    consts = LemmaConstants(a=(1.0 / h - L) / 4.0, b=1.0 / (h * (1.0 - h * L)),
                            c=1.0 / h + L, d=1.0 / h)
    return trace, consts


# --------------------------------------------------------------------------
# PALM

def palm_constants(problem: BlockProblem, gamma, lam):
    M, N = problem.M, problem.N
    # the z-block residual is governed by N, the y-block by L
    L = max(problem.L, N)
    nu = min((1.0 / gamma - M) / 4.0, (1.0 / lam - N) / 4.0)
    sigma = max(1.0 / (gamma * (1.0 - gamma * M)), 1.0 / (lam * (1.0 - lam * N)))
    S = 1.0 / lam + 1.0 / gamma + 2.0 * L
    D = math.sqrt(1.0 / gamma ** 2 + 1.0 / lam ** 2)
    return LemmaConstants(nu, sigma, S, D)


def run_ipalm(problem: BlockProblem, config: SolverConfig, x0=None, keep_points=True):
    """Inexact PALM: prox-linearized step in ``y`` then in ``z``.

    Needs ``0 < step_y < 1/M`` and ``0 < step_z < 1/N``. The noise vector
    has size ``dim_y + dim_z`` and is split between the two blocks, so its
    full norm is ``eta(k)``. ``x0`` is the concatenation ``(y0, z0)``.
    """
    gamma, lam = config.step_y, config.step_z
    _require_step(gamma, problem.M, "step_y", "0 < gamma < 1/M")
    _require_step(lam, problem.N, "step_z", "0 < lambda < 1/N")
    f, g, H = problem.f, problem.g, problem.H
    dy, dz = problem.dim_y, problem.dim_z
    trace = IterateTrace("ipalm", schedule=config.noise, noise_offset=config.noise.start_index,
                         blocks={"y": (0, dy), "z": (dy, dy + dz)})
    rec = _Recorder(trace, keep_points)
    xz = _initial(x0, dy + dz)
    y, z = xz[:dy].copy(), xz[dy:].copy()
    rec.start(xz, problem.objective(y, z))
    for k in range(config.max_iters):
        n = k + config.noise.start_index
        e = draw_noise(config.noise, n, dy + dz, config.seed)
        ea, eb = e[:dy], e[dy:]
        gy = H.grad_y(y, z)
        y_new = f.prox(_forward(y, gamma, gy, ea), gamma)
        gz = H.grad_z(y_new, z)
        z_new = g.prox(_forward(z, lam, gz, eb), lam)
        wy = (y - y_new) / gamma + H.grad_y(y_new, z_new) - gy + ea / gamma
        wz = (z - z_new) / lam + H.grad_z(y_new, z_new) - gz + eb / lam
        w = math.hypot(np.linalg.norm(wy), np.linalg.norm(wz))
        step = math.hypot(np.linalg.norm(y_new - y), np.linalg.norm(z_new - z))
        rec.step(np.concatenate([y_new, z_new]), problem.objective(y_new, z_new), step,
                 noise_eta(config.noise, n), w)
        y, z = y_new, z_new
        if _stop(config, w):
            trace.stopped_early = True
            break
    return trace, palm_constants(problem, gamma, lam)


# --------------------------------------------------------------------------
# proximal iteratively reweighted

def run_pire(problem: ReweightedProblem, config: SolverConfig, x0=None, keep_points=True):
    """Inexact PIRE: weighted prox step with weights ``w_i = h'(g(x_i))``, ``0 < mu < 2/L_f``.

    The relative-error constants depend on the realized weight range
    ``[delta, pi]`` and on the largest gradient entry along the run, so
    they are computed after the last iteration.
    """
    mu, Lf = config.step, problem.f.lipschitz
    _require_step(mu, Lf / 2.0, "step", "0 < mu < 2/L_f")
    f, gs, hs = problem.f, problem.g_scalar, problem.h_scalar
    N = problem.dimension
    trace = IterateTrace("pire", schedule=config.noise, noise_offset=config.noise.start_index,
                         blocks={"x": (0, N)})
    rec = _Recorder(trace, keep_points)

    def weights_at(x, k):
        w = np.asarray(hs.deriv(gs.eval(x)), dtype=float)
        if np.any(~(w > 0)):
            raise ModelViolation(f"nonpositive weight at iterate {k}: h' must be > 0 on Im(g)")
        return w

    x = _initial(x0, N)
    grad = f.grad(x)
    w = weights_at(x, 0)
    w_min, w_max = float(w.min()), float(w.max())
    grad_max = 0.0
    rec.start(x, problem.objective(x))
    for k in range(config.max_iters):
        n = k + config.noise.start_index
        e = draw_noise(config.noise, n, N, config.seed)
        x_new = gs.prox(_forward(x, mu, grad, e), w, mu)
        grad_new = f.grad(x_new)
        w_new = weights_at(x_new, k + 1)
        r = w_new / w
        witness = r * ((x - x_new) / mu) + grad_new - r * grad + r * (e / mu)
        wn = float(np.linalg.norm(witness))
        rec.step(x_new, problem.objective(x_new), np.linalg.norm(x_new - x),
                 noise_eta(config.noise, n), wn,
                 min_weight=float(w.min()), max_weight=float(w.max()))
        grad_max = max(grad_max, float(np.max(np.abs(grad))))
        w_min, w_max = min(w_min, float(w_new.min())), max(w_max, float(w_new.max()))
        x, grad, w = x_new, grad_new, w_new
        if _stop(config, wn):
            trace.stopped_early = True
            break
    delta, pi = w_min, w_max
    rootN = math.sqrt(N)
    d = pi * rootN / (mu * delta)
    # L_f covers grad f(x^{k+1}) - grad f(x^k) in the witness
    c = Lf + grad_max * hs.lipschitz * gs.lipschitz * rootN / delta + d
    consts = LemmaConstants(a=(1.0 / mu - Lf / 2.0) / 2.0, b=1.0 / (mu * (2.0 - mu * Lf)),
                            c=c, d=d)
    return trace, consts


# --------------------------------------------------------------------------
# DC

def run_idc(problem: DCProblem, config: SolverConfig, x0=None, keep_points=True):
    """Inexact proximal DC step ``x+ = prox_{gamma g}(x - gamma(grad f - grad h) + e)``.

    With convex ``g`` the step may go up to ``2/L_f`` regardless of ``L_h``.
    A nonconvex ``g`` only gets the composite range ``gamma < 1/L_f``.
    """
    gamma, Lf, Lh = config.step, problem.f.lipschitz, problem.h.lipschitz
    f, g, hfn = problem.f, problem.g, problem.h
    if g.is_convex:
        _require_step(gamma, Lf / 2.0, "step", "0 < gamma < 2/L_f")
        a = (1.0 / gamma - Lf / 2.0) / 2.0
        b = 1.0 / (gamma * (2.0 - gamma * Lf))
    else:
        _require_step(gamma, Lf, "step", "0 < gamma < 1/L_f (g nonconvex)")
        a = (1.0 / gamma - Lf) / 4.0
        b = 1.0 / (gamma * (1.0 - gamma * Lf))
    trace = IterateTrace("idc", schedule=config.noise, noise_offset=config.noise.start_index,
                         blocks={"x": (0, problem.dimension)})
    rec = _Recorder(trace, keep_points)
    x = _initial(x0, problem.dimension)
    gf, gh = f.grad(x), hfn.grad(x)
    rec.start(x, problem.objective(x))
    for k in range(config.max_iters):
        n = k + config.noise.start_index
        e = draw_noise(config.noise, n, problem.dimension, config.seed)
        x_new = g.prox(_forward(x, gamma, gf - gh, e), gamma)
        gf_new, gh_new = f.grad(x_new), hfn.grad(x_new)
        witness = (x - x_new) / gamma + gf_new - gf + e / gamma + gh - gh_new
        w = float(np.linalg.norm(witness))
        rec.step(x_new, problem.objective(x_new), np.linalg.norm(x_new - x),
                 noise_eta(config.noise, n), w)
        x, gf, gh = x_new, gf_new, gh_new
        if _stop(config, w):
            trace.stopped_early = True
            break
    return trace, LemmaConstants(a, b, 1.0 / gamma + Lf + Lh, 1.0 / gamma)


# --------------------------------------------------------------------------
# ADMM

def admm_constants(alpha, beta, Lg):
    rho1, rho2 = 2.0 * Lg ** 2, 2.0 * beta ** 2
    nu = min(alpha / 4.0, (beta - Lg) / 4.0 - rho1 / beta)
    rho = max((alpha + beta) ** 2 / alpha, beta ** 2 / (beta - Lg), rho2 / beta)
    S = max(alpha, beta) + (beta + math.sqrt(rho1)) + math.sqrt(rho1) / beta
    D = (alpha + beta) + max(math.sqrt(rho2), beta) + math.sqrt(rho2) / beta
    return LemmaConstants(nu, rho, S, D)


def run_iadmm(problem: AdmmProblem, config: SolverConfig, x0=None, y0=None, keep_points=True):
    """Inexact ADMM for ``min f(x) + g(y)`` s.t. ``x + y = 0``.

    Records the augmented Lagrangian as ``obj``, ``|(dx, dy)|`` as
    ``step_norm`` and the aggregate noise ``|(e2' - e2, e1', e2')|`` as
    ``eta``. The dual starts at ``-grad g(y0)``, which is what the y-update
    optimality condition produces at every later iterate (with ``e2 = 0``
    before the first step).
    """
    alpha, beta, Lg = config.alpha, config.beta, problem.g.lipschitz
    if alpha is None or not alpha > 0:
        raise InvalidConfig("ADMM needs alpha > 0")
    if beta is None or not beta > (2.0 * math.sqrt(2.0) + 1.0) * Lg:
        raise InvalidConfig(f"ADMM needs beta > (2 sqrt 2 + 1) L_g = {(2 * math.sqrt(2) + 1) * Lg}")
    if not beta * problem.sigma0 >= 1.0:
        raise InvalidConfig(f"ADMM needs beta >= 1/sigma0 = {1.0 / problem.sigma0}")
    if not problem.g.is_convex:
        raise InvalidConfig("ADMM descent analysis needs g convex")
    if problem.g.prox is None:
        raise InvalidConfig("g needs a prox for the y-update")
    f, g = problem.f, problem.g
    dim = problem.dimension
    noise_x = config.noise
    noise_y = config.noise_y
    if noise_y is None:
        # same magnitudes, independent directions
        base = noise_x.seed if noise_x.seed is not None else config.seed
        noise_y = replace(noise_x, seed=base + 1)
    offset = noise_x.start_index
    trace = IterateTrace("iadmm", noise_offset=0,
                         blocks={"x": (0, dim), "y": (dim, 2 * dim), "dual": (2 * dim, 3 * dim)})
    rec = _Recorder(trace, keep_points)
    x, y = _initial(x0, dim), _initial(y0, dim)
    e2_prev = np.zeros(dim)
    dual = -g.grad(y)
    c = alpha + beta
    rec.start(np.concatenate([x, y, dual]), problem.augmented_lagrangian(x, y, dual, beta))
    for k in range(config.max_iters):
        n = k + offset
        e1 = draw_noise(noise_x, n, dim, config.seed)
        e2 = draw_noise(noise_y, n, dim, config.seed)
        x_new = f.prox((alpha / c) * x - (beta / c) * y - dual / c + e1, 1.0 / c)
        y_new = g.prox(-x_new - dual / beta + e2, 1.0 / beta)
        r = x_new + y_new
        dual_new = dual + beta * r
        d_dual = dual_new - dual
        # element of the x-subdifferential from the prox optimality condition
        sub_f = alpha * (x - x_new) - beta * (x_new + y) - dual + c * e1
        wx = sub_f + dual_new + beta * r
        wy = g.grad(y_new) + dual_new + beta * r
        witness = math.sqrt(float(wx @ wx) + float(wy @ wy) + float(r @ r))
        eps = math.sqrt(float((e2 - e2_prev) @ (e2 - e2_prev)) + float(e1 @ e1) + float(e2 @ e2))
        step = math.hypot(np.linalg.norm(x_new - x), np.linalg.norm(y_new - y))
        rec.step(np.concatenate([x_new, y_new, dual_new]),
                 problem.augmented_lagrangian(x_new, y_new, dual_new, beta), step, eps, witness,
                 dual_step=np.linalg.norm(d_dual), dy_norm=np.linalg.norm(y_new - y),
                 de2_norm=np.linalg.norm(e2 - e2_prev), residual=np.linalg.norm(r),
                 noise_eta=noise_eta(noise_x, n))
        x, y, dual, e2_prev = x_new, y_new, dual_new, e2
        if _stop(config, witness):
            trace.stopped_early = True
            break
    trace.schedule = NoiseSchedule.explicit(trace.eta, start_index=0)
    return trace, admm_constants(alpha, beta, Lg)


SOLVERS = {
    "ipg": (run_ipg, "composite"),
    "ipalm": (run_ipalm, "block"),
    "pire": (run_pire, "reweighted"),
    "idc": (run_idc, "dc"),
    "iadmm": (run_iadmm, "admm"),
}
