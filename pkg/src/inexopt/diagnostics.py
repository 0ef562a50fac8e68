"""Certify solver traces against the inexact descent framework.

Every check is a pure function of an :class:`~inexopt.solvers.IterateTrace`
and the constants it claims. Margins use one sign convention throughout:
``margin >= 0`` means the inequality holds.
"""
import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import InvalidArgument, NotSummable
from .noise import LyapunovParams, is_square_summable, is_summable, t_values

VERDICTS = ("converged", "diverged", "undetermined")


@dataclass(frozen=True)
class Tolerances:
    """Check tolerances and verdict thresholds."""
    descent: float = 1e-9
    relerr: float = 1e-9
    lyapunov: float = 1e-9
    window: int = 100
    cauchy_tol: float = 1e-6
    stop_threshold: float = 1e-6
    escape_radius: float = 1e6
    envelope_fraction: float = 0.9
    theta: float = 2.0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "window" in d:
            d["window"] = int(d["window"])
        return cls(**{k: (v if k == "window" else float(v)) for k, v in d.items()})


def _require_steps(trace, minimum=1):
    if len(trace) < minimum:
        raise InvalidArgument(f"trace needs at least {minimum} iteration(s), has {len(trace)}")


def _violations(margins, thresholds):
    bad = np.flatnonzero(margins < -thresholds)
    return [(int(k), float(margins[k])) for k in bad]


def descent_margins(trace, constants):
    """``(obj(k) - obj(k+1)) - a*step_norm(k)**2 + b*eta(k)**2`` per iteration."""
    obj, s, e, _ = trace.arrays()
    return (obj[:-1] - obj[1:]) - constants.a * s ** 2 + constants.b * e ** 2


def check_sufficient_descent(trace, constants, tol=1e-9):
    """Iterations violating pseudo sufficient descent, as ``(k, margin)`` pairs.

    A violation is ``margin < -tol * (1 + |obj(k)|)``.
    """
    _require_steps(trace)
    obj = np.asarray(trace.obj, dtype=float)
    return _violations(descent_margins(trace, constants), tol * (1.0 + np.abs(obj[:-1])))


def windowed_steps(step_norm, tau):
    """``sum_{j=k-tau}^{k} step_norm(j)`` with the window truncated at 0."""
    s = np.asarray(step_norm, dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(s)])
    k = np.arange(s.size)
    return csum[k + 1] - csum[np.maximum(k - int(tau), 0)]


def relerr_margins(trace, constants):
    """``c*window(k) + d*eta(k) - witness_norm(k+1)`` per iteration."""
    _, s, e, w = trace.arrays()
    return constants.c * windowed_steps(s, constants.tau) + constants.d * e - w[1:]


def check_relative_error(trace, constants, tol=1e-9):
    """Iterations violating pseudo relative error, as ``(k, margin)`` pairs."""
    _require_steps(trace)
    m = relerr_margins(trace, constants)
    return _violations(m, np.full(m.shape, tol))


@dataclass
class LyapunovResult:
    monotone: bool
    worst_margin: float
    xi: np.ndarray
    t: np.ndarray
    identity_residual: float
    subgradient_margin: float


def check_lyapunov(trace, schedule=None, params=None, constants=None, tol=1e-9):
    """Monotonicity of ``xi_k = obj(k) + t_k**theta / theta``.

    Checks ``xi_k - xi_{k+1} >= a*step_norm(k)**2`` and the exact identity
    ``xi_k - xi_{k+1} == obj(k) - obj(k+1) + b*eta(k)**2``; the residual of
    the latter is returned and must stay below ``tol``. ``subgradient_margin``
    is the worst margin of the witness bound shifted by ``t_{k+1}**(theta-1)``.
    """
    _require_steps(trace)
    if constants is None:
        raise InvalidArgument("constants are required")
    schedule = trace.schedule if schedule is None else schedule
    if schedule is None:
        raise InvalidArgument("trace carries no schedule")
    if params is None:
        params = LyapunovParams(b=constants.b)
    if params.b != constants.b:
        raise InvalidArgument("params.b must equal constants.b")
    if not is_square_summable(schedule):
        raise NotSummable("Lyapunov value needs a square-summable schedule")
    obj, s, e, w = trace.arrays()
    K = len(trace)
    t = t_values(schedule, params, np.arange(K + 1) + trace.noise_offset)
    xi = obj + t ** params.theta / params.theta
    drop = xi[:-1] - xi[1:]
    margins = drop - constants.a * s ** 2
    scale = 1.0 + np.abs(xi[:-1])
    identity = drop - ((obj[:-1] - obj[1:]) + constants.b * e ** 2)
    residual = float(np.max(np.abs(identity) / scale))
    shift = t[1:] ** (params.theta - 1.0)
    bound = constants.c * windowed_steps(s, constants.tau) + constants.d * e + shift
    sub = bound - (w[1:] + shift)
    return LyapunovResult(
        monotone=bool(np.all(margins >= -tol * scale)) and residual <= tol,
        worst_margin=float(np.min(margins)),
        xi=xi, t=t, identity_residual=residual,
        subgradient_margin=float(np.min(sub)))


def check_finite_length(trace, window=100, cauchy_tol=1e-6, stop_threshold=1e-6,
                        escape_radius=1e6, summable=None, envelope_fraction=0.9):
    """Verdict on the finite length property.

    ``converged`` when the last ``window`` step norms sum below ``cauchy_tol``
    and the final witness norm is below ``stop_threshold``. ``diverged`` when
    the noise is not summable and the path either leaves ``escape_radius`` or
    tracks at least ``envelope_fraction`` of the accumulated noise. Otherwise
    ``undetermined``.

    Returns ``(verdict, path_length_partial, tail)``.
    """
    _require_steps(trace)
    K = len(trace)
    if not 0 < window <= K:
        raise InvalidArgument(f"window must be in [1, {K}]")
    s = np.asarray(trace.step_norm, dtype=float)
    partial = np.cumsum(s)
    tail = float(np.sum(s[-window:]))
    final_witness = float(trace.witness_norm[-1])
    if summable is None:
        summable = trace.schedule is None or is_summable(trace.schedule)
    noise_total = float(np.sum(trace.eta))
    if tail < cauchy_tol and final_witness < stop_threshold:
        verdict = "converged"
    elif not summable and (partial[-1] > escape_radius
                           or (noise_total > 0 and partial[-1] >= envelope_fraction * noise_total)):
        verdict = "diverged"
    else:
        verdict = "undetermined"
    return verdict, partial, tail


@dataclass
class DiagnosticsReport:
    scheme: str
    iterations: int
    descent_violations: List[Tuple[int, float]]
    relerr_violations: List[Tuple[int, float]]
    lyapunov_monotone: Optional[bool]
    lyapunov_worst_margin: Optional[float]
    lyapunov_identity_residual: Optional[float]
    subgradient_margin: Optional[float]
    lyapunov_note: str
    path_length_partial: List[float]
    tail_path_length: float
    noise_tail: float
    final_witness_norm: float
    verdict: str
    constants: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.descent_violations and not self.relerr_violations

    def to_dict(self):
        d = asdict(self)
        d["descent_violations"] = [list(v) for v in self.descent_violations]
        d["relerr_violations"] = [list(v) for v in self.relerr_violations]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["descent_violations"] = [(int(k), float(m)) for k, m in d["descent_violations"]]
        d["relerr_violations"] = [(int(k), float(m)) for k, m in d["relerr_violations"]]
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def full_report(trace, constants, schedule=None, params=None, tolerances=None):
    """Run every check and aggregate the results."""
    if len(trace) == 0:
        raise InvalidArgument("empty trace")
    tol = tolerances or Tolerances()
    schedule = trace.schedule if schedule is None else schedule
    if params is None:
        params = LyapunovParams(theta=tol.theta, b=constants.b)
    descent = check_sufficient_descent(trace, constants, tol.descent)
    relerr = check_relative_error(trace, constants, tol.relerr)

    lyap = None
    note = ""
    if schedule is None:
        note = "no schedule"
    else:
        try:
            lyap = check_lyapunov(trace, schedule, params, constants, tol.lyapunov)
        except (NotSummable, InvalidArgument) as exc:
            note = str(exc)

    window = min(tol.window, len(trace))
    summable = True if schedule is None else is_summable(schedule)
    verdict, partial, tail = check_finite_length(
        trace, window, tol.cauchy_tol, tol.stop_threshold, tol.escape_radius,
        summable, tol.envelope_fraction)
    # premise of the summability implication, informational only
    noise_tail = float(np.sum(np.asarray(trace.eta, dtype=float)[-window:]))

    def finite(v):
        return None if v is None or not math.isfinite(v) else float(v)

    return DiagnosticsReport(
        scheme=trace.scheme,
        iterations=len(trace),
        descent_violations=descent,
        relerr_violations=relerr,
        lyapunov_monotone=None if lyap is None else lyap.monotone,
        lyapunov_worst_margin=None if lyap is None else finite(lyap.worst_margin),
        lyapunov_identity_residual=None if lyap is None else finite(lyap.identity_residual),
        subgradient_margin=None if lyap is None else finite(lyap.subgradient_margin),
        lyapunov_note=note,
        path_length_partial=[float(v) for v in partial],
        tail_path_length=tail,
        noise_tail=noise_tail,
        final_witness_norm=float(trace.witness_norm[-1]),
        verdict=verdict,
        constants=constants.to_dict(),
        tolerances=tol.to_dict(),
    )
