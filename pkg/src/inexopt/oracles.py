"""Closed-form proximal operators and a brute-force grid oracle.

All operators act componentwise and return new arrays. The proximal map
of ``J`` at ``x`` is any global minimizer of ``J(y) + |y - x|^2 / 2``;
``tau`` scales the penalty, so ``prox_l1(x, tau)`` minimizes
``tau*|y|_1 + |y - x|^2 / 2``.
"""
import numpy as np

from .errors import InvalidArgument, NumericFailure

TIE_POLICIES = ("zero", "keep")


def prox_l1(x, tau):
    """Soft thresholding: ``sign(x) * max(|x| - tau, 0)``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def prox_l0(x, tau, tie_policy="zero"):
    """Hard thresholding for ``tau * #{i : y_i != 0}``.

    A coordinate is kept when ``x_i**2 / 2 > tau`` (i.e. ``|x_i| > sqrt(2 tau)``)
    and zeroed when ``x_i**2 / 2 < tau``. At equality both candidates attain
    the same objective and ``tie_policy`` picks one.
    """
    if tie_policy not in TIE_POLICIES:
        raise InvalidArgument(f"unknown tie_policy {tie_policy!r}")
    x = np.asarray(x, dtype=float)
    half_sq = 0.5 * x * x
    keep = half_sq > tau
    if tie_policy == "keep":
        keep |= half_sq == tau
    return np.where(keep, x, 0.0)


def prox_weighted_l1(x, weights, tau):
    """Soft thresholding with per-coordinate thresholds ``tau * weights``."""
    weights = np.asarray(weights, dtype=float)
    if np.any(~(weights > 0)):
        raise InvalidArgument("weights must be strictly positive")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau * weights, 0.0)


def prox_box(x, lo, hi):
    """Projection onto ``[lo, hi]`` (prox of the box indicator)."""
    return np.clip(np.asarray(x, dtype=float), lo, hi)


def prox_oracle(J, x, lo, hi, grid_points):
    """Grid minimizer of ``J(y) + (y - x)**2 / 2`` over ``[lo, hi]``.

    ``J`` must accept a numpy array and return values elementwise; ``+inf``
    is allowed (indicator functions) but NaN is not. Test-only ground truth.
    """
    if not lo < hi:
        raise InvalidArgument("need lo < hi")
    if grid_points < 3:
        raise InvalidArgument("need at least 3 grid points")
    grid = np.linspace(lo, hi, int(grid_points))
    values = np.asarray(J(grid), dtype=float)
    if values.shape != grid.shape:
        values = np.broadcast_to(values, grid.shape)
    if np.any(np.isnan(values)) or np.all(np.isinf(values)):
        raise NumericFailure("J is not finite on the grid")
    objective = values + 0.5 * (grid - x) ** 2
    return float(grid[np.argmin(objective)])
