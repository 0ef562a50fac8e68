import json
import math
from dataclasses import replace

import numpy as np
import pytest

from inexopt import problems as P
from inexopt.diagnostics import (DiagnosticsReport, Tolerances, check_finite_length,
                                 check_lyapunov, check_relative_error, check_sufficient_descent,
                                 descent_margins, full_report, windowed_steps)
from inexopt.errors import InvalidArgument, NotSummable
from inexopt.noise import LyapunovParams, NoiseSchedule
from inexopt.solvers import IterateTrace, LemmaConstants, SolverConfig, run_ipg


def gd_trace(iters=50, noise=None, x0=0.0):
    p = P.CompositeProblem(P.squared_distance(np.ones(1)), P.zero_prox(), 1)
    cfg = SolverConfig(step=0.5, max_iters=iters, noise=noise or NoiseSchedule.zero())
    return run_ipg(p, cfg, x0=[x0])


def spike_trace():
    """Small lasso with a tiny power-law background and one large noise spike."""
    p = P.make_sparse_regression(10, 8, 3, 0.1, seed=11)
    values = [0.01 / n ** 2 for n in range(1, 201)]
    values[60] = 0.5
    noise = NoiseSchedule.explicit(values, seed=4)
    return run_ipg(p, SolverConfig(step=0.9 / p.f.lipschitz, max_iters=200, noise=noise))


def test_exact_gradient_descent_has_no_violations():
    trace, c = gd_trace()
    assert check_sufficient_descent(trace, c) == []
    assert check_relative_error(trace, c) == []


def test_descent_margin_sign_convention():
    trace, c = gd_trace(5)
    m = descent_margins(trace, c)
    obj, s = np.array(trace.obj), np.array(trace.step_norm)
    np.testing.assert_allclose(m, obj[:-1] - obj[1:] - c.a * s ** 2)
    assert np.all(m >= 0)


def test_doubled_descent_constant_is_caught(shipped_runs):
    _, _, trace, c = shipped_runs["idc"]
    assert check_sufficient_descent(trace, c) == []
    bad = check_sufficient_descent(trace, replace(c, a=2 * c.a))
    assert bad and all(m < 0 for _, m in bad)


def test_shrunken_relative_error_constants_are_caught(shipped_runs):
    _, _, trace, c = shipped_runs["ipg"]
    assert check_relative_error(trace, replace(c, c=c.c / 2, d=c.d / 2))


def test_injected_objective_fault_located():
    trace, c = gd_trace(20)
    trace.obj[7] += 1.0
    # iteration 6 produces iterate 7, so its inequality is the one that breaks
    ks = [k for k, _ in check_sufficient_descent(trace, c)]
    assert ks == [6]


def test_zero_noise_relerr_reduces_to_classical():
    trace, c = gd_trace(30)
    assert check_relative_error(trace, replace(c, d=0.0)) == []
    assert check_sufficient_descent(trace, replace(c, b=0.0)) == []


def test_window_truncated_at_start():
    s = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(windowed_steps(s, 0), s)
    np.testing.assert_array_equal(windowed_steps(s, 2), [1.0, 3.0, 6.0, 9.0])
    np.testing.assert_array_equal(windowed_steps(s, 10), [1.0, 3.0, 6.0, 10.0])
    trace, c = gd_trace(10)
    assert check_relative_error(trace, replace(c, tau=50)) == []


def test_checks_need_a_step():
    empty = IterateTrace("ipg", obj=[1.0], witness_norm=[math.nan])
    c = LemmaConstants(1, 1, 1, 1)
    with pytest.raises(InvalidArgument):
        check_sufficient_descent(empty, c)
    with pytest.raises(InvalidArgument):
        full_report(empty, c)


def test_lyapunov_zero_noise_equals_objective():
    trace, c = gd_trace(20)
    res = check_lyapunov(trace, NoiseSchedule.zero(), LyapunovParams(b=c.b), c)
    np.testing.assert_array_equal(res.xi, trace.obj)
    assert res.monotone and res.identity_residual == 0.0


def test_lyapunov_reconciles_noise_spike():
    trace, c = spike_trace()
    obj = np.array(trace.obj)
    assert np.any(np.diff(obj) > 0)
    res = check_lyapunov(trace, constants=c)
    assert res.monotone
    assert np.all(np.diff(res.xi) <= 0)
    assert res.identity_residual <= 1e-9
    # every objective increase is covered by b * eta^2
    rises = np.flatnonzero(np.diff(obj) > 0)
    eta = np.array(trace.eta)
    assert np.all(obj[rises + 1] - obj[rises] <= c.b * eta[rises] ** 2)


def test_lyapunov_subgradient_bound():
    trace, c = spike_trace()
    res = check_lyapunov(trace, constants=c)
    assert res.subgradient_margin >= -1e-9


def test_lyapunov_errors():
    trace, c = gd_trace(5)
    with pytest.raises(InvalidArgument):
        check_lyapunov(trace, NoiseSchedule.zero(), LyapunovParams(b=c.b + 1), c)
    with pytest.raises(NotSummable):
        check_lyapunov(trace, NoiseSchedule.constant(0.1), LyapunovParams(b=c.b), c)
    with pytest.raises(InvalidArgument):
        check_lyapunov(trace, NoiseSchedule.zero(), None, None)


def test_finite_length_converged(shipped_runs):
    _, _, trace, _ = shipped_runs["ipg"]
    verdict, partial, tail = check_finite_length(trace, window=100)
    assert verdict == "converged"
    assert tail < 1e-6
    assert partial[-1] == pytest.approx(math.fsum(trace.step_norm), rel=1e-12)


def test_finite_length_diverged_harmonic():
    noise = NoiseSchedule.power_law(1, 1, direction="adversarial_positive")
    p = P.make_zero_problem(1)
    trace, _ = run_ipg(p, SolverConfig(step=1.0, max_iters=10_000, noise=noise), keep_points=False)
    verdict, partial, _ = check_finite_length(trace, window=10)
    assert verdict == "diverged"
    assert partial[-1] >= 8.7
    ks = np.arange(2, 10_001)
    assert np.all(partial[ks - 1] >= 0.9 * np.log(ks))


def test_finite_length_undetermined_when_short():
    trace, _ = gd_trace(10)
    assert check_finite_length(trace, window=5)[0] == "undetermined"
    with pytest.raises(InvalidArgument):
        check_finite_length(trace, window=11)


def test_escape_radius_triggers_divergence():
    noise = NoiseSchedule.constant(1.0, direction="random_sphere", seed=2)
    trace, _ = run_ipg(P.make_zero_problem(3), SolverConfig(step=1.0, max_iters=50, noise=noise))
    assert check_finite_length(trace, 10, escape_radius=20.0, envelope_fraction=2.0)[0] == "diverged"
    assert check_finite_length(trace, 10, escape_radius=1e6, envelope_fraction=2.0)[0] == "undetermined"


def test_full_report_roundtrip():
    trace, c = spike_trace()
    report = full_report(trace, c)
    text = report.to_json()
    back = DiagnosticsReport.from_json(text)
    assert back == report
    assert back.to_json() == text
    d = json.loads(text)
    assert set(d) >= {"descent_violations", "relerr_violations", "lyapunov_monotone",
                      "path_length_partial", "tail_path_length", "final_witness_norm", "verdict"}


def test_full_report_non_square_summable_notes_skip():
    noise = NoiseSchedule.power_law(1, 0.5, direction="adversarial_positive")
    trace, c = run_ipg(P.make_zero_problem(1), SolverConfig(step=1.0, max_iters=200, noise=noise))
    report = full_report(trace, c, tolerances=Tolerances(window=10))
    assert report.lyapunov_monotone is None and report.lyapunov_note
    assert report.verdict == "diverged"


def test_report_is_pure_function_of_trace():
    trace, c = spike_trace()
    assert full_report(trace, c).to_json() == full_report(trace, c).to_json()


def test_tolerances_roundtrip():
    t = Tolerances(window=7, cauchy_tol=1e-5)
    assert Tolerances.from_dict(t.to_dict()) == t
