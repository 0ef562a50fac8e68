"""Command-line experiment runner.

Subcommands::

    inexopt run --config RUN.ini --out DIR
    inexopt alpha-sweep --config RUN.ini --alphas 0.5,1,1.5,2,3 --out DIR [--parallel N]
    inexopt ctheta --theta-min 1.1 --theta-max 5 --points 40 [--out FILE]
    inexopt verify TRACE.csv CONSTANTS.json [--out REPORT.json]

Exit codes: 0 success, 1 violations or unexpected divergence, 2 usage,
configuration or schema error, 3 numeric failure (partial outputs kept).
"""
import argparse
import configparser
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from . import noise as nz
from .diagnostics import Tolerances, full_report
from .errors import InexoptError, InvalidArgument, InvalidConfig, ModelViolation, NumericFailure
from .noise import LyapunovParams, NoiseSchedule
from .problems import GENERATORS, problem_from_dict, problem_type
from .solvers import SOLVERS, IterateTrace, LemmaConstants, SolverConfig

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

BASE_COLUMNS = ("k", "obj", "step_norm", "eta", "witness_norm", "t_k", "xi")
SCHEMA_VERSION = 1

_SOLVER_KEYS = {"kind", "step", "step_fraction", "step_y", "step_z", "alpha", "beta",
                "max_iters", "stop_tol", "seed"}
_NOISE_KEYS = {"kind", "C", "alpha", "value", "values", "direction", "seed",
               "fixed_direction", "start_index"}
_DIAG_KEYS = set(Tolerances().to_dict()) | {"expect_divergence"}


# --------------------------------------------------------------------------
# configuration

@dataclass
class RunConfig:
    problem: dict
    solver: dict
    noise: dict = field(default_factory=lambda: {"kind": "zero"})
    noise_y: Optional[dict] = None
    diagnostics: dict = field(default_factory=dict)
    expect_divergence: bool = False

    def tolerances(self):
        return Tolerances.from_dict(self.diagnostics)


def _scalar(text):
    low = text.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text.strip()


def _section(parser, name, allowed=None):
    if not parser.has_section(name):
        return None
    out = {}
    for key, raw in parser.items(name):
        if allowed is not None and key not in allowed:
            raise InvalidConfig(f"unknown key {key!r} in [{name}]")
        if key in ("values", "fixed_direction"):
            out[key] = [float(v) for v in raw.replace(",", " ").split()]
        else:
            out[key] = _scalar(raw)
    return out


def parse_config(text):
    """Parse INI text into a :class:`RunConfig`, validating the pairing."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise InvalidConfig(f"cannot parse config: {exc}") from exc
    problem = _section(parser, "problem")
    solver = _section(parser, "solver", _SOLVER_KEYS)
    if problem is None or solver is None:
        raise InvalidConfig("config needs [problem] and [solver] sections")
    diag = _section(parser, "diagnostics", _DIAG_KEYS) or {}
    expect = bool(diag.pop("expect_divergence", False))
    cfg = RunConfig(problem=problem, solver=solver,
                    noise=_section(parser, "noise", _NOISE_KEYS) or {"kind": "zero"},
                    noise_y=_section(parser, "noise_y", _NOISE_KEYS),
                    diagnostics=diag, expect_divergence=expect)
    check_pairing(cfg)
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def check_pairing(cfg):
    pkind, skind = cfg.problem.get("kind"), cfg.solver.get("kind")
    if pkind not in GENERATORS:
        raise InvalidConfig(f"unknown problem kind {pkind!r}")
    if skind not in SOLVERS:
        raise InvalidConfig(f"unknown solver kind {skind!r}; choose from {sorted(SOLVERS)}")
    if GENERATORS[pkind][1] != SOLVERS[skind][1]:
        raise InvalidConfig(f"solver {skind!r} cannot run on a {GENERATORS[pkind][1]} problem "
                            f"({pkind!r}); it needs a {SOLVERS[skind][1]} problem")


def _schedule(d):
    if d is None:
        return None
    try:
        return NoiseSchedule.from_dict(d)
    except TypeError as exc:
        raise InvalidConfig(f"bad noise section: {exc}") from exc


def max_steps(problem):
    """Largest admissible (exclusive) step sizes for each scheme's problem type."""
    kind = problem_type(problem)
    if kind == "composite":
        return {"step": _inv(problem.f.lipschitz)}
    if kind == "block":
        return {"step_y": _inv(problem.M), "step_z": _inv(problem.N)}
    if kind == "reweighted":
        return {"step": _inv(problem.f.lipschitz / 2.0)}
    if kind == "dc":
        scale = 2.0 if problem.g.is_convex else 1.0
        return {"step": _inv(problem.f.lipschitz / scale)}
    return {}


def _inv(v):
    return 1.0 if v == 0 else 1.0 / v


def build(cfg):
    """Instantiate ``(problem, solver function, SolverConfig)`` from a config."""
    check_pairing(cfg)
    try:
        problem = problem_from_dict(cfg.problem)
    except TypeError as exc:
        raise InvalidConfig(f"bad [problem] parameters: {exc}") from exc
    s = dict(cfg.solver)
    kind = s.pop("kind")
    fraction = float(s.pop("step_fraction", 0.9))
    for name, bound in max_steps(problem).items():
        s.setdefault(name, fraction * bound)
    config = SolverConfig(noise=_schedule(cfg.noise), noise_y=_schedule(cfg.noise_y), **s)
    return problem, SOLVERS[kind][0], config


# --------------------------------------------------------------------------
# trace and constants files

def _fmt(v):
    return "%.17g" % v


def lyapunov_columns(trace, constants, schedule, theta):
    """``(t_k, xi)`` columns, NaN when the schedule is not square-summable."""
    n = len(trace.obj)
    try:
        params = LyapunovParams(theta=theta, b=constants.b)
        t = nz.t_values(schedule, params, np.arange(n) + trace.noise_offset)
        return t, np.asarray(trace.obj) + t ** theta / theta
    except InexoptError:
        return np.full(n, math.nan), np.full(n, math.nan)


def write_trace(path, trace, constants=None, theta=2.0):
    extras = list(trace.extras)
    K = len(trace)
    if constants is not None and trace.schedule is not None:
        t, xi = lyapunov_columns(trace, constants, trace.schedule, theta)
    else:
        t = xi = np.full(len(trace.obj), math.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BASE_COLUMNS + tuple(extras))
        for k in range(len(trace.obj)):
            last = k >= K
            row = [str(k), _fmt(trace.obj[k]),
                   _fmt(math.nan if last else trace.step_norm[k]),
                   _fmt(math.nan if last else trace.eta[k]),
                   _fmt(trace.witness_norm[k]), _fmt(t[k]), _fmt(xi[k])]
            row += [_fmt(math.nan if last else trace.extras[n][k]) for n in extras]
            w.writerow(row)


def read_trace(path, scheme, schedule, noise_offset, iterations=None):
    """Rebuild an :class:`IterateTrace` (without points) from a trace CSV."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InvalidConfig(f"cannot read trace {path}: {exc}") from exc
    if len(rows) < 3:
        raise InvalidConfig("trace needs a header and at least two rows")
    header = tuple(rows[0])
    if header[:len(BASE_COLUMNS)] != BASE_COLUMNS:
        raise InvalidConfig(f"trace header must start with {','.join(BASE_COLUMNS)}")
    try:
        data = [[float(v) for v in r] for r in rows[1:]]
    except ValueError as exc:
        raise InvalidConfig(f"non-numeric trace entry: {exc}") from exc
    if any(len(r) != len(header) for r in data):
        raise InvalidConfig("trace rows do not match the header width")
    if [int(r[0]) for r in data] != list(range(len(data))) or any(r[0] != int(r[0]) for r in data):
        raise InvalidConfig("trace k column must run 0, 1, 2, ...")
    K = len(data) - 1
    if iterations is not None and K != iterations:
        raise InvalidConfig(f"trace has {K} iterations, constants file expects {iterations}")
    cols = list(zip(*data))
    extras = {name: list(cols[i][:K]) for i, name in enumerate(header)
              if i >= len(BASE_COLUMNS)}
    return IterateTrace(scheme, obj=list(cols[1]), step_norm=list(cols[2][:K]),
                        eta=list(cols[3][:K]), witness_norm=list(cols[4]), extras=extras,
                        schedule=schedule, noise_offset=noise_offset)


def constants_record(trace, constants, tolerances):
    return {
        "schema": SCHEMA_VERSION,
        "scheme": trace.scheme,
        "iterations": len(trace),
        "constants": constants.to_dict(),
        "theta": tolerances.theta,
        "schedule": None if trace.schedule is None else trace.schedule.to_dict(),
        "noise_offset": trace.noise_offset,
        "tolerances": tolerances.to_dict(),
    }


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1, allow_nan=False)
        fh.write("\n")


def read_constants(path):
    try:
        with open(path) as fh:
            d = json.load(fh)
        if d.get("schema") != SCHEMA_VERSION:
            raise InvalidConfig(f"unsupported constants schema {d.get('schema')!r}")
        constants = LemmaConstants.from_dict(d["constants"])
        schedule = None if d["schedule"] is None else NoiseSchedule.from_dict(d["schedule"])
        tol = Tolerances.from_dict(d["tolerances"])
        return d, constants, schedule, tol
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InvalidConfig(f"bad constants file {path}: {exc}") from exc


def report_for(trace, constants, tolerances):
    params = LyapunovParams(theta=tolerances.theta, b=constants.b)
    return full_report(trace, constants, trace.schedule, params, tolerances)


# --------------------------------------------------------------------------
# commands

@dataclass
class RunResult:
    exit_code: int
    report: Optional[dict]
    message: str = ""


def execute(cfg, out_dir):
    """Run one configured experiment and write its outputs into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    tol = cfg.tolerances()
    problem, solve, config = build(cfg)
    try:
        trace, constants = solve(problem, config)
    except NumericFailure as exc:
        if exc.trace is not None and len(exc.trace.obj) > 0:
            write_trace(os.path.join(out_dir, "trace.csv"), exc.trace)
        _dump(os.path.join(out_dir, "error.json"), {"error": str(exc)})
        return RunResult(EXIT_NUMERIC, None, f"numeric failure: {exc}")
    write_trace(os.path.join(out_dir, "trace.csv"), trace, constants, tol.theta)
    _dump(os.path.join(out_dir, "constants.json"), constants_record(trace, constants, tol))
    report = report_for(trace, constants, tol)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(report.to_json())
    if not report.ok:
        code, msg = EXIT_VIOLATION, (f"{len(report.descent_violations)} descent and "
                                     f"{len(report.relerr_violations)} relative-error violations")
    elif cfg.expect_divergence:
        ok = report.verdict == "diverged"
        code = EXIT_OK if ok else EXIT_VIOLATION
        msg = f"verdict {report.verdict} (divergence expected)"
    else:
        ok = report.verdict != "diverged"
        code = EXIT_OK if ok else EXIT_VIOLATION
        msg = f"verdict {report.verdict}"
    return RunResult(code, report.to_dict(), msg)


def cmd_run(config_path, out_dir):
    cfg = load_config(config_path)
    result = execute(cfg, out_dir)
    print(result.message)
    return result.exit_code


def _sweep_one(args):
    cfg, alpha, out_dir = args
    run_cfg = replace(cfg, noise=dict(cfg.noise, alpha=alpha))
    result = execute(run_cfg, out_dir)
    if result.report is None:
        return dict(alpha=alpha, path_length=math.nan, final_witness_norm=math.nan,
                    verdict="failed", violations=0, exit_code=result.exit_code)
    rep = result.report
    return dict(alpha=alpha, path_length=rep["path_length_partial"][-1],
                final_witness_norm=rep["final_witness_norm"], verdict=rep["verdict"],
                violations=len(rep["descent_violations"]) + len(rep["relerr_violations"]),
                exit_code=result.exit_code)


def sweep_dir_name(index, alpha):
    return f"run_{index:03d}_alpha_{alpha:g}"


def cmd_alpha_sweep(config_path, alphas, out_dir, parallel=1):
    """One run per noise exponent; returns the summary rows."""
    if not alphas:
        raise InvalidArgument("alpha list must be nonempty")
    if any(not a > 0 for a in alphas):
        raise InvalidArgument("noise exponents must be positive")
    cfg = load_config(config_path)
    if cfg.noise.get("kind") != "power_law":
        raise InvalidConfig("alpha-sweep needs a power_law [noise] section")
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(cfg, a, os.path.join(out_dir, sweep_dir_name(i, a))) for i, a in enumerate(alphas)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "path_length", "final_witness_norm", "verdict"])
        for r in rows:
            w.writerow([_fmt(r["alpha"]), _fmt(r["path_length"]),
                        _fmt(r["final_witness_norm"]), r["verdict"]])
    return rows


def cmd_ctheta(theta_min, theta_max, points):
    """``(theta, c(theta))`` on a uniform grid.

    The grid and the values are computed in rational arithmetic from the
    decimal reading of the endpoints, then rounded once, so ``c(1.1)`` is
    exactly ``6.0``.
    """
    if not 1 < theta_min < theta_max:
        raise InvalidArgument("need 1 < theta_min < theta_max")
    if points < 2:
        raise InvalidArgument("need at least 2 points")
    lo, hi = Fraction(repr(float(theta_min))), Fraction(repr(float(theta_max)))
    n = int(points) - 1
    rows = []
    for i in range(n + 1):
        t = lo + (hi - lo) * i / n
        rows.append((float(t), float((2 * t - 1) / (2 * (t - 1)))))
    return rows


def cmd_verify(trace_path, constants_path):
    """Recompute the report from stored files; returns the report JSON text."""
    d, constants, schedule, tol = read_constants(constants_path)
    trace = read_trace(trace_path, d["scheme"], schedule, int(d["noise_offset"]),
                       int(d["iterations"]))
    return report_for(trace, constants, tol)


# --------------------------------------------------------------------------
# entry point

def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    p = argparse.ArgumentParser(prog="inexopt", description="Inexact first-order method runner.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one configured experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)

    s = sub.add_parser("alpha-sweep", help="repeat a run over noise exponents")
    s.add_argument("--config", required=True)
    s.add_argument("--alphas", type=_floats, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--parallel", type=int, default=1)

    c = sub.add_parser("ctheta", help="tabulate c(theta)")
    c.add_argument("--theta-min", type=float, default=1.1)
    c.add_argument("--theta-max", type=float, default=5.0)
    c.add_argument("--points", type=int, default=40)
    c.add_argument("--out")

    v = sub.add_parser("verify", help="re-audit a stored trace")
    v.add_argument("trace")
    v.add_argument("constants")
    v.add_argument("--out")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out)
        if args.command == "alpha-sweep":
            rows = cmd_alpha_sweep(args.config, args.alphas, args.out, args.parallel)
            print("alpha,path_length,final_witness_norm,verdict")
            for row in rows:
                print(f"{row['alpha']:g},{row['path_length']:.6g},"
                      f"{row['final_witness_norm']:.3g},{row['verdict']}")
            if any(r["exit_code"] == EXIT_NUMERIC for r in rows):
                return EXIT_NUMERIC
            return EXIT_VIOLATION if any(r["violations"] for r in rows) else EXIT_OK
        if args.command == "ctheta":
            rows = cmd_ctheta(args.theta_min, args.theta_max, args.points)
            lines = ["theta,c_theta"] + [f"{_fmt(t)},{_fmt(c)}" for t, c in rows]
            text = "\n".join(lines) + "\n"
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        if args.command == "verify":
            report = cmd_verify(args.trace, args.constants)
            text = report.to_json()
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK if report.ok else EXIT_VIOLATION
    except (InvalidConfig, InvalidArgument, ModelViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
