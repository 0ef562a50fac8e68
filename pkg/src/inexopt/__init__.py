"""Inexact first-order methods for nonconvex nonsmooth problems, with trace certification."""
from .diagnostics import DiagnosticsReport, Tolerances, full_report
from .errors import (InexoptError, InvalidArgument, InvalidConfig, ModelViolation,
                     NotSummable, NumericFailure)
from .noise import LyapunovParams, NoiseSchedule
from .solvers import (SOLVERS, IterateTrace, LemmaConstants, SolverConfig, run_iadmm, run_idc,
                      run_ipalm, run_ipg, run_pire)

__version__ = "0.1.0"

__all__ = [
    "DiagnosticsReport", "Tolerances", "full_report",
    "InexoptError", "InvalidArgument", "InvalidConfig", "ModelViolation", "NotSummable",
    "NumericFailure", "LyapunovParams", "NoiseSchedule", "SOLVERS", "IterateTrace",
    "LemmaConstants", "SolverConfig", "run_iadmm", "run_idc", "run_ipalm", "run_ipg", "run_pire",
]
