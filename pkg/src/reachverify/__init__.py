"""Bounded-time safety verification for nonlinear and hybrid models driven by fixed input signals.

Typical use::

    from reachverify import builtin_problem, verify
    result = verify(builtin_problem("inv-uniform", "sig"))
    print(result.report())
"""

from .interval import Box, Interval, IntervalError, IntervalMatrix
from .expr import (
    DomainError,
    Expr,
    ParseError,
    Valuation,
    differentiate,
    eval_interval,
    eval_point,
    jacobian,
    parse_expr,
    to_string,
)
from .model import (
    ContinuousMode,
    HybridAutomaton,
    InputSignal,
    InputSignalAutomaton,
    ModelError,
    Overlap,
    Predicate,
    Transition,
    VerificationProblem,
    check_unsafe_intersection,
    compose,
    parse_predicate,
    single_mode,
)
from .sim import (
    PointTrace,
    SimTrace,
    SimulationError,
    hybrid_simulate,
    point_simulate,
    simulate,
    validated_simulate,
)
from .discrepancy import (
    EnclosureError,
    PiecewiseDiscrepancy,
    Reachtube,
    bloat,
    coarse_enclosure,
    discrepancy_for_trace,
    gamma_bound,
    interval_jacobian,
    reachtube,
)
from .verify import (
    CoverTriple,
    VerificationResult,
    Verdict,
    closed_model_comparison,
    confirm_witness,
    cover,
    refine,
    verify,
)
from .circuits import BUILTINS, builtin_problem
from .modelfile import ModelFileError, dump_problem, dumps, load_problem, loads

__version__ = "0.1.0"

__all__ = [
    "Box", "Interval", "IntervalError", "IntervalMatrix",
    "DomainError", "Expr", "ParseError", "Valuation", "differentiate", "eval_interval", "eval_point",
    "jacobian", "parse_expr", "to_string",
    "ContinuousMode", "HybridAutomaton", "InputSignal", "InputSignalAutomaton", "ModelError", "Overlap",
    "Predicate", "Transition", "VerificationProblem", "check_unsafe_intersection", "compose",
    "parse_predicate", "single_mode",
    "PointTrace", "SimTrace", "SimulationError", "hybrid_simulate", "point_simulate", "simulate",
    "validated_simulate",
    "EnclosureError", "PiecewiseDiscrepancy", "Reachtube", "bloat", "coarse_enclosure",
    "discrepancy_for_trace", "gamma_bound", "interval_jacobian", "reachtube",
    "CoverTriple", "VerificationResult", "Verdict", "closed_model_comparison", "confirm_witness", "cover",
    "refine", "verify",
    "BUILTINS", "builtin_problem",
    "ModelFileError", "dump_problem", "dumps", "load_problem", "loads",
]
