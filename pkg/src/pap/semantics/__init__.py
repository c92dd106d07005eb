"""Status-set semantics: operators, consistency checks, fixpoints and the
brute-force oracle."""

from .engine import (
    NO_CONSISTENT_SET,
    NO_REASONABLE_SET,
    Evaluator,
    Failure,
    FeasibilityReport,
    TraceEvent,
    Verdict,
    action_closure,
    action_consistent,
    app_operator,
    check_feasible,
    check_rational,
    check_reasonable,
    compute_S,
    compute_lfp,
    deontic_closure,
    deontically_consistent,
    is_failure,
    reduct,
    s_operator,
    state_consistent,
    t_operator,
)
from .oracle import BoundExceeded, Catalog, brute_force_status_sets
from .reduction import NotDegenerate, is_degenerate, red_reduce, red_reduce_state
from .views import ClassicalView, ProbView, make_view

__all__ = [
    "NO_CONSISTENT_SET", "NO_REASONABLE_SET", "BoundExceeded", "Catalog", "ClassicalView", "Evaluator", "Failure",
    "FeasibilityReport", "NotDegenerate", "ProbView", "TraceEvent", "Verdict", "action_closure", "action_consistent",
    "app_operator", "brute_force_status_sets", "check_feasible", "check_rational", "check_reasonable", "compute_S",
    "compute_lfp", "deontic_closure", "deontically_consistent", "is_degenerate", "is_failure", "make_view", "red_reduce",
    "red_reduce_state", "reduct", "s_operator", "state_consistent", "t_operator",
]
