"""Threshold semantics and the integrity-constraint linear program."""

from .icheck import ActionInstance, Execution, ICVerdict, check_ic_p_consistency, generate_ic_lp, ic_holds, ic_level
from .operators import check_p_feasible, compute_p_S, compute_p_lfp, p_app_operator
from .simplex import IterationLimit, LPProblem, LPSolution, solve_lp

__all__ = [
    "ActionInstance", "Execution", "ICVerdict", "IterationLimit", "LPProblem", "LPSolution", "check_ic_p_consistency",
    "check_p_feasible", "compute_p_S", "compute_p_lfp", "generate_ic_lp", "ic_holds", "ic_level", "p_app_operator",
    "solve_lp",
]
