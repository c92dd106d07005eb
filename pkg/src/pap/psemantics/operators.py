"""Threshold variants of the status-set operators.

Preconditions, permissions and action-constraint guards are checked at
``[p, 1]`` instead of ``[1, 1]``; annotated rule bodies are unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..model import Program
from ..semantics.engine import Evaluator, FeasibilityReport, Failure
from .icheck import ActionInstance, Execution, check_ic_p_consistency, ic_level

MODES = ("weak", "strong")


def _check_level(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability level {p} outside [0,1]")


def p_evaluator(prog: Program, pstate, p: float, closure: str = "classic") -> Evaluator:
    _check_level(p)
    return Evaluator(prog, pstate, p=p, closure=closure)


def p_app_operator(prog: Program, pstate, ps, p: float) -> frozenset:
    return p_evaluator(prog, pstate, p).app(ps)


def do_execution(ev: Evaluator, ps) -> Execution:
    """The Do-actions of ``ps`` as one concurrent execution, parameters fixed."""
    instances = []
    for a in sorted((a for a in ps if a.modality == "Do"), key=lambda a: (a.action, str(a.args))):
        defn = ev.prog.action(a.action)
        theta = dict(zip(defn.params, a.action_atom.values()))
        instances.append(ActionInstance(defn, theta))
    return Execution(tuple(instances))


@dataclass(frozen=True)
class StrongCheck:
    baseline: tuple[float, ...]
    after: tuple[float | None, ...]

    @property
    def ok(self) -> bool:
        return all(a is not None and a >= b - 1e-7 for a, b in zip(self.after, self.baseline))


def strong_ic_check(ev: Evaluator, ps) -> StrongCheck:
    """Worst-case constraint mass before and after executing Do(ps)."""
    ics = ev.prog.integrity_constraints
    state = ev.view.state
    baseline = tuple(ic_level(state, ic) for ic in ics)
    execution = do_execution(ev, ps)
    after = []
    for ic, q in zip(ics, baseline):
        (verdict,) = check_ic_p_consistency(state, execution, [ic], q)
        after.append(verdict.minimum)
    return StrongCheck(baseline, tuple(after))


def check_p_feasible(prog: Program, pstate, ps, p: float, mode: str = "weak",
                     closure: str = "classic") -> FeasibilityReport:
    """p-PS1..p-PS3 as in the exact case at level ``p``. For p-PS4 the weak
    mode checks the constraints of the executed state at ``[p, 1]``; the
    strong mode requires that no constraint's worst-case mass decreases."""
    if mode not in MODES:
        raise ValueError(f"mode must be weak or strong, got {mode!r}")
    ev = p_evaluator(prog, pstate, p, closure)
    report = ev.check_feasible(ps)
    if mode == "weak":
        return report
    strong = strong_ic_check(ev, frozenset(ps))
    todo, problems = ev.do_instances(ps)
    ps4 = strong.ok and not problems
    notes = tuple(problems) + tuple(
        f"constraint {i + 1} drops from {b:.3f} to {'n/a' if a is None else f'{a:.3f}'}"
        for i, (b, a) in enumerate(zip(strong.baseline, strong.after)) if a is None or a < b - 1e-7)
    witnesses = dict(report.witnesses)
    witnesses["ps4"] = notes
    return FeasibilityReport(report.ps1_ok, report.ps2_ok, report.ps3_ok, ps4, witnesses)


def compute_p_lfp(prog: Program, pstate, p: float, *, trace: list | None = None, history: list | None = None,
                  closure: str = "classic") -> frozenset | Failure:
    return p_evaluator(prog, pstate, p, closure).lfp(trace, history)


def compute_p_S(prog: Program, pstate, ps, p: float, closure: str = "classic") -> frozenset | Failure:
    return p_evaluator(prog, pstate, p, closure).compute_s(ps)


__all__ = ["MODES", "StrongCheck", "check_p_feasible", "compute_p_S", "compute_p_lfp", "do_execution", "p_app_operator",
           "p_evaluator", "strong_ic_check"]
