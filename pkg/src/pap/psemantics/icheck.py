"""Worst-case probability of an integrity constraint after an action.

The generated linear program ranges over every distribution on the old
compatible states that matches the random variables, pushes it through the
action, and minimizes the mass of new states satisfying the constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..annotations import groundings, holds, holds_ground
from ..kripke import compatible_states, pre_binding
from ..model import EPS, ActionDef, IntegrityConstraint, Obj, render_call, render_condition, render_object
from ..state import DetState, ProbState, conc_execute
from .simplex import LPProblem, LPSolution, solve_lp


@dataclass(frozen=True)
class ActionInstance:
    action: ActionDef
    theta: Mapping[str, Obj] = field(default_factory=dict)
    gamma: Mapping[str, Obj] | None = None


@dataclass(frozen=True)
class Execution:
    """Action instances executed concurrently in every world where their preconditions hold."""

    instances: tuple[ActionInstance, ...] = ()

    @classmethod
    def single(cls, action: ActionDef, theta: Mapping[str, Obj] | None = None,
               gamma: Mapping[str, Obj] | None = None) -> "Execution":
        return cls((ActionInstance(action, dict(theta or {}), gamma),))

    def apply(self, world: DetState) -> DetState:
        todo = []
        for inst in self.instances:
            env = pre_binding(world, inst.action, inst.theta, inst.gamma)
            if env is not None:
                todo.append((inst.action, env))
        return conc_execute(world, todo) if todo else world


def ic_holds(world: DetState, ic: IntegrityConstraint) -> bool:
    """Classical reading inside one world: every grounding of the antecedent
    that holds has a consequent that holds."""
    for env in groundings(world, ic.antecedent, {}):
        if holds_ground(world, ic.antecedent, env) and holds(world, ic.consequent, env) is None:
            return False
    return True


@dataclass
class ICProgram:
    lp: LPProblem
    old_states: list[DetState]
    new_states: list[DetState]
    image: list[int]  # old index -> new index


def _boole_lower(world: DetState, masses: Mapping) -> float:
    objs = list(world.pairs())
    return max(0.0, sum(masses[key] for key in objs) + 1 - len(objs)) if objs else 0.0


def generate_ic_lp(pstate: ProbState, execution: Execution, ic: IntegrityConstraint,
                   ics_all: Sequence[IntegrityConstraint] = (), p: float = 0.0, *,
                   include_ic_rows: bool = True, boole_lower: bool = False, cap: int | None = None) -> ICProgram:
    """Variables ``p_i`` (old compatible states) and ``pp_i`` (distinct images).

    Rows: ``K`` total mass, ``CK`` one per positive-probability object,
    ``IC`` the old distribution meets every constraint at level ``p``,
    ``KtoK`` the image of the old distribution. Upper bounds are the minimum
    object probability of each old state; the Boole lower bound is opt-in.
    """
    old = compatible_states(pstate, cap)
    new: list[DetState] = []
    slot: dict[DetState, int] = {}
    image = []
    for w in old:
        target = execution.apply(w)
        if target not in slot:
            slot[target] = len(new)
            new.append(target)
        image.append(slot[target])
    n_old, n_new = len(old), len(new)
    names = [f"p_{i + 1}" for i in range(n_old)] + [f"pp_{i + 1}" for i in range(n_new)]
    objective = [0.0] * n_old + [1.0 if ic_holds(w, ic) else 0.0 for w in new]
    masses = {(cc, o): q for cc, rvs in pstate.entries.items() for rv in rvs for o, q in rv.items()}
    upper = [min((masses[key] for key in w.pairs()), default=1.0) for w in old] + [None] * n_new
    lower = [_boole_lower(w, masses) if boole_lower else 0.0 for w in old] + [0.0] * n_new
    lp = LPProblem(names, objective, lower=lower, upper=upper)
    lp.add_row("K", [1.0] * n_old + [0.0] * n_new, "=", 1.0)
    for (cc, o), q in masses.items():
        if q <= EPS:
            continue
        coeffs = [1.0 if w.contains(cc, o) else 0.0 for w in old] + [0.0] * n_new
        lp.add_row(f"CK[{render_call(cc, True)}:{render_object(o, True)}]", coeffs, "=", q)
    if include_ic_rows:
        for k, other in enumerate(ics_all, 1):
            coeffs = [1.0 if ic_holds(w, other) else 0.0 for w in old] + [0.0] * n_new
            lp.add_row(f"IC[{k}]", coeffs, ">=", p)
            lp.add_row(f"IC[{k}]", coeffs, "<=", 1.0)
    for j in range(n_new):
        coeffs = [-1.0 if image[i] == j else 0.0 for i in range(n_old)] + [1.0 if t == j else 0.0 for t in range(n_new)]
        lp.add_row(f"KtoK[{j + 1}]", coeffs, "=", 0.0)
    return ICProgram(lp, old, new, image)


@dataclass(frozen=True)
class ICVerdict:
    ic: IntegrityConstraint
    minimum: float | None
    guaranteed: bool
    premise_violated: bool
    status: str
    counterexample: tuple[tuple[DetState, float], ...] = ()

    def describe(self) -> str:
        name = f"{render_condition(self.ic.antecedent)} => {render_condition(self.ic.consequent)}"
        if self.minimum is None:
            return f"{name}: {self.status}"
        head = "guaranteed" if self.guaranteed else "not guaranteed"
        note = " (old state cannot meet the constraints at this level)" if self.premise_violated else ""
        return f"{name}: {head} (min {self.minimum:.3f}){note}"


def check_ic_p_consistency(pstate: ProbState, execution: Execution, ics: Sequence[IntegrityConstraint],
                           p: float, *, boole_lower: bool = False, cap: int | None = None) -> list[ICVerdict]:
    """Guaranteed iff the minimum post-execution mass of the constraint is at least ``p``.

    When no old distribution meets every constraint at ``p`` the premise is
    void; the minimum is then taken without that requirement and flagged.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability level {p} outside [0,1]")
    out = []
    for ic in ics:
        gen = generate_ic_lp(pstate, execution, ic, ics, p, boole_lower=boole_lower, cap=cap)
        sol = solve_lp(gen.lp)
        violated = False
        if sol.status == "infeasible":
            violated = True
            gen = generate_ic_lp(pstate, execution, ic, ics, p, include_ic_rows=False, boole_lower=boole_lower, cap=cap)
            sol = solve_lp(gen.lp)
        out.append(_verdict(ic, gen, sol, p, violated))
    return out


def _verdict(ic, gen: ICProgram, sol: LPSolution, p: float, violated: bool) -> ICVerdict:
    if sol.status != "optimal":
        return ICVerdict(ic, None, False, violated, sol.status)
    minimum = max(0.0, min(1.0, sol.objective))
    n_old = len(gen.old_states)
    dist = tuple((w, sol.x[n_old + j]) for j, w in enumerate(gen.new_states))
    ok = minimum >= p - 1e-7
    return ICVerdict(ic, minimum, ok, violated, "optimal", () if ok else dist)


def ic_level(pstate: ProbState, ic: IntegrityConstraint, *, cap: int | None = None) -> float:
    """Least probability of the constraint over distributions compatible with ``pstate``."""
    gen = generate_ic_lp(pstate, Execution(), ic, (), 0.0, include_ic_rows=False, cap=cap)
    sol = solve_lp(gen.lp)
    if sol.status != "optimal":
        raise RuntimeError(f"compatibility system is {sol.status}")
    return max(0.0, min(1.0, sol.objective))


__all__ = [
    "ActionInstance", "Execution", "ICProgram", "ICVerdict", "check_ic_p_consistency", "generate_ic_lp", "ic_holds",
    "ic_level",
]
