"""Mapping programs over certain states to classical agent programs.

On states whose random variables are all certainty-1 singletons, annotated
conditions can be read as plain conditions; the classical image is evaluated
by the same engine over a :class:`DetState`.
"""

from __future__ import annotations

from ..model import EPS, AnnotatedCondition, ModelError, Program, Rule, render_call, render_rv
from ..state import DetState, ProbState


class NotDegenerate(ModelError):
    """A random variable is not a single object with probability 1."""


def red_reduce_rule(rule: Rule) -> Rule:
    body = tuple(c.condition if isinstance(c, AnnotatedCondition) else c for c in rule.body_prob)
    return Rule(rule.head, body, rule.body_pos, rule.body_neg)


def red_reduce(prog: Program) -> Program:
    """Strip annotations and strategies from every rule body."""
    return Program(tuple(red_reduce_rule(r) for r in prog.rules), prog.actions,
                   prog.action_constraints, prog.integrity_constraints)


def red_reduce_state(state: ProbState) -> DetState:
    table = {}
    for cc, rvs in state.entries.items():
        objs = []
        for rv in rvs:
            if len(rv) != 1 or abs(rv.total() - 1.0) > EPS:
                raise NotDegenerate(f"{render_call(cc, True)} holds {render_rv(rv)}, not a certain singleton")
            objs.append(rv.objects[0])
        table[cc] = objs
    return DetState(table)


def is_degenerate(state: ProbState) -> bool:
    try:
        red_reduce_state(state)
    except NotDegenerate:
        return False
    return True


__all__ = ["NotDegenerate", "is_degenerate", "red_reduce", "red_reduce_rule", "red_reduce_state"]
