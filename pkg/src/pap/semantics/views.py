"""Uniform access to a state for the status-set machinery.

The engine never touches a state directly; it asks a view to enumerate
groundings, to decide rule bodies and to check unannotated conditions
(preconditions, guards, integrity constraints). :class:`ProbView` answers at
the entailment level ``[p, 1]``; :class:`ClassicalView` answers with plain
set membership over a deterministic state.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping

from ..annotations import Binding, entails, groundings, holds, holds_ground, satisfies, _satisfies_ground
from ..model import ActionDef, AnnotatedCondition, CodeCallCondition, Obj, ProbInterval
from ..state import DetState, ProbState, conc_execute


class ProbView:
    def __init__(self, state: ProbState, p: float = 1.0, strategy: str = "ig"):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability threshold {p} outside [0,1]")
        self.state = state
        self.p = p
        self.strategy = strategy
        self._level = ProbInterval(p, 1.0)

    def groundings(self, cond: CodeCallCondition, env: Mapping[str, Obj]) -> Iterator[dict]:
        return groundings(self.state, cond, env)

    def body_holds(self, item, env: Mapping[str, Obj]) -> bool:
        if isinstance(item, AnnotatedCondition):
            return satisfies(self.state, item, Binding(env))
        return self.holds_ground(item, env)

    def holds_ground(self, cond: CodeCallCondition, env: Mapping[str, Obj]) -> bool:
        return _satisfies_ground(self.state, cond, self._level, self.strategy, env)

    def holds(self, cond: CodeCallCondition, env: Mapping[str, Obj]) -> dict | None:
        return entails(self.state, cond, env, self.p, self.strategy)

    def execute(self, instances: Iterable[tuple[ActionDef, Mapping[str, Obj]]]) -> "ProbView":
        return ProbView(conc_execute(self.state, instances), self.p, self.strategy)


class ClassicalView:
    def __init__(self, state: DetState):
        self.state = state

    def groundings(self, cond: CodeCallCondition, env: Mapping[str, Obj]) -> Iterator[dict]:
        return groundings(self.state, cond, env)

    def body_holds(self, item, env: Mapping[str, Obj]) -> bool:
        if isinstance(item, AnnotatedCondition):
            raise TypeError("annotated conditions need a probabilistic state; reduce the program first")
        return holds_ground(self.state, item, env)

    def holds_ground(self, cond: CodeCallCondition, env: Mapping[str, Obj]) -> bool:
        return holds_ground(self.state, cond, env)

    def holds(self, cond: CodeCallCondition, env: Mapping[str, Obj]) -> dict | None:
        return holds(self.state, cond, env)

    def execute(self, instances) -> "ClassicalView":
        return ClassicalView(conc_execute(self.state, instances))


def make_view(state, p: float = 1.0, strategy: str = "ig"):
    if isinstance(state, (ProbView, ClassicalView)):
        return state
    if isinstance(state, DetState):
        return ClassicalView(state)
    if isinstance(state, ProbState):
        return ProbView(state, p, strategy)
    raise TypeError(f"expected a ProbState or DetState, got {type(state).__name__}")
