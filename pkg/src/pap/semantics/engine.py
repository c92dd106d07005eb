from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Mapping, Sequence

from ..annotations import substitute_condition
from ..model import (
    ActionAtom,
    AnnApply,
    AnnConst,
    AnnVar,
    Annotation,
    AnnotatedCondition,
    CodeCallCondition,
    Const,
    ModelError,
    Obj,
    Program,
    Rule,
    StatusAtom,
    Var,
    eval_term,
    term_vars,
    render_action_atom,
    render_condition,
    render_status_atom,
    status_atom_key,
)
from ..state import ConcConflict, CoherenceError
from .views import make_view

DEONTIC_IMPLYING_PRE = ("P", "O", "Do")
CLOSURES = ("classic", "extended")


@dataclass(frozen=True)
class Failure:
    """Sentinel result of the fixpoint algorithms."""

    reason: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.reason}: {self.detail}" if self.detail else self.reason


NO_CONSISTENT_SET = "no consistent set exists"
NO_REASONABLE_SET = "no reasonable status set exists"


def is_failure(value: object) -> bool:
    return isinstance(value, Failure)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    witnesses: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class FeasibilityReport:
    ps1_ok: bool
    ps2_ok: bool
    ps3_ok: bool
    ps4_ok: bool
    witnesses: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.ps1_ok and self.ps2_ok and self.ps3_ok and self.ps4_ok


@dataclass(frozen=True)
class TraceEvent:
    iteration: int
    rule: int  # 1-based position in the program
    head: StatusAtom

    def __str__(self) -> str:
        return f"iter={self.iteration} rule={self.rule} head={render_status_atom(self.head)}"


# ---------------------------------------------------------------- closures


def deontic_closure(ps: Iterable[StatusAtom]) -> frozenset[StatusAtom]:
    ps = frozenset(ps)
    return ps | {a.with_modality("P") for a in ps if a.modality == "O"}


def action_closure(ps: Iterable[StatusAtom], variant: str = "classic") -> frozenset[StatusAtom]:
    """Close under O => Do and Do => P; the ``extended`` variant adds Do => O.

    Both variants also contain the deontic closure (O => P follows via Do).
    """
    if variant not in CLOSURES:
        raise ValueError(f"unknown closure variant {variant!r}")
    out = set(ps)
    for a in ps:
        if a.modality == "O":
            out.update((a.with_modality("Do"), a.with_modality("P")))
        elif a.modality == "Do":
            out.add(a.with_modality("P"))
            if variant == "extended":
                out.add(a.with_modality("O"))
    return frozenset(out)


def _clashes(ps, atoms: Iterable[StatusAtom]) -> list[str]:
    found = []
    for a in atoms:
        for m1, m2 in (("O", "W"), ("P", "F")):
            if a.modality in (m1, m2) and a.with_modality(m1) in ps and a.with_modality(m2) in ps:
                found.append(f"{m1}/{m2} clash on {render_action_atom(a.action_atom)}")
    return sorted(set(found))


# ---------------------------------------------------------------- evaluator


def _index(ps: Iterable[StatusAtom]) -> dict:
    idx: dict = {}
    for a in ps:
        idx.setdefault((a.modality, a.action), set()).add(a.args)
    return idx


def _match_atom(atom: StatusAtom, args: tuple, env: dict) -> dict | None:
    if len(args) != len(atom.args):
        return None
    out = env
    for term, value in zip(atom.args, args):
        value = value.value
        if isinstance(term, Var) and term.name not in out:
            if out is env:
                out = dict(env)
            out[term.name] = value
        elif eval_term(term, out) != value:
            return None
    return out


def _substitute_annotation(ann: Annotation, env: Mapping[str, Obj]) -> Annotation:
    def item(x):
        if isinstance(x, AnnVar) and isinstance(env.get(x.name), (int, float)) and not isinstance(env.get(x.name), bool):
            return AnnConst(float(env[x.name]))
        if isinstance(x, AnnApply):
            return AnnApply(x.function, tuple(item(a) for a in x.args))
        return x
    return Annotation(item(ann.lo), item(ann.hi))


def ground_rule(rule: Rule, env: Mapping[str, Obj], drop_negative: bool = False) -> Rule:
    body = []
    for cond in rule.body_prob:
        if isinstance(cond, AnnotatedCondition):
            body.append(AnnotatedCondition(substitute_condition(cond.condition, env),
                                           _substitute_annotation(cond.annotation, env), cond.strategy))
        else:
            body.append(substitute_condition(cond, env))
    return Rule(rule.head.ground(env), tuple(body), tuple(a.ground(env) for a in rule.body_pos),
                () if drop_negative else tuple(a.ground(env) for a in rule.body_neg))


class Evaluator:
    """Status-set semantics of one program over one state.

    Rule-body groundings and precondition checks depend only on the state, so
    they are cached for the lifetime of the evaluator.
    """

    def __init__(self, prog: Program, state, *, p: float = 1.0, strategy: str = "ig", closure: str = "classic"):
        if closure not in CLOSURES:
            raise ValueError(f"unknown closure variant {closure!r}")
        self.prog = prog
        self.view = make_view(state, p, strategy)
        self.closure = closure
        self._gamma: dict[int, list[dict]] = {}
        self._pre: dict[ActionAtom, dict | None] = {}

    # -- building blocks
    def closure_of(self, ps: Iterable[StatusAtom]) -> frozenset[StatusAtom]:
        return action_closure(deontic_closure(ps), self.closure)

    def gamma_bindings(self, idx: int) -> list[dict]:
        """Bindings of rule ``idx`` (0-based) whose annotated conditions all hold."""
        cached = self._gamma.get(idx)
        if cached is not None:
            return cached
        envs: list[dict] = [{}]
        for item in self.prog.rules[idx].body_prob:
            cond = item.condition if isinstance(item, AnnotatedCondition) else item
            envs = [ext for env in envs for ext in self.view.groundings(cond, env) if self.view.body_holds(item, ext)]
        self._gamma[idx] = envs
        return envs

    def match_positive(self, atoms: Sequence[StatusAtom], index: dict, env: dict) -> Iterator[dict]:
        """Extend ``env`` so that every atom of ``atoms`` lies in the indexed status set."""
        if not atoms:
            yield env
            return
        first, rest = atoms[0], atoms[1:]
        known = index.get((first.modality, first.action), ())
        if all(v in env for t in first.args for v in term_vars(t)):
            if first.ground(env).args in known:
                yield from self.match_positive(rest, index, env)
            return
        for args in known:
            ext = _match_atom(first, args, env)
            if ext is not None:
                yield from self.match_positive(rest, index, ext)

    def pre_binding(self, action: ActionAtom) -> dict | None:
        """Witness binding for the precondition of a ground action, or None."""
        if action in self._pre:
            return self._pre[action]
        defn = self.prog.action(action.name)
        if len(defn.params) != len(action.args) and (defn.params or action.name in self.prog.actions):
            raise ModelError(f"action {action.name} expects {len(defn.params)} arguments, got {len(action.args)}")
        env = {name: eval_term(arg, {}) for name, arg in zip(defn.params, action.args)}
        found = self.view.holds(defn.pre, env)
        self._pre[action] = found
        return found

    def pre_holds(self, action: ActionAtom) -> bool:
        return self.pre_binding(action) is not None

    def instances(self, idx: int, index: dict) -> Iterator[dict]:
        rule = self.prog.rules[idx]
        for env in self.gamma_bindings(idx):
            yield from self.match_positive(rule.body_pos, index, env)

    def fires(self, rule: Rule, env: dict, ps: frozenset) -> StatusAtom | None:
        """Head of the ground instance when it passes the App conditions."""
        if any(a.ground(env) in ps for a in rule.body_neg):
            return None
        head = rule.head.ground(env)
        if head.modality in DEONTIC_IMPLYING_PRE and not self.pre_holds(head.action_atom):
            return None
        for a in rule.body_pos:
            if a.modality in DEONTIC_IMPLYING_PRE and not self.pre_holds(a.ground(env).action_atom):
                return None
        return head

    # -- operators
    def app(self, ps: Iterable[StatusAtom]) -> frozenset[StatusAtom]:
        ps = frozenset(ps)
        index = _index(ps)
        out = set()
        for idx, rule in enumerate(self.prog.rules):
            for env in self.instances(idx, index):
                head = self.fires(rule, env, ps)
                if head is not None:
                    out.add(head)
        return frozenset(out)

    def t_operator(self, ps: Iterable[StatusAtom]) -> frozenset[StatusAtom]:
        ps = frozenset(ps)
        return self.app(ps) | self.closure_of(ps)

    def s_operator(self, ps: Iterable[StatusAtom]) -> frozenset[StatusAtom]:
        return self.closure_of(self.app(ps))

    def compute_s(self, ps: Iterable[StatusAtom], iteration: int = 1,
                  trace: list | None = None) -> frozenset[StatusAtom] | Failure:
        """One pass of the rule-by-rule procedure: X starts at ``ps`` and grows
        by the closure of every fired head; any O/W or P/F clash aborts."""
        ps = frozenset(ps)
        index = _index(ps)
        x = set(ps)
        for idx, rule in enumerate(self.prog.rules):
            for env in self.instances(idx, index):
                head = self.fires(rule, env, ps)
                if head is None:
                    continue
                if trace is not None:
                    trace.append(TraceEvent(iteration, idx + 1, head))
                new = self.closure_of({head}) - x
                x |= new
                clashes = _clashes(x, new)
                if clashes:
                    return Failure(NO_CONSISTENT_SET, clashes[0])
        return frozenset(x)

    def iterate(self, trace: list | None = None, history: list | None = None,
                max_iterations: int = 100_000) -> frozenset[StatusAtom] | Failure:
        x: frozenset[StatusAtom] = frozenset()
        for n in range(1, max_iterations + 1):
            y = self.compute_s(x, n, trace)
            if isinstance(y, Failure):
                return y
            if history is not None:
                history.append(y)
            if y == x:
                return x
            x = y
        raise RuntimeError("fixpoint iteration did not converge")

    def lfp(self, trace: list | None = None, history: list | None = None) -> frozenset[StatusAtom] | Failure:
        if not self.prog.positive:
            raise ModelError("the least fixpoint is defined for positive programs only")
        x = self.iterate(trace, history)
        if isinstance(x, Failure):
            return x
        for a in sorted(x, key=status_atom_key):
            if a.modality == "Do" and not self.pre_holds(a.action_atom):
                return Failure(NO_REASONABLE_SET, f"precondition of {render_action_atom(a.action_atom)} fails")
        verdict, _ = self.state_consistent(x)
        if not verdict:
            return Failure(NO_REASONABLE_SET, verdict.witnesses[0] if verdict.witnesses else "")
        verdict = self.action_consistent(x)
        if not verdict:
            return Failure(NO_REASONABLE_SET, verdict.witnesses[0])
        return x

    # -- consistency
    def deontically_consistent(self, ps: Iterable[StatusAtom]) -> Verdict:
        ps = frozenset(ps)
        problems = _clashes(ps, ps)
        for a in sorted(ps, key=status_atom_key):
            if a.modality == "P" and not self.pre_holds(a.action_atom):
                problems.append(f"P {render_action_atom(a.action_atom)} but its precondition fails")
        return Verdict(not problems, tuple(problems))

    def action_consistent(self, ps: Iterable[StatusAtom]) -> Verdict:
        ps = frozenset(ps)
        done = _index(a for a in ps if a.modality == "Do")
        problems = []
        for ac in self.prog.action_constraints:
            pattern = tuple(StatusAtom("Do", b.name, b.args) for b in ac.blocked)
            for env in self.view.groundings(ac.guard, {}):
                if not self.view.holds_ground(ac.guard, env):
                    continue
                for ext in self.match_positive(pattern, done, env):
                    names = ", ".join(render_action_atom(b.ground(ext)) for b in ac.blocked)
                    problems.append(f"constraint blocks doing {{{names}}} together")
        return Verdict(not problems, tuple(dict.fromkeys(problems)))

    def do_instances(self, ps: Iterable[StatusAtom]) -> tuple[list, list[str]]:
        """(action, binding) pairs to execute for Do(ps), plus failures."""
        todo, problems = [], []
        for a in sorted((a for a in ps if a.modality == "Do"), key=status_atom_key):
            env = self.pre_binding(a.action_atom)
            if env is None:
                problems.append(f"cannot execute {render_action_atom(a.action_atom)}: precondition fails")
                continue
            todo.append((self.prog.action(a.action), env))
        return todo, problems

    def ic_violations(self, view) -> list[str]:
        problems = []
        for ic in self.prog.integrity_constraints:
            for env in view.groundings(ic.antecedent, {}):
                if view.holds_ground(ic.antecedent, env) and view.holds(ic.consequent, env) is None:
                    problems.append(f"integrity constraint violated: {render_condition(ic.antecedent)} => "
                                    f"{render_condition(ic.consequent)} with {_show_env(env)}")
                    break
        return problems

    def state_consistent(self, ps: Iterable[StatusAtom]):
        """(verdict, view after concurrently executing Do(ps))."""
        todo, problems = self.do_instances(ps)
        if problems:
            return Verdict(False, tuple(problems)), None
        try:
            after = self.view.execute(todo)
        except (ConcConflict, CoherenceError) as exc:
            return Verdict(False, (str(exc),)), None
        problems = self.ic_violations(after)
        return Verdict(not problems, tuple(problems)), after

    def check_feasible(self, ps: Iterable[StatusAtom]) -> FeasibilityReport:
        ps = frozenset(ps)
        missing = self.app(ps) - ps
        ps1 = not missing
        deon = self.deontically_consistent(ps)
        act = self.action_consistent(ps)
        closed = self.closure_of(ps)
        ps3 = closed == ps
        ps4, _ = self.state_consistent(ps)
        witnesses = {
            "ps1": tuple(f"rule head {render_status_atom(a)} not in set" for a in sorted(missing, key=status_atom_key)),
            "ps2": deon.witnesses + act.witnesses,
            "ps3": tuple(f"closure requires {render_status_atom(a)}" for a in sorted(closed - ps, key=status_atom_key)),
            "ps4": ps4.witnesses,
        }
        return FeasibilityReport(ps1, deon.ok and act.ok, ps3, ps4.ok, witnesses)

    def satisfies_ps123(self, ps: frozenset[StatusAtom]) -> bool:
        return (self.app(ps) <= ps and self.closure_of(ps) == ps
                and self.deontically_consistent(ps).ok and self.action_consistent(ps).ok)

    def grounded(self, ps: Iterable[StatusAtom], bound: int = 20) -> bool | None:
        """No proper subset satisfies PS1-PS3; None when ``ps`` exceeds ``bound`` atoms."""
        atoms = sorted(ps, key=status_atom_key)
        if len(atoms) > bound:
            return None
        for size in range(len(atoms)):
            for subset in combinations(atoms, size):
                if self.satisfies_ps123(frozenset(subset)):
                    return False
        return True

    # -- reduct and reasonableness
    def reduct(self, ps: Iterable[StatusAtom], prune: bool = True) -> Program:
        """Ground instances not blocked by ``ps``, with negative literals removed.

        With ``prune`` only instances whose positive status literals lie in
        ``ps`` are kept; the others can never fire below ``ps``, so the least
        fixpoint and the feasibility of ``ps`` are unchanged.
        """
        ps = frozenset(ps)
        index = _index(ps)
        rules = []
        for idx, rule in enumerate(self.prog.rules):
            for env in self.instances(idx, index):
                if any(a.ground(env) in ps for a in rule.body_neg):
                    continue
                ground = ground_rule(rule, env, drop_negative=True)
                if prune and not set(ground.body_pos) <= ps:
                    continue
                if ground not in rules:
                    rules.append(ground)
        return Program(tuple(rules), self.prog.actions, self.prog.action_constraints, self.prog.integrity_constraints)

    def derive(self, prog: Program) -> "Evaluator":
        ev = Evaluator(prog, self.view, closure=self.closure)
        ev._pre = self._pre if prog.actions == self.prog.actions else {}
        return ev

    def reasonable(self, ps: Iterable[StatusAtom]) -> bool:
        ps = frozenset(ps)
        red = self.derive(self.reduct(ps))
        fixed = red.lfp()
        return not isinstance(fixed, Failure) and fixed == ps and red.check_feasible(ps).feasible


def _show_env(env: Mapping[str, Obj]) -> str:
    from ..model import render_object
    return ", ".join(f"{k}={render_object(v)}" for k, v in env.items()) or "no bindings"


# ---------------------------------------------------------------- functional API


def _ev(prog, state, p=1.0, strategy="ig", closure="classic") -> Evaluator:
    return Evaluator(prog, state, p=p, strategy=strategy, closure=closure)


def app_operator(prog: Program, state, ps, *, p: float = 1.0, strategy: str = "ig") -> frozenset[StatusAtom]:
    return _ev(prog, state, p, strategy).app(ps)


def t_operator(prog: Program, state, ps, *, closure: str = "classic") -> frozenset[StatusAtom]:
    return _ev(prog, state, closure=closure).t_operator(ps)


def s_operator(prog: Program, state, ps, *, closure: str = "classic") -> frozenset[StatusAtom]:
    return _ev(prog, state, closure=closure).s_operator(ps)


def deontically_consistent(ps, state, prog: Program = Program(), *, p: float = 1.0) -> Verdict:
    return _ev(prog, state, p).deontically_consistent(ps)


def action_consistent(ps, state, acs: Sequence | None = None, prog: Program | None = None, *,
                      p: float = 1.0) -> Verdict:
    """``acs=None`` uses the constraints of ``prog``."""
    base = prog or Program()
    acs = base.action_constraints if acs is None else tuple(acs)
    prog = Program(base.rules, base.actions, acs, base.integrity_constraints)
    return _ev(prog, state, p).action_consistent(ps)


def state_consistent(ps, state, prog: Program, *, p: float = 1.0):
    """(verdict, resulting state or None)."""
    verdict, after = _ev(prog, state, p).state_consistent(ps)
    return verdict, None if after is None else after.state


def check_feasible(prog: Program, state, ps, *, closure: str = "classic") -> FeasibilityReport:
    return _ev(prog, state, closure=closure).check_feasible(ps)


def check_rational(prog: Program, state, ps, *, bound: int = 20, closure: str = "classic") -> bool | None:
    ev = _ev(prog, state, closure=closure)
    if not ev.check_feasible(ps).feasible:
        return False
    return ev.grounded(ps, bound)


def compute_S(prog: Program, state, ps=frozenset(), *, trace: list | None = None,
              closure: str = "classic") -> frozenset[StatusAtom] | Failure:
    if not prog.positive:
        raise ModelError("compute_S expects a positive program")
    return _ev(prog, state, closure=closure).compute_s(ps, 1, trace)


def compute_lfp(prog: Program, state, *, trace: list | None = None, history: list | None = None,
                closure: str = "classic") -> frozenset[StatusAtom] | Failure:
    return _ev(prog, state, closure=closure).lfp(trace, history)


def reduct(prog: Program, ps, state, *, prune: bool = True) -> Program:
    return _ev(prog, state).reduct(ps, prune)


def check_reasonable(prog: Program, state, ps, *, closure: str = "classic") -> bool:
    return _ev(prog, state, closure=closure).reasonable(ps)


def as_values(atom: StatusAtom) -> tuple:
    return (atom.modality, atom.action, tuple(eval_term(a, {}) for a in atom.args))


__all__ = [
    "Evaluator", "Failure", "FeasibilityReport", "TraceEvent", "Verdict", "NO_CONSISTENT_SET", "NO_REASONABLE_SET",
    "action_closure", "action_consistent", "app_operator", "check_feasible", "check_rational", "check_reasonable",
    "compute_S", "compute_lfp", "deontic_closure", "deontically_consistent", "ground_rule", "is_failure", "reduct",
    "s_operator", "state_consistent", "t_operator",
]
