"""Value types for probabilistic agent programs.

Everything here is immutable. Objects in the universe are plain Python values:
``int``, ``float``, ``str`` or :class:`Record`. Terms wrap objects and add
variables, field access and arithmetic.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

EPS = 1e-9

MODALITIES = ("P", "F", "W", "Do", "O")
STRATEGIES = ("ig", "pc", "nc", "in_")
COMPARISONS = ("=", "!=", "<", ">", "<=", ">=")
ARITH_OPS = ("+", "-", "*", "/")

RESERVED = frozenset({"in", "notin", "not", "true", "rec", "action", "ic", "rv"})
_BARE_LOWER = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
_BARE_ANY = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")
_VAR_NAME = re.compile(r"[A-Z_][A-Za-z0-9_]*\Z")


class ModelError(ValueError):
    """Raised when a value violates a structural invariant."""


class EvaluationError(ValueError):
    """Raised when a term cannot be evaluated (unbound variable, type clash)."""


# ---------------------------------------------------------------- objects


@dataclass(frozen=True)
class Record:
    """A record object with named fields, kept sorted by field name."""

    fields: tuple[tuple[str, object], ...]

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.fields, key=lambda kv: kv[0]))
        names = [k for k, _ in ordered]
        if len(set(names)) != len(names):
            raise ModelError(f"duplicate record field in {names}")
        object.__setattr__(self, "fields", ordered)

    @classmethod
    def of(cls, **values: object) -> "Record":
        return cls(tuple(values.items()))

    def get(self, name: str) -> object:
        for key, value in self.fields:
            if key == name:
                return value
        raise EvaluationError(f"record has no field {name!r}")


Obj = Union[int, float, str, Record]


def check_object(value: object) -> Obj:
    if isinstance(value, bool) or not isinstance(value, (int, float, str, Record)):
        raise ModelError(f"not a valid object: {value!r}")
    if isinstance(value, float) and not math.isfinite(value):
        raise ModelError(f"non-finite number {value!r}")
    return value


def object_key(value: Obj) -> tuple:
    """Total order over objects, used for canonical rendering."""
    if isinstance(value, (int, float)):
        return (0, value, "")
    if isinstance(value, str):
        return (1, 0, value)
    return (2, 0, render_object(value))


def render_object(value: Obj, bare_upper: bool = False) -> str:
    if isinstance(value, bool):
        raise ModelError("booleans are not objects")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        pattern = _BARE_ANY if bare_upper else _BARE_LOWER
        if pattern.match(value) and value not in RESERVED:
            return value
        return json.dumps(value)
    if isinstance(value, Record):
        inner = ", ".join(f"{k}: {render_object(v, bare_upper)}" for k, v in value.fields)
        return "rec{" + inner + "}"
    raise ModelError(f"not a valid object: {value!r}")


# ---------------------------------------------------------------- terms


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self) -> None:
        if not _VAR_NAME.match(self.name):
            raise ModelError(f"bad variable name {self.name!r}")


@dataclass(frozen=True)
class Const:
    value: Obj

    def __post_init__(self) -> None:
        check_object(self.value)


@dataclass(frozen=True)
class FieldAccess:
    base: "Term"
    name: str


@dataclass(frozen=True)
class Arith:
    op: str
    left: "Term"
    right: "Term"

    def __post_init__(self) -> None:
        if self.op not in ARITH_OPS:
            raise ModelError(f"unknown arithmetic operator {self.op!r}")


Term = Union[Var, Const, FieldAccess, Arith]


def term_vars(term: Term) -> Iterator[str]:
    if isinstance(term, Var):
        yield term.name
    elif isinstance(term, FieldAccess):
        yield from term_vars(term.base)
    elif isinstance(term, Arith):
        yield from term_vars(term.left)
        yield from term_vars(term.right)


def eval_term(term: Term, env: Mapping[str, Obj]) -> Obj:
    if isinstance(term, Const):
        return term.value
    if isinstance(term, Var):
        try:
            return env[term.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {term.name}") from None
    if isinstance(term, FieldAccess):
        base = eval_term(term.base, env)
        if not isinstance(base, Record):
            raise EvaluationError(f"field access .{term.name} on non-record {base!r}")
        return base.get(term.name)
    left, right = eval_term(term.left, env), eval_term(term.right, env)
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (left, right)):
        raise EvaluationError(f"arithmetic on non-numbers {left!r} {term.op} {right!r}")
    if term.op == "+":
        return left + right
    if term.op == "-":
        return left - right
    if term.op == "*":
        return left * right
    if right == 0:
        raise EvaluationError("division by zero")
    return left / right


def is_ground_term(term: Term) -> bool:
    return next(term_vars(term), None) is None


_TERM_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def render_term(term: Term, bare_upper: bool = False) -> str:
    if isinstance(term, Const):
        return render_object(term.value, bare_upper)
    if isinstance(term, Var):
        return term.name
    if isinstance(term, FieldAccess):
        return f"{_wrap_term(term.base, 3)}.{term.name}"
    prec = _TERM_PREC[term.op]
    # left-associative: the right child needs parens at equal precedence
    return f"{_wrap_term(term.left, prec)} {term.op} {_wrap_term(term.right, prec + 1)}"


def _wrap_term(term: Term, min_prec: int) -> str:
    text = render_term(term)
    if isinstance(term, Arith) and _TERM_PREC[term.op] < min_prec:
        return f"({text})"
    if isinstance(term, Const) and isinstance(term.value, (int, float)) and term.value < 0 and min_prec > 1:
        return f"({text})"
    return text


# ---------------------------------------------------------------- code calls


@dataclass(frozen=True)
class CodeCall:
    domain: str
    function: str
    args: tuple[Term, ...] = ()

    def __post_init__(self) -> None:
        if not self.domain or not self.function:
            raise ModelError("code call needs a domain and a function name")
        object.__setattr__(self, "args", tuple(self.args))

    def is_ground(self) -> bool:
        return all(is_ground_term(a) for a in self.args)

    def ground(self, env: Mapping[str, Obj]) -> "CodeCall":
        if self.is_ground():
            return self
        return CodeCall(self.domain, self.function, tuple(Const(eval_term(a, env)) for a in self.args))


def call(domain: str, function: str, *args: object) -> CodeCall:
    """Convenience constructor for a ground code call."""
    return CodeCall(domain, function, tuple(a if isinstance(a, (Var, Const, FieldAccess, Arith)) else Const(a) for a in args))


def render_call(cc: CodeCall, bare_upper: bool = False) -> str:
    args = ", ".join(render_term(a, bare_upper) for a in cc.args)
    return f"{cc.domain}.{cc.function}({args})"


@dataclass(frozen=True)
class CodeCallAtom:
    polarity: str  # "in" | "notin"
    subject: Term
    call: CodeCall

    def __post_init__(self) -> None:
        if self.polarity not in ("in", "notin"):
            raise ModelError(f"bad polarity {self.polarity!r}")


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Term
    right: Term

    def __post_init__(self) -> None:
        if self.op not in COMPARISONS:
            raise ModelError(f"unknown comparison {self.op!r}")


Atomic = Union[CodeCallAtom, Comparison]


@dataclass(frozen=True)
class CodeCallCondition:
    """Conjunction of atomic conditions; the empty conjunction means ``true``."""

    conjuncts: tuple[Atomic, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "conjuncts", tuple(self.conjuncts))


TRUE = CodeCallCondition(())


def atomic_vars(atom: Atomic) -> Iterator[str]:
    if isinstance(atom, CodeCallAtom):
        yield from term_vars(atom.subject)
        for a in atom.call.args:
            yield from term_vars(a)
    else:
        yield from term_vars(atom.left)
        yield from term_vars(atom.right)


def condition_vars(cond: CodeCallCondition) -> list[str]:
    seen: dict[str, None] = {}
    for atom in cond.conjuncts:
        for v in atomic_vars(atom):
            seen.setdefault(v)
    return list(seen)


def render_atomic(atom: Atomic, bare_upper: bool = False) -> str:
    if isinstance(atom, CodeCallAtom):
        return f"{atom.polarity}({render_term(atom.subject, bare_upper)}, {render_call(atom.call, bare_upper)})"
    return f"{render_term(atom.left, bare_upper)} {atom.op} {render_term(atom.right, bare_upper)}"


def render_condition(cond: CodeCallCondition) -> str:
    if not cond.conjuncts:
        return "true"
    return " & ".join(render_atomic(a) for a in cond.conjuncts)


# ---------------------------------------------------------------- annotations


ANNOTATION_FUNCTIONS: dict[str, int] = {
    "add": 2, "sub": 2, "mul": 2, "div": 2, "min": 2, "max": 2, "pow": 2,
}
INFIX_FUNCTIONS = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
INFIX_TO_FUNCTION = {v: k for k, v in INFIX_FUNCTIONS.items()}


@dataclass(frozen=True)
class AnnConst:
    value: float

    def __post_init__(self) -> None:
        if isinstance(self.value, bool) or not isinstance(self.value, (int, float)) or not math.isfinite(self.value):
            raise ModelError(f"annotation constant must be a finite number, got {self.value!r}")


@dataclass(frozen=True)
class AnnVar:
    name: str


@dataclass(frozen=True)
class AnnApply:
    function: str
    args: tuple["AnnotationItem", ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))
        arity = ANNOTATION_FUNCTIONS.get(self.function)
        if arity is None:
            raise ModelError(f"unknown annotation function {self.function!r}")
        if arity != len(self.args):
            raise ModelError(f"{self.function} expects {arity} arguments, got {len(self.args)}")


AnnotationItem = Union[AnnConst, AnnVar, AnnApply]


@dataclass(frozen=True)
class Annotation:
    lo: AnnotationItem
    hi: AnnotationItem

    @classmethod
    def of(cls, lo: float, hi: float) -> "Annotation":
        return cls(AnnConst(lo), AnnConst(hi))


_ANN_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "pow": 3}


def annotation_item_vars(item: AnnotationItem) -> Iterator[str]:
    if isinstance(item, AnnVar):
        yield item.name
    elif isinstance(item, AnnApply):
        for a in item.args:
            yield from annotation_item_vars(a)


def render_annotation_item(item: AnnotationItem) -> str:
    if isinstance(item, AnnConst):
        return repr(float(item.value)) if isinstance(item.value, float) else str(item.value)
    if isinstance(item, AnnVar):
        return item.name
    if item.function in INFIX_FUNCTIONS:
        prec = _ANN_PREC[item.function]
        left, right = item.args
        # pow is right-associative, the others left-associative
        lmin, rmin = (prec + 1, prec) if item.function == "pow" else (prec, prec + 1)
        return f"{_wrap_ann(left, lmin)} {INFIX_FUNCTIONS[item.function]} {_wrap_ann(right, rmin)}"
    return f"{item.function}({', '.join(render_annotation_item(a) for a in item.args)})"


def _wrap_ann(item: AnnotationItem, min_prec: int) -> str:
    text = render_annotation_item(item)
    if isinstance(item, AnnApply) and item.function in _ANN_PREC and _ANN_PREC[item.function] < min_prec:
        return f"({text})"
    if isinstance(item, AnnConst) and item.value < 0:
        return f"({text})"
    return text


def render_annotation(ann: Annotation) -> str:
    return f"[{render_annotation_item(ann.lo)}, {render_annotation_item(ann.hi)}]"


@dataclass(frozen=True)
class AnnotatedCondition:
    condition: CodeCallCondition
    annotation: Annotation
    strategy: str = "ig"

    def __post_init__(self) -> None:
        if self.strategy == "in":
            object.__setattr__(self, "strategy", "in_")
        if self.strategy not in STRATEGIES:
            raise ModelError(f"unknown strategy {self.strategy!r}")


def render_annotated(ac: AnnotatedCondition) -> str:
    return f"{render_condition(ac.condition)} : {render_annotation(ac.annotation)} @ {ac.strategy}"


# ---------------------------------------------------------------- status atoms


@dataclass(frozen=True)
class ActionAtom:
    name: str
    args: tuple[Term, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))

    def is_ground(self) -> bool:
        return all(is_ground_term(a) for a in self.args)

    def ground(self, env: Mapping[str, Obj]) -> "ActionAtom":
        if self.is_ground():
            return self
        return ActionAtom(self.name, tuple(Const(eval_term(a, env)) for a in self.args))

    def values(self) -> tuple[Obj, ...]:
        return tuple(eval_term(a, {}) for a in self.args)


@dataclass(frozen=True)
class StatusAtom:
    modality: str
    action: str
    args: tuple[Term, ...] = ()

    def __post_init__(self) -> None:
        if self.modality not in MODALITIES:
            raise ModelError(f"unknown modality {self.modality!r}")
        object.__setattr__(self, "args", tuple(self.args))

    @property
    def action_atom(self) -> ActionAtom:
        return ActionAtom(self.action, self.args)

    def is_ground(self) -> bool:
        return all(is_ground_term(a) for a in self.args)

    def ground(self, env: Mapping[str, Obj]) -> "StatusAtom":
        if self.is_ground():
            return self
        return StatusAtom(self.modality, self.action, tuple(Const(eval_term(a, env)) for a in self.args))

    def with_modality(self, modality: str) -> "StatusAtom":
        return StatusAtom(modality, self.action, self.args)


def status(modality: str, action: str, *args: object) -> StatusAtom:
    """Build a ground status atom from plain Python objects."""
    return StatusAtom(modality, action, tuple(Const(a) for a in args))


def action_atom(name: str, *args: object) -> ActionAtom:
    return ActionAtom(name, tuple(Const(a) for a in args))


def render_action_atom(atom: ActionAtom) -> str:
    return f"{atom.name}({', '.join(render_term(a) for a in atom.args)})"


def render_status_atom(atom: StatusAtom) -> str:
    return f"{atom.modality} {atom.action}({', '.join(render_term(a) for a in atom.args)})"


def status_atom_key(atom: StatusAtom) -> tuple:
    return (atom.action, tuple(object_key(eval_term(a, {})) if is_ground_term(a) else (9, 0, render_term(a)) for a in atom.args),
            MODALITIES.index(atom.modality))


StatusSet = frozenset  # a frozenset of ground StatusAtom values


def render_status_set(ps: Iterable[StatusAtom]) -> str:
    atoms = sorted(ps, key=status_atom_key)
    return "{" + ", ".join(render_status_atom(a) for a in atoms) + "}"


def op_projection(ps: Iterable[StatusAtom], modality: str) -> frozenset[ActionAtom]:
    """Actions that carry ``modality`` in ``ps``."""
    if modality not in MODALITIES:
        raise ModelError(f"unknown modality {modality!r}")
    return frozenset(a.action_atom for a in ps if a.modality == modality)


# ---------------------------------------------------------------- rules etc.


BodyCondition = Union[AnnotatedCondition, CodeCallCondition]


@dataclass(frozen=True)
class Rule:
    head: StatusAtom
    body_prob: tuple[BodyCondition, ...] = ()
    body_pos: tuple[StatusAtom, ...] = ()
    body_neg: tuple[StatusAtom, ...] = ()

    def __post_init__(self) -> None:
        for name in ("body_prob", "body_pos", "body_neg"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def positive(self) -> bool:
        return not self.body_neg


def render_rule(rule: Rule) -> str:
    parts: list[str] = []
    for item in rule.body_prob:
        parts.append(render_annotated(item) if isinstance(item, AnnotatedCondition) else render_condition(item))
    parts.extend(render_status_atom(a) for a in rule.body_pos)
    parts.extend("not " + render_status_atom(a) for a in rule.body_neg)
    head = render_status_atom(rule.head)
    return f"{head} <- {', '.join(parts)}." if parts else f"{head}."


@dataclass(frozen=True)
class ActionDef:
    name: str
    params: tuple[str, ...] = ()
    pre: CodeCallCondition = TRUE
    add: tuple[CodeCallAtom, ...] = ()
    delete: tuple[CodeCallAtom, ...] = ()

    def __post_init__(self) -> None:
        for name in ("params", "add", "delete"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for atom in self.add + self.delete:
            if atom.polarity != "in":
                raise ModelError(f"effects of {self.name} must be in-atoms")
        if len(set(self.params)) != len(self.params):
            raise ModelError(f"repeated parameter in action {self.name}")


def render_action_def(a: ActionDef) -> str:
    params = ", ".join(a.params)
    add = ", ".join(render_atomic(x) for x in a.add)
    dele = ", ".join(render_atomic(x) for x in a.delete)
    return f"action {a.name}({params}) {{ pre: {render_condition(a.pre)}; add: {add}; del: {dele} }}"


@dataclass(frozen=True)
class ActionConstraint:
    blocked: tuple[ActionAtom, ...]
    guard: CodeCallCondition = TRUE

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocked", tuple(self.blocked))
        if not self.blocked:
            raise ModelError("an action constraint needs at least one action")


def render_action_constraint(c: ActionConstraint) -> str:
    blocked = ", ".join(render_action_atom(a) for a in c.blocked)
    return f"{{{blocked}}} <~ {render_condition(c.guard)}."


@dataclass(frozen=True)
class IntegrityConstraint:
    antecedent: CodeCallCondition
    consequent: CodeCallCondition

    def __post_init__(self) -> None:
        if len(self.consequent.conjuncts) != 1:
            raise ModelError("an integrity constraint needs exactly one consequent atom")


def render_integrity_constraint(ic: IntegrityConstraint) -> str:
    return f"ic {render_condition(ic.antecedent)} => {render_condition(ic.consequent)}."


@dataclass(frozen=True)
class Program:
    rules: tuple[Rule, ...] = ()
    actions: Mapping[str, ActionDef] = field(default_factory=dict)
    action_constraints: tuple[ActionConstraint, ...] = ()
    integrity_constraints: tuple[IntegrityConstraint, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "actions", dict(self.actions))
        object.__setattr__(self, "action_constraints", tuple(self.action_constraints))
        object.__setattr__(self, "integrity_constraints", tuple(self.integrity_constraints))

    def __hash__(self) -> int:
        return hash((self.rules, tuple(sorted(self.actions)), self.action_constraints, self.integrity_constraints))

    @property
    def positive(self) -> bool:
        return all(r.positive for r in self.rules)

    def action(self, name: str) -> ActionDef:
        """The declared action, or an effect-free action with a true precondition."""
        found = self.actions.get(name)
        return found if found is not None else ActionDef(name)

    def undeclared_actions(self) -> set[str]:
        names = set()
        for r in self.rules:
            names.add(r.head.action)
            names.update(a.action for a in r.body_pos + r.body_neg)
        return {n for n in names if n not in self.actions}


def render_program(prog: Program) -> str:
    lines = [render_action_def(a) for a in prog.actions.values()]
    lines += [render_rule(r) for r in prog.rules]
    lines += [render_action_constraint(c) for c in prog.action_constraints]
    lines += [render_integrity_constraint(ic) for ic in prog.integrity_constraints]
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------- intervals and random variables


@dataclass(frozen=True)
class ProbInterval:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (-EPS <= self.lo <= self.hi + EPS and self.hi <= 1 + EPS):
            raise ModelError(f"invalid probability interval [{self.lo}, {self.hi}]")

    def contains(self, other: "ProbInterval") -> bool:
        return self.lo <= other.lo + EPS and other.hi <= self.hi + EPS

    def holds(self, value: float) -> bool:
        return self.lo - EPS <= value <= self.hi + EPS


class RandomVariable:
    """A finite object set with a sub-stochastic probability assignment.

    Equality ignores the order of objects.
    """

    __slots__ = ("objects", "probs", "_index")

    def __init__(self, items: Iterable[tuple[Obj, float]] | Mapping[Obj, float]):
        pairs = list(items.items()) if isinstance(items, Mapping) else list(items)
        objects = tuple(check_object(o) for o, _ in pairs)
        probs = tuple(float(p) for _, p in pairs)
        index = dict(zip(objects, probs))
        if len(index) != len(objects):
            raise ModelError("random variable lists an object twice")
        object.__setattr__(self, "objects", objects)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_index", index)

    def __setattr__(self, name, value):
        raise AttributeError("RandomVariable is immutable")

    def prob(self, obj: Obj) -> float | None:
        return self._index.get(obj)

    def __contains__(self, obj: object) -> bool:
        return obj in self._index

    def items(self) -> Iterator[tuple[Obj, float]]:
        return zip(self.objects, self.probs)

    def total(self) -> float:
        return math.fsum(self.probs)

    def without(self, obj: Obj) -> "RandomVariable":
        return RandomVariable([(o, p) for o, p in self.items() if o != obj])

    def __len__(self) -> int:
        return len(self.objects)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RandomVariable) and self._index == other._index

    def __hash__(self) -> int:
        return hash(frozenset(self._index.items()))

    def __repr__(self) -> str:
        return f"RandomVariable({render_rv(self)})"


def render_rv(rv: RandomVariable, bare_upper: bool = True) -> str:
    return "rv{" + ", ".join(f"{render_object(o, bare_upper)}: {p!r}" for o, p in rv.items()) + "}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_random_variable(rv: RandomVariable) -> ValidationReport:
    problems = []
    for o, p in rv.items():
        if not (-EPS <= p <= 1 + EPS) or not math.isfinite(p):
            problems.append(f"probability {p!r} of {render_object(o)} outside [0,1]")
    total = rv.total()
    if total > 1 + EPS:
        problems.append(f"sum {round(total, 12)!r} > 1")
    return ValidationReport(tuple(problems))
