"""Conjunction strategies, annotation evaluation, grounding and satisfaction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .model import (
    EPS,
    AnnApply,
    AnnConst,
    AnnVar,
    Annotation,
    AnnotatedCondition,
    AnnotationItem,
    Arith,
    CodeCallAtom,
    CodeCallCondition,
    Comparison,
    Const,
    EvaluationError,
    FieldAccess,
    ModelError,
    Obj,
    ProbInterval,
    Term,
    Var,
    eval_term,
    render_atomic,
    term_vars,
)
from .state import DetState, ProbState

STRATEGY_IDS = ("ig", "pc", "nc", "in_")


class UnsafeConditionError(ModelError):
    """A variable is used before anything binds it."""


# ---------------------------------------------------------------- strategies


def _clamp(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def _strategy(strategy: str) -> str:
    if strategy == "in":
        return "in_"
    if strategy not in STRATEGY_IDS:
        raise ModelError(f"unknown strategy {strategy!r}")
    return strategy


def combine(strategy: str, a: ProbInterval, b: ProbInterval) -> ProbInterval:
    """Probability range of a conjunction of two events under ``strategy``."""
    s = _strategy(strategy)
    if s == "ig":
        lo, hi = max(0.0, a.lo + b.lo - 1.0), min(a.hi, b.hi)
    elif s == "pc":
        lo, hi = min(a.lo, b.lo), min(a.hi, b.hi)
    elif s == "nc":
        lo, hi = max(0.0, a.lo + b.lo - 1.0), max(0.0, a.hi + b.hi - 1.0)
    else:
        lo, hi = a.lo * b.lo, a.hi * b.hi
    return ProbInterval(_clamp(lo), _clamp(hi))


def combine_arrays(strategy: str, l1, u1, l2, u2) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`combine` over numpy arrays of bounds."""
    s = _strategy(strategy)
    if s == "ig":
        lo, hi = np.maximum(0.0, l1 + l2 - 1.0), np.minimum(u1, u2)
    elif s == "pc":
        lo, hi = np.minimum(l1, l2), np.minimum(u1, u2)
    elif s == "nc":
        lo, hi = np.maximum(0.0, l1 + l2 - 1.0), np.maximum(0.0, u1 + u2 - 1.0)
    else:
        lo, hi = l1 * l2, u1 * u2
    return np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0)


AXIOMS = ("bottomline", "ignorance", "identity", "annihilator", "commutativity", "associativity", "monotonicity")


@dataclass
class AxiomReport:
    strategy: str
    checked: dict[str, int] = field(default_factory=dict)
    violations: dict[str, int] = field(default_factory=dict)
    examples: dict[str, tuple] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def holds(self, axiom: str) -> bool:
        return self.violations.get(axiom, 0) == 0


def check_strategy_axioms(strategy: str, intervals: Sequence[ProbInterval], tol: float = EPS) -> AxiomReport:
    """Check the seven strategy axioms over all pairs/triples drawn from ``intervals``."""
    report = AxiomReport(_strategy(strategy))
    L = np.array([iv.lo for iv in intervals], dtype=float)
    U = np.array([iv.hi for iv in intervals], dtype=float)
    n = len(L)

    def record(axiom: str, bad: np.ndarray, describe) -> None:
        report.checked[axiom] = report.checked.get(axiom, 0) + int(bad.size)
        count = int(np.count_nonzero(bad))
        report.violations[axiom] = report.violations.get(axiom, 0) + count
        if count and axiom not in report.examples:
            report.examples[axiom] = describe(np.argwhere(bad)[0])

    comb = lambda *args: combine_arrays(strategy, *args)  # noqa: E731
    iv = lambda i: (float(L[i]), float(U[i]))  # noqa: E731

    # unary axioms
    lo, hi = comb(L, U, np.ones(n), np.ones(n))
    record("identity", (np.abs(lo - L) > tol) | (np.abs(hi - U) > tol), lambda ix: (iv(ix[0]),))
    lo, hi = comb(L, U, np.zeros(n), np.zeros(n))
    record("annihilator", (np.abs(lo) > tol) | (np.abs(hi) > tol), lambda ix: (iv(ix[0]),))

    # pairwise axioms
    l1, l2 = np.meshgrid(L, L, indexing="ij")
    u1, u2 = np.meshgrid(U, U, indexing="ij")
    lo, hi = comb(l1, u1, l2, u2)
    pair = lambda ix: (iv(ix[0]), iv(ix[1]))  # noqa: E731
    record("bottomline", (lo > np.minimum(l1, l2) + tol) | (hi > np.minimum(u1, u2) + tol), pair)
    ig_lo, ig_hi = np.maximum(0.0, l1 + l2 - 1.0), np.minimum(u1, u2)
    record("ignorance", (lo < ig_lo - tol) | (hi > ig_hi + tol) | (lo > hi + tol), pair)
    rlo, rhi = comb(l2, u2, l1, u1)
    record("commutativity", (np.abs(lo - rlo) > tol) | (np.abs(hi - rhi) > tol), pair)

    # triple axioms, chunked over the first interval
    le = (l1 <= l2 + tol) & (u1 <= u2 + tol)  # le[j, k]: intervals[j] <= intervals[k]
    for i in range(n):
        a_l, a_u = np.full((n, n), L[i]), np.full((n, n), U[i])
        left = comb(*comb(a_l, a_u, l1, u1), l2, u2)
        right = comb(a_l, a_u, *comb(l1, u1, l2, u2))
        bad = (np.abs(left[0] - right[0]) > tol) | (np.abs(left[1] - right[1]) > tol)
        record("associativity", bad, lambda ix, i=i: (iv(i), iv(ix[0]), iv(ix[1])))
        with_j = comb(a_l, a_u, l1, u1)
        with_k = comb(a_l, a_u, l2, u2)
        worse = (with_j[0] > with_k[0] + tol) | (with_j[1] > with_k[1] + tol)
        record("monotonicity", worse[le] if le.any() else np.zeros(0, bool),
               lambda ix, i=i: (iv(i),))
    return report


def lattice_intervals(step: float) -> list[ProbInterval]:
    """All intervals [lo, hi] with endpoints on a ``step`` grid over [0, 1]."""
    count = int(round(1.0 / step))
    points = [round(i * step, 12) for i in range(count + 1)]
    return [ProbInterval(a, b) for i, a in enumerate(points) for b in points[i:]]


# ---------------------------------------------------------------- bindings and annotations


@dataclass(frozen=True)
class Binding:
    """Ground substitution for object variables and annotation variables."""

    objects: Mapping[str, Obj] = field(default_factory=dict)
    annotations: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, value in self.annotations.items():
            if not (-EPS <= value <= 1 + EPS):
                raise ModelError(f"annotation variable {name}={value} outside [0,1]")

    def bind(self, name: str, value: Obj) -> "Binding":
        return Binding({**self.objects, name: value}, self.annotations)


def _as_binding(b: Binding | Mapping[str, Obj] | None) -> Binding:
    if b is None:
        return Binding()
    if isinstance(b, Binding):
        return b
    return Binding(dict(b))


def _eval_item(item: AnnotationItem, b: Binding) -> float:
    if isinstance(item, AnnConst):
        return float(item.value)
    if isinstance(item, AnnVar):
        if item.name in b.annotations:
            return float(b.annotations[item.name])
        value = b.objects.get(item.name)
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise EvaluationError(f"unbound annotation variable {item.name}")
    x, y = (_eval_item(a, b) for a in item.args)
    fn = item.function
    if fn == "add":
        r = x + y
    elif fn == "sub":
        r = x - y
    elif fn == "mul":
        r = x * y
    elif fn == "div":
        if y == 0:
            raise EvaluationError("division by zero in annotation")
        r = x / y
    elif fn == "min":
        r = min(x, y)
    elif fn == "max":
        r = max(x, y)
    else:
        try:
            r = math.pow(x, y)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvaluationError(f"pow({x}, {y}) undefined") from exc
    return _clamp(r)


def eval_annotation(a: Annotation, b: Binding | Mapping | None = None) -> ProbInterval:
    b = _as_binding(b)
    lo, hi = _clamp(_eval_item(a.lo, b)), _clamp(_eval_item(a.hi, b))
    if lo > hi + EPS:
        raise EvaluationError(f"annotation evaluates to inverted interval [{lo}, {hi}]")
    return ProbInterval(lo, min(max(hi, lo), 1.0))


# ---------------------------------------------------------------- deterministic atoms


def _is_number(x: object) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def compare(op: str, left: Obj, right: Obj) -> bool:
    if _is_number(left) and _is_number(right):
        close = abs(left - right) <= EPS
        if op == "=":
            return close
        if op == "!=":
            return not close
        if op == "<":
            return left < right and not close
        if op == ">":
            return left > right and not close
        if op == "<=":
            return left < right or close
        return left > right or close
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    if isinstance(left, str) and isinstance(right, str):
        return {"<": left < right, ">": left > right, "<=": left <= right, ">=": left >= right}[op]
    raise EvaluationError(f"cannot order {left!r} and {right!r}")


# ---------------------------------------------------------------- grounding


def _unbound(term: Term, env: Mapping[str, Obj]) -> list[str]:
    return [v for v in term_vars(term) if v not in env]


def groundings(source, cond: CodeCallCondition, env: Mapping[str, Obj]) -> Iterator[dict]:
    """Left-to-right enumeration of bindings for the variables of ``cond``.

    An ``in`` atom whose subject is an unbound variable binds it to each object
    of the call's result in insertion order; every other position must already
    be bound. ``source`` is a :class:`ProbState` or :class:`DetState`.
    """
    atoms = cond.conjuncts

    def walk(i: int, env: dict) -> Iterator[dict]:
        if i == len(atoms):
            yield env
            return
        atom = atoms[i]
        if isinstance(atom, CodeCallAtom):
            for arg in atom.call.args:
                missing = _unbound(arg, env)
                if missing:
                    raise UnsafeConditionError(f"variable {missing[0]} unbound in call of {render_atomic(atom)}")
            subject = atom.subject
            if isinstance(subject, Var) and subject.name not in env:
                if atom.polarity != "in":
                    raise UnsafeConditionError(f"variable {subject.name} unbound in {render_atomic(atom)}")
                cc = atom.call.ground(env)
                for obj in list(source.objects(cc)):
                    yield from walk(i + 1, {**env, subject.name: obj})
                return
            missing = _unbound(subject, env)
            if missing:
                raise UnsafeConditionError(f"variable {missing[0]} unbound in {render_atomic(atom)}")
        else:
            missing = _unbound(atom.left, env) + _unbound(atom.right, env)
            if missing:
                raise UnsafeConditionError(f"variable {missing[0]} unbound in {render_atomic(atom)}")
        yield from walk(i + 1, env)

    return walk(0, dict(env))


def substitute_condition(cond: CodeCallCondition, env: Mapping[str, Obj]) -> CodeCallCondition:
    def term(t: Term) -> Term:
        if isinstance(t, Var) and t.name in env:
            return Const(env[t.name])
        if isinstance(t, FieldAccess):
            return FieldAccess(term(t.base), t.name)
        if isinstance(t, Arith):
            return Arith(t.op, term(t.left), term(t.right))
        return t

    out = []
    for atom in cond.conjuncts:
        if isinstance(atom, CodeCallAtom):
            cc = atom.call
            out.append(CodeCallAtom(atom.polarity, term(atom.subject), type(cc)(cc.domain, cc.function, tuple(term(a) for a in cc.args))))
        else:
            out.append(Comparison(atom.op, term(atom.left), term(atom.right)))
    return CodeCallCondition(tuple(out))


def ground_condition(state, cond: CodeCallCondition, b: Binding | Mapping | None = None) -> Iterator[tuple[Binding, CodeCallCondition]]:
    """Stream of (binding, ground condition) pairs in deterministic order."""
    base = _as_binding(b)
    for env in groundings(state, cond, base.objects):
        yield Binding(env, base.annotations), substitute_condition(cond, env)


def check_safety(cond: CodeCallCondition, bound: Iterable[str]) -> set[str]:
    """Static version of the grounding rule; returns the variables bound afterwards."""
    env = set(bound)
    for atom in cond.conjuncts:
        if isinstance(atom, CodeCallAtom):
            for arg in atom.call.args:
                for v in term_vars(arg):
                    if v not in env:
                        raise UnsafeConditionError(f"variable {v} unbound in call of {render_atomic(atom)}")
            if isinstance(atom.subject, Var) and atom.subject.name not in env and atom.polarity == "in":
                env.add(atom.subject.name)
                continue
            names = list(term_vars(atom.subject))
        else:
            names = list(term_vars(atom.left)) + list(term_vars(atom.right))
        for v in names:
            if v not in env:
                raise UnsafeConditionError(f"variable {v} unbound in {render_atomic(atom)}")
    return env


# ---------------------------------------------------------------- satisfaction


def _atom_prob(state: ProbState, atom: CodeCallAtom, env: Mapping[str, Obj]) -> float | None:
    return state.prob(atom.call.ground(env), eval_term(atom.subject, env))


def _atom_interval(state: ProbState, atom, env, query: ProbInterval) -> ProbInterval | None:
    if isinstance(atom, Comparison):
        return ProbInterval(1.0, 1.0) if compare(atom.op, eval_term(atom.left, env), eval_term(atom.right, env)) else None
    p = _atom_prob(state, atom, env)
    if atom.polarity == "in":
        return None if p is None else ProbInterval(p, p)
    # a notin-atom is certain when it holds at the query annotation
    return ProbInterval(1.0, 1.0) if (p is None or not query.holds(p)) else None


def tightest_interval(state: ProbState, cond: CodeCallCondition, strategy: str,
                      b: Binding | Mapping | None = None,
                      query: ProbInterval | None = None) -> ProbInterval | None:
    """Left fold of the strategy over conjunct tightest intervals; None means unsatisfied."""
    env = _as_binding(b).objects
    query = query or ProbInterval(0.0, 1.0)
    result = ProbInterval(1.0, 1.0)
    for i, atom in enumerate(cond.conjuncts):
        iv = _atom_interval(state, atom, env, query)
        if iv is None:
            return None
        result = iv if i == 0 else combine(strategy, result, iv)
    return result


def _satisfies_ground(state: ProbState, cond: CodeCallCondition, interval: ProbInterval,
                      strategy: str, env: Mapping[str, Obj]) -> bool:
    atoms = cond.conjuncts
    if not atoms:
        return True
    if len(atoms) == 1:
        atom = atoms[0]
        if isinstance(atom, Comparison):
            return compare(atom.op, eval_term(atom.left, env), eval_term(atom.right, env))
        p = _atom_prob(state, atom, env)
        inside = p is not None and interval.holds(p)
        return inside if atom.polarity == "in" else not inside
    result = None
    for atom in atoms:
        iv = _atom_interval(state, atom, env, interval)
        if iv is None:
            return False
        result = iv if result is None else combine(strategy, result, iv)
    return interval.contains(result)


def _is_ground_under(cond: CodeCallCondition, env: Mapping[str, Obj]) -> bool:
    for atom in cond.conjuncts:
        terms = (atom.subject, *atom.call.args) if isinstance(atom, CodeCallAtom) else (atom.left, atom.right)
        if any(_unbound(t, env) for t in terms):
            return False
    return True


def satisfies(state: ProbState, ac: AnnotatedCondition, b: Binding | Mapping | None = None) -> bool:
    """Satisfaction of an annotated condition; non-ground conditions need every instance."""
    b = _as_binding(b)
    if _is_ground_under(ac.condition, b.objects):
        return _satisfies_ground(state, ac.condition, eval_annotation(ac.annotation, b), ac.strategy, b.objects)
    for env in groundings(state, ac.condition, b.objects):
        ext = Binding(env, b.annotations)
        if not _satisfies_ground(state, ac.condition, eval_annotation(ac.annotation, ext), ac.strategy, env):
            return False
    return True


def entails(state: ProbState, cond: CodeCallCondition, env: Mapping[str, Obj],
            p: float = 1.0, strategy: str = "ig") -> dict | None:
    """First extension of ``env`` under which ``cond`` holds at [p, 1], else None."""
    interval = ProbInterval(p, 1.0)
    for ext in groundings(state, cond, env):
        if _satisfies_ground(state, cond, interval, strategy, ext):
            return ext
    return None


# ---------------------------------------------------------------- classical truth


def holds_ground(det: DetState, cond: CodeCallCondition, env: Mapping[str, Obj]) -> bool:
    for atom in cond.conjuncts:
        if isinstance(atom, Comparison):
            if not compare(atom.op, eval_term(atom.left, env), eval_term(atom.right, env)):
                return False
            continue
        present = det.contains(atom.call.ground(env), eval_term(atom.subject, env))
        if present != (atom.polarity == "in"):
            return False
    return True


def holds(det: DetState, cond: CodeCallCondition, env: Mapping[str, Obj] | None = None) -> dict | None:
    """First extension of ``env`` making ``cond`` classically true in ``det``, else None."""
    for ext in groundings(det, cond, env or {}):
        if holds_ground(det, cond, ext):
            return ext
    return None
