"""Table-backed agent states and action effects.

A :class:`ProbState` maps ground code calls to coherent sets of random
variables; a :class:`DetState` maps them to plain object sets. Both are
immutable snapshots and every effect returns a new one.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping, Sequence

from .model import (
    EPS,
    ActionDef,
    CodeCall,
    CodeCallAtom,
    ModelError,
    Obj,
    RandomVariable,
    eval_term,
    object_key,
    render_call,
    render_object,
    render_rv,
    validate_random_variable,
)


class CoherenceError(ModelError):
    """Two random variables of one code-call result share an object."""

    def __init__(self, shared: Obj, call: CodeCall | None = None):
        where = f" in {render_call(call, True)}" if call is not None else ""
        super().__init__(f"incoherent result{where}: object {render_object(shared, True)} occurs in two random variables")
        self.shared = shared


class ConcConflict(ValueError):
    """One action adds a code-call atom that another action deletes."""


def assert_coherent(rvs: Iterable[RandomVariable], call: CodeCall | None = None) -> None:
    seen: set = set()
    for rv in rvs:
        for o in rv.objects:
            if o in seen:
                raise CoherenceError(o, call)
            seen.add(o)


def _check_ground(cc: CodeCall) -> CodeCall:
    if not cc.is_ground():
        raise ModelError(f"state entries need ground code calls, got {render_call(cc)}")
    return cc


class ProbState:
    """Probabilistic agent state: ground code call -> coherent random variables."""

    __slots__ = ("_entries", "_index")

    def __init__(self, entries: Mapping[CodeCall, Iterable[RandomVariable]] | None = None):
        table: dict[CodeCall, tuple[RandomVariable, ...]] = {}
        index: dict[CodeCall, dict[Obj, float]] = {}
        for cc, rvs in (entries or {}).items():
            _check_ground(cc)
            rvs = tuple(rvs)
            for rv in rvs:
                report = validate_random_variable(rv)
                if not report.ok:
                    raise ModelError(f"invalid random variable in {render_call(cc, True)}: {'; '.join(report.violations)}")
            assert_coherent(rvs, cc)
            table[cc] = rvs
            index[cc] = {o: p for rv in rvs for o, p in rv.items()}
        self._entries = table
        self._index = index

    @property
    def entries(self) -> Mapping[CodeCall, tuple[RandomVariable, ...]]:
        return self._entries

    def calls(self) -> Iterator[CodeCall]:
        return iter(self._entries)

    def rvs(self, cc: CodeCall) -> tuple[RandomVariable, ...]:
        return self._entries.get(cc, ())

    def objects(self, cc: CodeCall) -> Iterator[Obj]:
        for rv in self._entries.get(cc, ()):
            yield from rv.objects

    def prob(self, cc: CodeCall, obj: Obj) -> float | None:
        """Probability the unique RV containing ``obj`` assigns it, or None."""
        table = self._index.get(cc)
        return None if table is None else table.get(obj)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProbState):
            return NotImplemented
        return _canon_prob(self) == _canon_prob(other)

    def __hash__(self) -> int:
        return hash(frozenset(_canon_prob(self).items()))

    def __repr__(self) -> str:
        return f"ProbState({len(self._entries)} entries)"


def _canon_prob(state: ProbState) -> dict:
    return {cc: frozenset(rvs) for cc, rvs in state.entries.items() if rvs}


class DetState:
    """Deterministic state: ground code call -> set of objects.

    Empty results are dropped so that structurally equal states compare equal.
    """

    __slots__ = ("_entries", "_frozen")

    def __init__(self, entries: Mapping[CodeCall, Iterable[Obj]] | None = None):
        table: dict[CodeCall, tuple[Obj, ...]] = {}
        for cc, objs in (entries or {}).items():
            _check_ground(cc)
            uniq = tuple(dict.fromkeys(objs))
            if uniq:
                table[cc] = uniq
        self._entries = table
        self._frozen = frozenset((cc, frozenset(objs)) for cc, objs in table.items())

    @property
    def entries(self) -> Mapping[CodeCall, tuple[Obj, ...]]:
        return self._entries

    def objects(self, cc: CodeCall) -> tuple[Obj, ...]:
        return self._entries.get(cc, ())

    def contains(self, cc: CodeCall, obj: Obj) -> bool:
        return obj in self._entries.get(cc, ())

    def pairs(self) -> Iterator[tuple[CodeCall, Obj]]:
        for cc, objs in self._entries.items():
            for o in objs:
                yield cc, o

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DetState):
            return NotImplemented
        return self._frozen == other._frozen

    def __hash__(self) -> int:
        return hash(self._frozen)

    def __repr__(self) -> str:
        return f"DetState({render_det_state(self)})"


def eval_prob_call(state: ProbState, cc: CodeCall) -> tuple[RandomVariable, ...]:
    """Random variables returned by a ground code call (empty when unregistered)."""
    return state.rvs(_check_ground(cc))


# ---------------------------------------------------------------- effects


def ground_effect_atoms(atoms: Sequence[CodeCallAtom], env: Mapping[str, Obj]) -> list[tuple[CodeCall, Obj]]:
    return [(atom.call.ground(env), eval_term(atom.subject, env)) for atom in atoms]


def ground_effects(action: ActionDef, env: Mapping[str, Obj]) -> tuple[list, list]:
    """Ground (call, object) pairs for the add and delete lists."""
    return ground_effect_atoms(action.add, env), ground_effect_atoms(action.delete, env)


def _effects_of(instances: Iterable[tuple[ActionDef, Mapping[str, Obj]]]) -> tuple[list, list]:
    adds: dict = {}  # item -> first action adding it
    dels: dict = {}  # item -> actions deleting it
    for i, (action, env) in enumerate(instances):
        a, d = ground_effects(action, env)
        for item in a:
            adds.setdefault(item, []).append((i, action.name))
        for item in d:
            dels.setdefault(item, []).append((i, action.name))
    for item, adders in adds.items():
        for i, name_i in adders:
            other = next((name_j for j, name_j in dels.get(item, ()) if j != i), None)
            if other is not None:
                cc, o = item
                raise ConcConflict(
                    f"{name_i} adds and {other} deletes in({render_object(o, True)}, {render_call(cc, True)})"
                )
    key = lambda item: (render_call(item[0], True), object_key(item[1]))  # noqa: E731
    return sorted(adds, key=key), sorted(dels, key=key)


def conc_execute(state, instances: Iterable[tuple[ActionDef, Mapping[str, Obj]]]):
    """Execute ground action instances concurrently: all deletes, then all adds.

    Works on both :class:`ProbState` and :class:`DetState`; the result does not
    depend on the order of ``instances``.
    """
    adds, dels = _effects_of(instances)
    if isinstance(state, DetState):
        return _apply_det(state, adds, dels)
    return _apply_prob(state, adds, dels)


def apply_action(state, action: ActionDef, env: Mapping[str, Obj]):
    return conc_execute(state, [(action, env)])


def _apply_prob(state: ProbState, adds, dels) -> ProbState:
    if not adds and not dels:
        return state
    table = {cc: list(rvs) for cc, rvs in state.entries.items()}
    for cc, obj in dels:
        rvs = table.get(cc)
        if not rvs:
            continue
        kept = []
        for rv in rvs:
            if obj in rv:
                rv = rv.without(obj)
                if not len(rv):
                    continue
            kept.append(rv)
        table[cc] = kept
    for cc, obj in adds:
        rvs = table.setdefault(cc, [])
        holder = next((rv for rv in rvs if obj in rv), None)
        if holder is None:
            rvs.append(RandomVariable([(obj, 1.0)]))
        elif len(holder) == 1 and abs(holder.prob(obj) - 1.0) <= EPS:
            continue
        else:
            raise CoherenceError(obj, cc)
    return ProbState(table)


def _apply_det(state: DetState, adds, dels) -> DetState:
    if not adds and not dels:
        return state
    table = {cc: list(objs) for cc, objs in state.entries.items()}
    gone = set(dels)
    for cc in list(table):
        table[cc] = [o for o in table[cc] if (cc, o) not in gone]
    for cc, obj in adds:
        objs = table.setdefault(cc, [])
        if obj not in objs:
            objs.append(obj)
    return DetState(table)


# ---------------------------------------------------------------- rendering


def render_prob_state(state: ProbState) -> str:
    lines = []
    for cc, rvs in state.entries.items():
        lines.append(f"{render_call(cc, True)} = {{{', '.join(render_rv(rv) for rv in rvs)}}}")
    return "\n".join(lines) + ("\n" if lines else "")


def render_det_state(state: DetState) -> str:
    items = [f"{render_call(cc, True)}={render_object(o, True)}" for cc, o in det_pairs_sorted(state)]
    return "{" + ", ".join(items) + "}"


def det_pairs_sorted(state: DetState) -> list[tuple[CodeCall, Obj]]:
    calls = sorted(state.entries, key=lambda cc: render_call(cc, True))
    return [(cc, o) for cc in calls for o in state.entries[cc]]


def state_diff(old, new) -> str:
    """Text report of objects added, removed or re-weighted per code call."""
    def table(s) -> dict:
        if isinstance(s, DetState):
            return {cc: {o: 1.0 for o in objs} for cc, objs in s.entries.items()}
        return {cc: {o: p for rv in rvs for o, p in rv.items()} for cc, rvs in s.entries.items()}

    before, after = table(old), table(new)
    lines = []
    for cc in sorted(set(before) | set(after), key=lambda c: render_call(c, True)):
        b, a = before.get(cc, {}), after.get(cc, {})
        name = render_call(cc, True)
        for o in sorted(set(b) | set(a), key=object_key):
            if o not in a:
                lines.append(f"- {name} {render_object(o, True)} (p={b[o]!r})")
            elif o not in b:
                lines.append(f"+ {name} {render_object(o, True)} (p={a[o]!r})")
            elif abs(a[o] - b[o]) > EPS:
                lines.append(f"~ {name} {render_object(o, True)} {b[o]!r} -> {a[o]!r}")
    return "\n".join(lines)


def prob_state(table: Mapping[CodeCall, Iterable[Mapping[Obj, float]]]) -> ProbState:
    """Shorthand: ``{call: [{obj: p, ...}, ...]}`` -> ProbState."""
    return ProbState({cc: [RandomVariable(rv) for rv in rvs] for cc, rvs in table.items()})


def det_from_pairs(pairs: Iterable[tuple[CodeCall, Obj]]) -> DetState:
    table: dict = {}
    for cc, o in pairs:
        table.setdefault(cc, []).append(o)
    return DetState(table)


__all__ = [
    "CoherenceError", "ConcConflict", "ProbState", "DetState", "assert_coherent", "eval_prob_call",
    "apply_action", "conc_execute", "ground_effects", "render_prob_state", "render_det_state",
    "state_diff", "prob_state", "det_from_pairs",
]
