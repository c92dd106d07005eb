"""Distributions over deterministic states compatible with a probabilistic state.

The product construction normalizes every random variable (zero-mass objects
dropped, a "none of the above" choice carrying the missing mass) and gives
each combination of choices the product of their masses.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import product
from typing import Iterator, Mapping, Sequence

from .annotations import holds, holds_ground
from .model import EPS, ActionDef, CodeCall, ModelError, Obj, RandomVariable, object_key, render_call, render_object
from .state import DetState, ProbState, conc_execute, det_pairs_sorted

DEFAULT_PRODUCT_CAP = 10**6


class ProductCapExceeded(ModelError):
    pass


class NotExecutable(ModelError):
    pass


class _NoneOfTheAbove:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "NONE"

    def __reduce__(self):
        return (_NoneOfTheAbove, ())


NONE_OF_THE_ABOVE = _NoneOfTheAbove()


@dataclass(frozen=True)
class NormalizedRV:
    call: CodeCall | None
    objects: tuple
    probs: tuple[float, ...]

    @property
    def has_rest(self) -> bool:
        return bool(self.objects) and self.objects[-1] is NONE_OF_THE_ABOVE

    def mass(self, choice) -> float:
        """Normalized mass of an object, or of picking nothing when ``choice`` is None."""
        key = NONE_OF_THE_ABOVE if choice is None else choice
        for o, p in zip(self.objects, self.probs):
            if o is key or (key is not NONE_OF_THE_ABOVE and o == key):
                return p
        return 0.0

    def choices(self) -> list:
        """``None`` (no object) followed by every positive-mass object."""
        return [None] + [o for o in self.objects if o is not NONE_OF_THE_ABOVE]


def normalize_rv(rv: RandomVariable, call: CodeCall | None = None) -> NormalizedRV:
    kept = [(o, p) for o, p in rv.items() if p > EPS]
    rest = 1.0 - math.fsum(p for _, p in kept)
    if rest > EPS:
        kept.append((NONE_OF_THE_ABOVE, rest))
    return NormalizedRV(call, tuple(o for o, _ in kept), tuple(p for _, p in kept))


def normalized_rvs(pstate: ProbState) -> list[NormalizedRV]:
    return [normalize_rv(rv, cc) for cc, rvs in pstate.entries.items() for rv in rvs]


def product_cap() -> int:
    raw = os.environ.get("PAP_PRODUCT_CAP")
    if raw is None:
        return DEFAULT_PRODUCT_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ModelError(f"PAP_PRODUCT_CAP must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ModelError("PAP_PRODUCT_CAP must be positive")
    return cap


def _choice_grid(rvs: Sequence[NormalizedRV], cap: int | None) -> Iterator[tuple]:
    cap = product_cap() if cap is None else cap
    size = math.prod(len(rv.choices()) for rv in rvs)
    if size > cap:
        raise ProductCapExceeded(f"{size} compatible states exceed the cap of {cap}")
    # itertools.product varies its last factor fastest; reverse so the first RV does
    for combo in product(*[rv.choices() for rv in reversed(rvs)]):
        yield combo[::-1]


def _state_of(rvs: Sequence[NormalizedRV], combo: tuple) -> DetState:
    table: dict = {}
    for rv, choice in zip(rvs, combo):
        if choice is not None:
            table.setdefault(rv.call, []).append(choice)
    return DetState(table)


def compatible_states(pstate: ProbState, cap: int | None = None) -> list[DetState]:
    """Every choice of at most one positive-mass object per random variable.

    The first random variable varies fastest.
    """
    rvs = normalized_rvs(pstate)
    return [_state_of(rvs, combo) for combo in _choice_grid(rvs, cap)]


# ---------------------------------------------------------------- structures


class KripkeStructure:
    """A finite distribution over deterministic states."""

    __slots__ = ("states", "probs")

    def __init__(self, states: Sequence[DetState], probs: Sequence[float]):
        states, probs = tuple(states), tuple(float(p) for p in probs)
        if len(states) != len(probs):
            raise ModelError("states and probabilities differ in length")
        for p in probs:
            if not (-EPS <= p <= 1 + EPS) or not math.isfinite(p):
                raise ModelError(f"state probability {p!r} outside [0,1]")
        total = math.fsum(probs)
        if abs(total - 1.0) > 1e-6:
            raise ModelError(f"state probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "probs", probs)

    def __setattr__(self, name, value):
        raise AttributeError("KripkeStructure is immutable")

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(zip(self.states, self.probs))

    def prob_of(self, state: DetState) -> float:
        return math.fsum(p for s, p in self if s == state)

    def total(self) -> float:
        return math.fsum(self.probs)

    def same_as(self, other: "KripkeStructure", tol: float = 1e-9) -> bool:
        """Equal as distributions, ignoring state order."""
        def masses(k):
            out: dict = {}
            for s, p in k:
                out[s] = out.get(s, 0.0) + p
            return out
        a, b = masses(self), masses(other)
        return all(abs(a.get(s, 0.0) - b.get(s, 0.0)) <= tol for s in set(a) | set(b))

    def __repr__(self) -> str:
        return f"KripkeStructure({len(self.states)} states)"


def product_kripke(pstate: ProbState, cap: int | None = None) -> KripkeStructure:
    rvs = normalized_rvs(pstate)
    states, probs = [], []
    for combo in _choice_grid(rvs, cap):
        states.append(_state_of(rvs, combo))
        probs.append(math.prod(rv.mass(c) for rv, c in zip(rvs, combo)))
    return KripkeStructure(states, probs)


@dataclass(frozen=True)
class CompatibilityReport:
    ok: bool
    residuals: Mapping[tuple, float]  # (call, object) -> observed - expected
    problems: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        return "compatible" if self.ok else "incompatible: " + "; ".join(self.problems)


def check_compatibility(k: KripkeStructure, pstate: ProbState, tol: float = 1e-9) -> CompatibilityReport:
    """Per-object marginals of ``k`` against the random variables of ``pstate``."""
    problems: list[str] = []
    observed: dict = {}
    for state, p in k:
        for cc, objs in state.entries.items():
            for rv in pstate.rvs(cc):
                if sum(o in rv for o in objs) > 1:
                    problems.append(f"a state holds two objects of one random variable of {render_call(cc, True)}")
            for o in objs:
                observed[(cc, o)] = observed.get((cc, o), 0.0) + p
    expected = {(cc, o): q for cc, rvs in pstate.entries.items() for rv in rvs for o, q in rv.items()}
    residuals = {}
    keys = sorted(set(observed) | set(expected), key=lambda key: (render_call(key[0], True), object_key(key[1])))
    for key in keys:
        r = observed.get(key, 0.0) - expected.get(key, 0.0)
        residuals[key] = r
        if abs(r) > tol:
            problems.append(f"residual at {render_object(key[1], True)} in {render_call(key[0], True)}: {r:+.6g}")
    return CompatibilityReport(not problems, residuals, tuple(dict.fromkeys(problems)))


# ---------------------------------------------------------------- perturbation


def _perturbation_block(k: KripkeStructure, pstate: ProbState):
    rvs = normalized_rvs(pstate)
    qualifying = [i for i, rv in enumerate(rvs)
                  if any(0 < p < 1 - EPS and o is not NONE_OF_THE_ABOVE for o, p in zip(rv.objects, rv.probs))]
    if len(qualifying) < 2:
        raise ModelError("perturbation needs two random variables with an object of probability strictly between 0 and 1")
    i, j = qualifying[:2]

    def pair(rv: NormalizedRV):
        x = next(o for o, p in zip(rv.objects, rv.probs) if 0 < p < 1 - EPS and o is not NONE_OF_THE_ABOVE)
        other = next(o for o in rv.objects if o is not x)
        return x, (None if other is NONE_OF_THE_ABOVE else other)

    (x, x2), (y, y2) = pair(rvs[i]), pair(rvs[j])
    base = [rv.choices()[1] if len(rv.choices()) > 1 else None for rv in rvs]

    def cell(a, b) -> DetState:
        combo = list(base)
        combo[i], combo[j] = a, b
        return _state_of(rvs, tuple(combo))

    plus = (cell(x, y), cell(x2, y2))
    minus = (cell(x, y2), cell(x2, y))
    return plus, minus


def perturbation_bound(k: KripkeStructure, pstate: ProbState) -> float:
    """Largest admissible shift for :func:`perturb_kripke`."""
    _, minus = _perturbation_block(k, pstate)
    return min(k.prob_of(s) for s in minus)


def perturb_kripke(k: KripkeStructure, pstate: ProbState, delta: float) -> KripkeStructure:
    """Move ``delta`` mass around a 2x2 block of choices of two random variables.

    Two diagonal cells gain ``delta`` and the two off-diagonal cells lose it, so
    every per-object marginal is unchanged.
    """
    plus, minus = _perturbation_block(k, pstate)
    bound = min(k.prob_of(s) for s in minus)
    if delta < -EPS or delta > bound + EPS:
        raise ModelError(f"shift {delta} outside [0, {bound}]")
    states = list(k.states)
    probs = list(k.probs)
    for target, sign in [(s, 1) for s in plus] + [(s, -1) for s in minus]:
        if target in states:
            idx = states.index(target)
            probs[idx] = max(0.0, probs[idx] + sign * delta)
        else:
            states.append(target)
            probs.append(max(0.0, sign * delta))
    return KripkeStructure(states, probs)


# ---------------------------------------------------------------- execution


def pre_binding(state: DetState, action: ActionDef, theta: Mapping[str, Obj],
                gamma: Mapping[str, Obj] | None = None) -> dict | None:
    """Binding under which the precondition holds in ``state``, or None."""
    env = dict(theta)
    if gamma is not None:
        env.update(gamma)
        try:
            return env if holds_ground(state, action.pre, env) else None
        except ModelError:
            return holds(state, action.pre, env)
    return holds(state, action.pre, env)


def _check_theta(action: ActionDef, theta: Mapping[str, Obj]) -> None:
    missing = [p for p in action.params if p not in theta]
    if missing:
        raise ModelError(f"action {action.name} needs a value for {missing[0]}")


def witnesses(k: KripkeStructure, action: ActionDef, theta: Mapping[str, Obj],
              gamma: Mapping[str, Obj] | None = None) -> list[int]:
    """Indices of positive-mass states in which the precondition holds."""
    _check_theta(action, theta)
    return [i for i, (s, p) in enumerate(k) if p > EPS and pre_binding(s, action, theta, gamma) is not None]


@dataclass(frozen=True)
class Executability:
    possible: bool
    witnesses: tuple[DetState, ...]
    indices: tuple[int, ...]  # 1-based positions among the compatible states

    def __bool__(self) -> bool:
        return self.possible


def possibly_executable(pstate: ProbState, action: ActionDef, theta: Mapping[str, Obj] | None = None,
                        cap: int | None = None) -> Executability:
    """Decided on the product structure, where every compatible state that can
    carry mass in some compatible structure has positive mass."""
    k = product_kripke(pstate, cap)
    idx = witnesses(k, action, theta or {})
    return Executability(bool(idx), tuple(k.states[i] for i in idx), tuple(i + 1 for i in idx))


def executability_probability(k: KripkeStructure, action: ActionDef, theta: Mapping[str, Obj] | None = None,
                              gamma: Mapping[str, Obj] | None = None) -> float:
    idx = witnesses(k, action, theta or {}, gamma)
    if not idx:
        raise NotExecutable(f"no state witnesses the executability of {action.name}")
    return min(k.probs[i] for i in idx)


def map_state(state: DetState, action: ActionDef, theta: Mapping[str, Obj],
              gamma: Mapping[str, Obj] | None = None) -> DetState:
    env = pre_binding(state, action, theta, gamma)
    if env is None:
        return state
    return conc_execute(state, [(action, env)])


def execute_action_kripke(k: KripkeStructure, action: ActionDef, theta: Mapping[str, Obj] | None = None,
                          gamma: Mapping[str, Obj] | None = None, force: bool = False) -> KripkeStructure:
    """Apply the action to every witness state and merge equal results.

    Merged states keep the position of their first occurrence.
    """
    theta = theta or {}
    idx = set(witnesses(k, action, theta, gamma))
    if not idx and not force:
        raise NotExecutable(f"{action.name} is not possibly executable in this structure")
    merged: dict[DetState, float] = {}
    for i, (s, p) in enumerate(k):
        target = map_state(s, action, theta, gamma) if i in idx else s
        merged[target] = merged.get(target, 0.0) + p
    return KripkeStructure(list(merged), list(merged.values()))


# ---------------------------------------------------------------- text form


def dump_kripke(k: KripkeStructure, precision: int = 12) -> str:
    lines = []
    for i, (s, p) in enumerate(k, 1):
        pairs = ", ".join(f"{render_call(cc, True)}={render_object(o, True)}" for cc, o in det_pairs_sorted(s))
        lines.append(f"#{i} p={round(p, precision)!r} {{{pairs}}}")
    return "\n".join(lines) + ("\n" if lines else "")


__all__ = [
    "DEFAULT_PRODUCT_CAP", "NONE_OF_THE_ABOVE", "CompatibilityReport", "Executability", "KripkeStructure",
    "NormalizedRV", "NotExecutable", "ProductCapExceeded", "check_compatibility", "compatible_states", "dump_kripke",
    "execute_action_kripke", "executability_probability", "map_state", "normalize_rv", "normalized_rvs",
    "perturb_kripke", "perturbation_bound", "possibly_executable", "pre_binding", "product_cap", "product_kripke",
    "witnesses",
]
