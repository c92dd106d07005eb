"""Exhaustive classification of status sets for small programs.

Candidates are built per ground action from the 5-bit modality patterns that
are closed and clash free, since every feasible set has that shape. PS1 and
PS2 are then decided for all candidates at once on integer bitmasks; PS4,
groundedness and reasonableness are checked on the survivors.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ..model import MODALITIES, ActionAtom, Program, StatusAtom, render_status_set, status_atom_key
from .engine import Evaluator, _index, action_closure

_BIT = {m: i for i, m in enumerate(MODALITIES)}


class BoundExceeded(ValueError):
    pass


@dataclass(frozen=True)
class Catalog:
    universe: tuple[ActionAtom, ...]
    feasible: tuple[frozenset, ...]
    rational: tuple[frozenset, ...]
    reasonable: tuple[frozenset, ...]
    candidates: int

    def describe(self) -> str:
        lines = []
        for name in ("feasible", "rational", "reasonable"):
            sets = getattr(self, name)
            lines.append(f"{name}: {len(sets)}")
            lines += [f"  {render_status_set(s)}" for s in sets]
        return "\n".join(lines)


def _pattern_atoms(action: ActionAtom, pattern: int) -> list[StatusAtom]:
    return [StatusAtom(m, action.name, action.args) for m in MODALITIES if pattern >> _BIT[m] & 1]


def _pattern_of(atoms) -> int:
    return sum(1 << _BIT[a.modality] for a in atoms)


def closed_patterns(closure: str = "classic") -> list[int]:
    """5-bit modality patterns equal to their own closure and free of O/W and P/F clashes."""
    probe = ActionAtom("a")
    out = []
    for pattern in range(32):
        atoms = _pattern_atoms(probe, pattern)
        if _pattern_of(action_closure(atoms, closure)) != pattern:
            continue
        if (pattern >> _BIT["O"] & 1 and pattern >> _BIT["W"] & 1) or (pattern >> _BIT["P"] & 1 and pattern >> _BIT["F"] & 1):
            continue
        out.append(pattern)
    return out


def action_universe(ev: Evaluator, limit: int = 64) -> tuple[ActionAtom, ...]:
    """Ground actions reachable by rule instances when every status atom over
    the universe so far is assumed present."""
    found: set[ActionAtom] = set()
    while True:
        full = {StatusAtom(m, a.name, a.args) for a in found for m in MODALITIES}
        index = _index(full)
        grown = set(found)
        for idx, rule in enumerate(ev.prog.rules):
            for env in ev.instances(idx, index):
                for atom in (rule.head, *rule.body_neg):
                    grown.add(atom.ground(env).action_atom)
        if grown == found:
            break
        found = grown
        if len(found) > limit:
            raise BoundExceeded(f"more than {limit} ground actions")
    return tuple(sorted(found, key=lambda a: status_atom_key(StatusAtom("P", a.name, a.args))))


def brute_force_status_sets(prog: Program, state, *, bound: int = 20, supported: bool = False,
                            p: float = 1.0, closure: str = "classic") -> Catalog:
    """Classify every closed, clash-free status set over the ground action universe.

    ``bound`` caps the number of ground status atoms (actions x 5). With
    ``supported`` only sets that are the closure of their own rule-head atoms
    are kept.
    """
    ev = Evaluator(prog, state, p=p, closure=closure)
    universe = action_universe(ev)
    if len(universe) * len(MODALITIES) > bound:
        raise BoundExceeded(f"{len(universe)} ground actions give {len(universe) * 5} status atoms, bound is {bound}")
    n = len(universe)
    pos = {a: i for i, a in enumerate(universe)}

    def bit(atom: StatusAtom) -> int:
        return 1 << (5 * pos[atom.action_atom] + _BIT[atom.modality])

    patterns = closed_patterns(closure)
    if n:
        grid = np.array(list(product(patterns, repeat=n)), dtype=np.int64)
        shifts = np.array([5 * i for i in range(n)], dtype=np.int64)
        cands = (grid << shifts).sum(axis=1)
    else:
        cands = np.zeros(1, dtype=np.int64)

    full = {StatusAtom(m, a.name, a.args) for a in universe for m in MODALITIES}
    index = _index(full)

    # PS1: no firable instance whose head is missing
    app_ok = np.ones(len(cands), dtype=bool)
    heads = 0
    for idx, rule in enumerate(prog.rules):
        for env in ev.instances(idx, index):
            head = rule.head.ground(env)
            if head.action_atom not in pos:
                continue
            if head.modality in ("P", "O", "Do") and not ev.pre_holds(head.action_atom):
                continue
            if any(a.modality in ("P", "O", "Do") and not ev.pre_holds(a.ground(env).action_atom) for a in rule.body_pos):
                continue
            heads |= bit(head)
            pmask = sum(bit(a.ground(env)) for a in set(rule.body_pos))
            nmask = sum(bit(a.ground(env)) for a in set(rule.body_neg))
            fires = ((cands & pmask) == pmask) & ((cands & nmask) == 0)
            app_ok &= ~(fires & ((cands & bit(head)) == 0))

    # PS2: permitted actions need their precondition, constraints block Do-sets
    bad_p = sum(bit(StatusAtom("P", a.name, a.args)) for a in universe if not ev.pre_holds(a))
    deon_ok = (cands & bad_p) == 0
    act_ok = np.ones(len(cands), dtype=bool)
    do_index = {k: v for k, v in index.items() if k[0] == "Do"}
    for ac in prog.action_constraints:
        pattern = tuple(StatusAtom("Do", b.name, b.args) for b in ac.blocked)
        for env in ev.view.groundings(ac.guard, {}):
            if not ev.view.holds_ground(ac.guard, env):
                continue
            for ext in ev.match_positive(pattern, do_index, env):
                mask = sum(bit(a.ground(ext)) for a in set(pattern))
                act_ok &= (cands & mask) != mask

    keep = np.ones(len(cands), dtype=bool)
    if supported:
        for i, a in enumerate(universe):
            own = (cands >> (5 * i)) & 31
            h = (heads >> (5 * i)) & 31
            table = np.array([_pattern_of(action_closure(_pattern_atoms(a, q & h), closure)) for q in range(32)])
            keep &= table[own] == own

    ps123 = app_ok & deon_ok & act_ok
    decode = lambda c: frozenset(StatusAtom(m, a.name, a.args) for i, a in enumerate(universe)  # noqa: E731
                                 for m in MODALITIES if int(c) >> (5 * i + _BIT[m]) & 1)

    feasible_masks = []
    for c in cands[ps123 & keep]:
        verdict, _ = ev.state_consistent(decode(c))
        if verdict.ok:
            feasible_masks.append(int(c))

    base = cands[ps123]
    rational_masks = []
    for c in feasible_masks:
        smaller = (base & ~c) == 0
        if not np.any(smaller & (base != c)):
            rational_masks.append(c)

    order = lambda sets: tuple(sorted(sets, key=lambda s: [status_atom_key(a) for a in sorted(s, key=status_atom_key)]))  # noqa: E731
    feasible = [decode(c) for c in feasible_masks]
    rational = [decode(c) for c in rational_masks]
    reasonable = [s for s in feasible if ev.reasonable(s)]
    return Catalog(universe, order(feasible), order(rational), order(reasonable), int(keep.sum()))


__all__ = ["BoundExceeded", "Catalog", "action_universe", "brute_force_status_sets", "closed_patterns"]
