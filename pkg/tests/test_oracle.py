"""Exhaustive status-set enumeration and the classical reduction."""

import itertools
import random

import pytest
from support import atoms, load_program, load_state, random_program, random_state

from pap.model import MODALITIES, StatusAtom
from pap.parser import parse_program, parse_state
from pap.semantics.oracle import action_universe, closed_patterns
from pap.semantics import (
    BoundExceeded,
    Evaluator,
    NotDegenerate,
    brute_force_status_sets,
    is_degenerate,
    red_reduce,
    red_reduce_state,
)

WARN = (load_program("warn_agents.pap"), load_state("warn_agents.pst"))


def test_pattern_counts():
    # per action: subsets of {P,F,W,Do,O} closed under O=>Do, Do=>P, O=>P and free of O/W, P/F
    assert len(closed_patterns("classic")) == 9
    assert len(closed_patterns("extended")) == 7


def test_warn_universe():
    ev = Evaluator(*WARN)
    names = {(a.name, a.values()) for a in action_universe(ev)}
    assert names == {("warn_ag", ("a",)), ("warn_ag", ("b",)), ("open_ch", ("b",))}


def test_unrestricted_enumeration_counts():
    cat = brute_force_status_sets(*WARN)
    # frozen from the first run, cross-checked by the naive enumeration below
    assert len(cat.feasible) == 174
    assert len(cat.rational) == 2
    assert cat.reasonable == (atoms("Do warn_ag(a), P warn_ag(a)"),)


def test_bound_exceeded():
    with pytest.raises(BoundExceeded):
        brute_force_status_sets(*WARN, bound=10)


def _naive(prog, state):
    """Every subset of the ground status atoms, checked one by one."""
    ev = Evaluator(prog, state)
    universe = action_universe(ev)
    ground = [StatusAtom(m, a.name, a.args) for a in universe for m in MODALITIES]
    feasible, ps123 = [], []
    for bits in itertools.product((0, 1), repeat=len(ground)):
        ps = frozenset(g for g, b in zip(ground, bits) if b)
        if ev.satisfies_ps123(ps):
            ps123.append(ps)
            if ev.check_feasible(ps).feasible:
                feasible.append(ps)
    rational = [s for s in feasible if not any(t < s for t in ps123)]
    return set(feasible), set(rational)


@pytest.mark.parametrize("seed", range(40))
def test_bitmask_enumeration_matches_naive(seed):
    rng = random.Random(500 + seed)
    prog = parse_program(random_program(rng, negation=True))
    state = parse_state(random_state(rng))
    universe = action_universe(Evaluator(prog, state))
    if len(universe) > 2:
        pytest.skip("naive enumeration limited to two ground actions")
    feasible, rational = _naive(prog, state)
    cat = brute_force_status_sets(prog, state)
    assert set(cat.feasible) == feasible
    assert set(cat.rational) == rational


def test_red_reduce_strips_annotations():
    prog = parse_program("P a() <- in(x, d.f()) : [0.5, 1] @ pc, Do b().\n")
    reduced = red_reduce(prog)
    body = reduced.rules[0].body_prob[0]
    assert not hasattr(body, "annotation")
    assert reduced.rules[0].body_pos == prog.rules[0].body_pos


def test_red_reduce_state():
    assert is_degenerate(parse_state("d.f() = {x, y}\n"))
    det = red_reduce_state(parse_state("d.f() = {x, rv{y: 1.0}}\n"))
    assert sorted(o for _, o in det.pairs()) == ["x", "y"]
    with pytest.raises(NotDegenerate):
        red_reduce_state(parse_state("d.f() = {rv{x: 0.9}}\n"))
    assert not is_degenerate(parse_state("d.f() = {rv{x: 0.5, y: 0.5}}\n"))


def test_reduction_agrees_on_warn_example():
    prog, state = WARN
    a = brute_force_status_sets(prog, state)
    b = brute_force_status_sets(red_reduce(prog), red_reduce_state(state))
    assert (a.feasible, a.rational, a.reasonable) == (b.feasible, b.rational, b.reasonable)


def test_reduction_needs_full_upper_bounds():
    # certain facts fail an annotation capped below 1, the classical image ignores it
    prog = parse_program("P a() <- in(x, d.f()) : [0.2, 0.8] @ ig.\n")
    state = parse_state("d.f() = {x}\n")
    a = brute_force_status_sets(prog, state)
    b = brute_force_status_sets(red_reduce(prog), red_reduce_state(state))
    assert a.rational != b.rational
