import math

import pytest
from support import data, load_program, load_state

from pap.kripke import (
    NONE_OF_THE_ABOVE,
    KripkeStructure,
    NotExecutable,
    ProductCapExceeded,
    check_compatibility,
    compatible_states,
    dump_kripke,
    execute_action_kripke,
    executability_probability,
    normalize_rv,
    perturb_kripke,
    perturbation_bound,
    possibly_executable,
    product_kripke,
    witnesses,
)
from pap.model import ModelError, RandomVariable
from pap.parser import parse_kripke, parse_state

VEH = load_state("vehicles.pst")
PROG = load_program("vehicles.pap")
GIVEN = parse_kripke(data("vehicles.kripke").read_text())


def test_normalize_drops_zeros_and_adds_rest():
    rv = normalize_rv(RandomVariable({"a": 0.3, "b": 0.0, "c": 0.5}))
    assert rv.objects[:2] == ("a", "c") and rv.objects[2] is NONE_OF_THE_ABOVE
    assert rv.probs[2] == pytest.approx(0.2)
    assert rv.choices() == [None, "a", "c"]
    full = normalize_rv(RandomVariable({"a": 0.4, "b": 0.6}))
    assert not full.has_rest and full.mass(None) == 0.0


def test_product_masses_by_hand():
    # identify: t80 0.3, t72 0.7, nothing 0; location: Loc2 0.8, nothing 0.2
    hand = [0 * 0.2, 0.3 * 0.2, 0.7 * 0.2, 0 * 0.8, 0.3 * 0.8, 0.7 * 0.8]
    k = product_kripke(VEH)
    assert k.probs == pytest.approx(hand, abs=1e-12)
    assert k.states == tuple(compatible_states(VEH))
    assert check_compatibility(k, VEH).ok


def test_dump_round_trip():
    k = product_kripke(VEH)
    back = parse_kripke(dump_kripke(k))
    assert back.states == k.states and back.probs == pytest.approx(k.probs)


def test_incompatible_file_reports_residuals():
    bad = parse_kripke(data("vehicles_unbalanced.kripke").read_text())
    rep = check_compatibility(bad, VEH)
    assert not rep.ok
    assert any("t80" in p for p in rep.problems)


def test_structure_validation():
    with pytest.raises(ModelError):
        KripkeStructure([], [])
    with pytest.raises(ModelError):
        KripkeStructure(GIVEN.states[:2], (0.5, 0.6))


def test_perturbation_keeps_marginals():
    bound = perturbation_bound(GIVEN, VEH)
    assert bound == pytest.approx(0.1)
    for delta in (0.0, 0.05, bound):
        k = perturb_kripke(GIVEN, VEH, delta)
        assert check_compatibility(k, VEH, tol=1e-9).ok
        assert math.isclose(k.total(), 1.0, abs_tol=1e-9)
    assert not perturb_kripke(GIVEN, VEH, 0.05).same_as(GIVEN)
    with pytest.raises(ModelError):
        perturb_kripke(GIVEN, VEH, bound + 0.01)


def test_product_bound_on_example():
    assert perturbation_bound(product_kripke(VEH), VEH) == pytest.approx(0.06)


def test_product_cap(monkeypatch):
    with pytest.raises(ProductCapExceeded):
        compatible_states(VEH, cap=5)
    monkeypatch.setenv("PAP_PRODUCT_CAP", "3")
    with pytest.raises(ProductCapExceeded):
        product_kripke(VEH)


def test_witnesses_skip_zero_mass():
    assert witnesses(GIVEN, PROG.actions["erase"], {"X": "t80"}) == [1, 4]
    assert witnesses(GIVEN, PROG.actions["never"], {}) == []


def test_executability():
    assert possibly_executable(VEH, PROG.actions["noop"]).indices == (2, 3, 5, 6)
    assert executability_probability(GIVEN, PROG.actions["erase"], {"X": "t72"}) == pytest.approx(0.1)
    with pytest.raises(NotExecutable):
        executability_probability(GIVEN, PROG.actions["never"])
    with pytest.raises(ModelError):
        witnesses(GIVEN, PROG.actions["erase"], {})


def test_execute_merges_in_first_occurrence_order():
    after = execute_action_kripke(GIVEN, PROG.actions["erase"], {"X": "t80"})
    assert after.probs == pytest.approx((0.1, 0.1, 0.2, 0.6))
    assert after.states[0] == GIVEN.states[0]


def test_execute_not_executable():
    with pytest.raises(NotExecutable):
        execute_action_kripke(GIVEN, PROG.actions["never"])
    same = execute_action_kripke(GIVEN, PROG.actions["never"], force=True)
    assert same.same_as(GIVEN)


def test_gamma_fixes_precondition_variable():
    k = execute_action_kripke(GIVEN, PROG.actions["elsewhere"], {}, gamma={"X": "Loc2"}, force=True)
    assert k.same_as(GIVEN)


def test_empty_state_has_one_world():
    k = product_kripke(parse_state(""))
    assert len(k) == 1 and k.probs == (1.0,)
