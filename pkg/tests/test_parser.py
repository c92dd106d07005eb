import pytest
from support import data, load_program

from pap.annotations import eval_annotation
from pap.model import ProbInterval, Program, action_atom, StatusAtom, render_program, render_status_set, status
from pap.parser import (
    ParseError,
    parse_action_atom,
    parse_condition,
    parse_kripke,
    parse_object,
    parse_program,
    parse_rule,
    parse_state,
    parse_status_set,
)


@pytest.mark.parametrize("name", ["surveillance.pap", "warn_agents.pap", "vehicles.pap", "scaling.pap",
                                  "threshold.pap", "clash.pap", "ic_trivial.pap", "power.pap"])
def test_render_round_trip(name):
    prog = load_program(name)
    assert parse_program(render_program(prog)) == prog


def test_rule_shape():
    rule = parse_rule("O send_warn(Y) <- in(F, surv.file(imagedb)), in(Y, surv.identify(F)) : [0.5, 1.0] @ ig, "
                      "O send_warn(X).")
    assert rule.head == StatusAtom("O", "send_warn", (rule.head.args[0],))
    assert len(rule.body_pos) == 1 and not rule.body_neg
    # comma-separated conditions are separate body items
    first, second = rule.body_prob
    assert eval_annotation(first.annotation) == ProbInterval(1.0, 1.0)
    assert eval_annotation(second.annotation) == ProbInterval(0.5, 1.0)


def test_unannotated_conditions_default_to_certainty():
    rule = parse_rule("P a() <- in(x, d.f()).")
    ac = rule.body_prob[0]
    assert ac.strategy == "ig"
    assert eval_annotation(ac.annotation) == ProbInterval(1.0, 1.0)


def test_strategy_in_maps_to_identifier():
    rule = parse_rule("P a() <- in(x, d.f()) & in(y, d.g()) : [0.1, 1] @ in.")
    assert rule.body_prob[0].strategy == "in_"


def test_default_strategy_override():
    rule = parse_rule("P a() <- in(x, d.f()).", default_strategy="pc")
    assert rule.body_prob[0].strategy == "pc"


@pytest.mark.parametrize("text,fragment", [
    ("O a(X) <- in(Y, d.f()).\n", "unsafe rule"),
    ("O a() <- in(x, d.f()) : [0.5,1] @ zz.\n", "unknown strategy"),
    ("O a( <- .\n", "1:"),
])
def test_program_errors_carry_position(text, fragment):
    with pytest.raises(ParseError) as err:
        parse_program(text, "p.pap")
    assert fragment in str(err.value)
    assert str(err.value).startswith("p.pap:")


@pytest.mark.parametrize("text,fragment", [
    ("d.f() = {rv{a: 0.7, b: 0.6}}\n", "sum"),
    ("d.f() = {rv{a: 0.5}, rv{a: 0.3}}\n", "incoherent"),
    ("d.f() = {rv{a: 0.2}\n", "1:"),
])
def test_state_errors(text, fragment):
    with pytest.raises(ParseError) as err:
        parse_state(text)
    assert fragment in str(err.value)


def test_state_plain_objects_are_certain():
    st = parse_state(data("warn_agents.pst").read_text())
    cc = next(iter(st.calls()))
    assert {st.prob(cc, o) for o in st.objects(cc)} == {1.0}


def test_status_set_forms():
    a = parse_status_set("{Do warn_ag(a), P warn_ag(a)}")
    b = parse_status_set("P warn_ag(a)\nDo warn_ag(a)\n")
    assert a == b == {status("Do", "warn_ag", "a"), status("P", "warn_ag", "a")}
    assert render_status_set(a) == "{P warn_ag(a), Do warn_ag(a)}"


def test_status_set_rejects_variables():
    with pytest.raises(ParseError):
        parse_status_set("{P a(X)}")


def test_action_atom_and_object():
    assert parse_action_atom("erase(t80)") == action_atom("erase", "t80")
    assert parse_object("Loc2") == "Loc2"
    assert parse_object("3") == 3


def test_condition_with_comparison():
    cond = parse_condition('in(X, surv.location(image1)) & X != "Loc2"')
    assert len(cond.conjuncts) == 2


def test_kripke_dump_parses():
    k = parse_kripke(data("vehicles.kripke").read_text())
    assert k.probs == (0.0, 0.1, 0.1, 0.0, 0.2, 0.6)


def test_empty_program():
    assert parse_program("") == Program()
