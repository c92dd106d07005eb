import pytest
from support import atoms, data, load_program, load_state

from pap.model import ModelError, render_program
from pap.parser import parse_program, parse_state
from pap.semantics import (
    NO_CONSISTENT_SET,
    NO_REASONABLE_SET,
    Evaluator,
    Failure,
    action_closure,
    app_operator,
    check_feasible,
    check_rational,
    check_reasonable,
    compute_lfp,
    compute_S,
    deontic_closure,
    reduct,
)

WARN = (load_program("warn_agents.pap"), load_state("warn_agents.pst"))
SURV = (load_program("surveillance.pap"), load_state("surveillance.pst"))


def test_closures():
    assert deontic_closure(atoms("O a()")) == atoms("O a(), P a()")
    assert action_closure(atoms("O a()")) == atoms("O a(), Do a(), P a()")
    assert action_closure(atoms("Do a()")) == atoms("Do a(), P a()")
    assert action_closure(atoms("Do a()"), "extended") == atoms("Do a(), O a(), P a()")
    assert action_closure(atoms("F a(), W b()")) == atoms("F a(), W b()")


def test_app_on_empty_set_uses_only_code_conditions():
    assert app_operator(*SURV, frozenset()) == atoms("O send_warn(t80)")


def test_app_needs_positive_body_atoms():
    prog, state = SURV
    out = app_operator(prog, state, atoms("O send_warn(t80), Do send_warn(t80), P send_warn(t80)"))
    assert atoms("O send_warn(t72), F move()") <= out


def test_trace_numbers_rules_from_one():
    trace = []
    compute_S(*SURV, frozenset(), trace=trace)
    assert [str(e) for e in trace] == ["iter=1 rule=3 head=O send_warn(t80)"]


def test_lfp_rejects_negation():
    with pytest.raises(ModelError):
        compute_lfp(*WARN)


def test_power_example():
    assert compute_lfp(load_program("power.pap"), load_state("power.pst")) == atoms("O power_warn(), Do power_warn(), P power_warn()")


def test_clash_sentinel_names_the_action():
    out = compute_lfp(load_program("clash.pap"), load_state("clash.pst"))
    assert isinstance(out, Failure) and out.reason == NO_CONSISTENT_SET
    assert str(out) == "no consistent set exists: P/F clash on send_warn(t80)"


def test_action_constraint_blocks_lfp():
    prog = parse_program("Do a().\nDo b().\n{a(), b()} <~ .\n")
    out = compute_lfp(prog, parse_state(""))
    assert isinstance(out, Failure) and out.reason == NO_REASONABLE_SET


def test_integrity_constraint_blocks_lfp():
    prog = parse_program("Do a().\nic true => in(x, d.f()).\naction a() { del: in(x, d.f()) }\n")
    out = compute_lfp(prog, parse_state("d.f() = {x}\n"))
    assert isinstance(out, Failure) and "integrity constraint" in out.detail


def test_failed_precondition_keeps_permission_out():
    prog = parse_program("action a() { pre: in(x, d.f()) }\nP a().\n")
    assert compute_lfp(prog, parse_state("d.f() = {y}\n")) == frozenset()
    assert compute_lfp(prog, parse_state("d.f() = {x}\n")) == atoms("P a()")


@pytest.mark.parametrize("name,feasible,rational,reasonable", [
    ("warn_reasonable.ps", True, True, True),
    ("warn_rational.ps", True, True, False),
    ("warn_clash.ps", False, False, False),
])
def test_warn_classification(name, feasible, rational, reasonable):
    ps = atoms(data(name).read_text())
    assert check_feasible(*WARN, ps).feasible is feasible
    assert bool(check_rational(*WARN, ps)) is rational
    assert check_reasonable(*WARN, ps) is reasonable


def test_feasibility_report_names_problems():
    rep = check_feasible(*WARN, atoms(data("warn_clash.ps").read_text()))
    assert "O/W clash on warn_ag(a)" in rep.witnesses["ps2"]
    assert not rep.ps1_ok and not rep.ps3_ok and rep.ps4_ok


def test_reduct_drops_blocked_rules():
    ps = atoms(data("warn_reasonable.ps").read_text())
    text = render_program(reduct(WARN[0], ps, WARN[1]))
    assert text.splitlines()[0].startswith("Do warn_ag(a) <-")
    assert "O warn_ag(b)" not in text and "open_ch" not in text


def test_lfp_equals_repeated_compute_s():
    ev = Evaluator(*SURV)
    x = frozenset()
    while True:
        y = ev.compute_s(x)
        if y == x:
            break
        x = y
    assert ev.lfp() == x


def test_probability_threshold_changes_app():
    prog = parse_program("P a() <- in(x, d.f()) : [0.5, 1] @ ig.\n")
    assert compute_lfp(prog, parse_state("d.f() = {rv{x: 0.6}}\n")) == atoms("P a()")
    assert compute_lfp(prog, parse_state("d.f() = {rv{x: 0.4}}\n")) == frozenset()
