import json

import pytest
from click.testing import CliRunner
from support import data

from pap.cli import main
from pap.parser import parse_state


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_eval_text_and_trace():
    res = run("eval", data("surveillance.pap"), data("surveillance.pst"), "--trace")
    assert res.exit_code == 0
    lines = res.output.splitlines()
    assert lines[0] == "trace iter=1 rule=3 head=O send_warn(t80)"
    assert lines[-7:] == ["F move()", "P send_warn(t72)", "Do send_warn(t72)", "O send_warn(t72)",
                          "P send_warn(t80)", "Do send_warn(t80)", "O send_warn(t80)"]


def test_eval_json_lines():
    res = run("eval", data("surveillance.pap"), data("surveillance.pst"), "--format", "json-lines")
    assert res.exit_code == 0
    record = json.loads(res.output.strip().splitlines()[-1])
    assert record == {"atoms": ["F move()", "P send_warn(t72)", "Do send_warn(t72)", "O send_warn(t72)",
                                "P send_warn(t80)", "Do send_warn(t80)", "O send_warn(t80)"],
                      "kind": "result", "status": "ok"}


def test_eval_threshold_option():
    assert run("eval", data("threshold.pap"), data("threshold.pst"), "--p", "0.6").output.split("\n")[:2] == [
        "P alpha()", "Do alpha()"]
    res = run("eval", data("threshold.pap"), data("threshold.pst"), "--p", "0.6", "--closure", "extended")
    assert "O alpha()" in res.output


def test_clash_exit_code():
    res = run("eval", data("clash.pap"), data("clash.pst"))
    assert res.exit_code == 2
    assert "no consistent set exists: P/F clash on send_warn(t80)" in res.output


def test_negation_rejected_by_eval():
    res = run("eval", data("warn_agents.pap"), data("warn_agents.pst"))
    assert res.exit_code == 1 and "check" in res.output


def test_missing_file_is_input_error():
    res = run("eval", data("nope.pap"), data("threshold.pst"))
    assert res.exit_code == 1 and "cannot read" in res.output


def test_check_reports_each_condition():
    res = run("check", data("warn_agents.pap"), data("warn_agents.pst"), data("warn_rational.ps"))
    assert res.exit_code == 0
    assert res.output.splitlines()[-3:] == ["feasible yes", "rational yes", "reasonable no"]


def test_check_parse_error_position():
    res = run("check", data("warn_agents.pap"), data("warn_agents.pst"), data("broken.ps"))
    assert res.exit_code == 1 and "broken.ps:1:26" in res.output


def test_kripke_dump_and_check():
    res = run("kripke", data("vehicles.pst"))
    assert res.output.splitlines()[1] == "#2 p=0.06 {surv.identify(image1)=t80}"
    assert run("kripke", data("vehicles.pst"), "--check", data("vehicles.kripke")).output.strip() == "compatible"
    bad = run("kripke", data("vehicles.pst"), "--check", data("vehicles_unbalanced.kripke"))
    assert bad.exit_code == 2 and bad.output.startswith("incompatible")


def test_step_writes_state(tmp_path):
    out = tmp_path / "next.pst"
    res = run("step", data("vehicles.pap"), data("vehicles.pst"), "erase(t80)", "--out", out)
    assert res.exit_code == 0 and "- surv.identify(image1) t80 (p=0.3)" in res.output
    st = parse_state(out.read_text())
    assert {o for cc in st.calls() for o in st.objects(cc)} == {"t72", "t70", "Loc2"}


def test_step_with_structure():
    res = run("step", data("vehicles.pap"), data("vehicles.pst"), "erase(t80)", "--structure",
              data("vehicles.kripke"), "--kripke")
    assert "#4 p=0.6 {surv.identify(image1)=t72, surv.location(image1)=Loc2}" in res.output


def test_step_not_executable():
    res = run("step", data("vehicles.pap"), data("vehicles.pst"), "never()")
    assert res.exit_code == 2 and "not possibly executable" in res.output


def test_ic_check(tmp_path):
    lp_file = tmp_path / "ic.lp"
    res = run("ic-check", data("vehicles.pap"), data("vehicles.pst"), "erase(t80)", "--p", "0.7", "--export-lp", lp_file)
    assert res.exit_code == 0 and "guaranteed (min 0.700)" in res.output
    assert "KtoK[4]" in lp_file.read_text()
    res = run("ic-check", data("vehicles.pap"), data("vehicles.pst"), "erase(t72)", "--p", "0.7", "--format", "json-lines")
    record = json.loads(res.output.splitlines()[0])
    assert res.exit_code == 2 and record["guaranteed"] is False
    assert record["minimum"] == pytest.approx(0.2)


@pytest.mark.parametrize("name,kind", [("vehicles.pst", "state"), ("vehicles.pap", "program"),
                                       ("vehicles.kripke", "kripke"), ("warn_rational.ps", "status-set")])
def test_parse_infers_kind(name, kind):
    res = run("parse", data(name))
    assert res.exit_code == 0 and kind in res.output


def test_invalid_probability_option():
    res = run("eval", data("threshold.pap"), data("threshold.pst"), "--p", "1.5")
    assert res.exit_code != 0
