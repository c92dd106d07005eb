import pytest

from pap.annotations import (
    AXIOMS,
    Binding,
    check_strategy_axioms,
    combine,
    entails,
    eval_annotation,
    groundings,
    holds,
    lattice_intervals,
    satisfies,
    tightest_interval,
)
from pap.model import EvaluationError, ModelError, ProbInterval, call
from pap.parser import parse_condition, parse_rule, parse_state
from pap.state import DetState

A, B = ProbInterval(0.6, 0.6), ProbInterval(0.5, 0.5)


# interval bounds worked out by hand for two point probabilities 0.6 and 0.5
@pytest.mark.parametrize("strategy,lo,hi", [
    ("ig", 0.1, 0.5),
    ("pc", 0.5, 0.5),
    ("nc", 0.1, 0.1),
    ("in_", 0.3, 0.3),
])
def test_combine_point_values(strategy, lo, hi):
    out = combine(strategy, A, B)
    assert out.lo == pytest.approx(lo) and out.hi == pytest.approx(hi)


def test_combine_accepts_plain_in():
    assert combine("in", A, B) == combine("in_", A, B)


def test_unknown_strategy():
    with pytest.raises(ModelError):
        combine("xx", A, B)


def test_lattice_size():
    assert len(lattice_intervals(0.05)) == 231
    assert len(lattice_intervals(0.5)) == 6


@pytest.mark.parametrize("strategy", ["ig", "pc", "nc", "in_"])
def test_axioms_on_coarse_lattice(strategy):
    rep = check_strategy_axioms(strategy, lattice_intervals(0.1))
    assert rep.ok, rep.examples
    assert set(rep.checked) == set(AXIOMS)


def test_axiom_checker_detects_violation():
    # max is not a conjunction: it breaks the bottomline axiom
    import pap.annotations as ann

    original = ann.combine_arrays

    def fake(strategy, l1, u1, l2, u2):
        import numpy as np
        return np.maximum(l1, l2), np.maximum(u1, u2)

    ann.combine_arrays = fake
    try:
        rep = check_strategy_axioms("ig", lattice_intervals(0.25))
    finally:
        ann.combine_arrays = original
    assert not rep.holds("bottomline")
    assert "bottomline" in rep.examples


def test_annotation_functions_and_variables():
    rule = parse_rule("P a(V) <- in(V, d.f()) : [mul(V, 0.5), min(1, add(V, 0.4))] @ ig.")
    ann = rule.body_prob[0].annotation
    assert eval_annotation(ann, {"V": 0.4}) == ProbInterval(0.2, 0.8)
    with pytest.raises(EvaluationError):
        eval_annotation(ann, {})
    with pytest.raises(ModelError):
        Binding(annotations={"V": 1.5})


def test_inverted_annotation_is_an_error():
    rule = parse_rule("P a() <- in(x, d.f()) : [0.9, 0.2] @ ig.")
    with pytest.raises((EvaluationError, ModelError)):
        eval_annotation(rule.body_prob[0].annotation)


STATE = parse_state("""
surv.identify(image1) = {rv{t80: 0.6}, rv{t72: 0.5}}
surv.enemyvehicles() = {t80}
""")


def test_tightest_interval_fold():
    cond = parse_condition("in(t80, surv.identify(image1)) & in(t80, surv.enemyvehicles())")
    iv = tightest_interval(STATE, cond, "ig")
    assert (iv.lo, iv.hi) == pytest.approx((0.6, 0.6))
    cond = parse_condition("in(t80, surv.identify(image1)) & in(t72, surv.identify(image1))")
    assert tightest_interval(STATE, cond, "in_").lo == pytest.approx(0.3)
    assert tightest_interval(STATE, parse_condition("in(t99, surv.identify(image1))"), "ig") is None


def test_satisfies_universal_over_groundings():
    rule = parse_rule("P a(X) <- in(X, surv.identify(image1)) : [0.55, 1] @ ig.")
    ac = rule.body_prob[0]
    assert satisfies(STATE, ac, {"X": "t80"})
    assert not satisfies(STATE, ac, {"X": "t72"})
    assert not satisfies(STATE, ac)


def test_entails_is_existential():
    cond = parse_condition("in(X, surv.identify(image1))")
    assert entails(STATE, cond, {}, p=0.55) == {"X": "t80"}
    assert entails(STATE, cond, {}, p=0.7) is None


def test_notin_at_query_level():
    cond = parse_condition("notin(t72, surv.identify(image1))")
    assert tightest_interval(STATE, cond, "ig", query=ProbInterval(0.8, 1.0)) == ProbInterval(1.0, 1.0)
    assert tightest_interval(STATE, cond, "ig", query=ProbInterval(0.5, 1.0)) is None


def test_groundings_bind_left_to_right():
    cond = parse_condition("in(X, surv.identify(image1)) & X != t72")
    envs = [e for e in groundings(STATE, cond, {}) if e]
    assert {e["X"] for e in envs} >= {"t80"}


def test_classical_holds():
    det = DetState({call("d", "f"): [1, 5, 9]})
    assert holds(det, parse_condition("in(X, d.f()) & X > 4"), {}) == {"X": 5}
    assert holds(det, parse_condition("in(X, d.f()) & X > 40"), {}) is None
