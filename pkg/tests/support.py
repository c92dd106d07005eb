"""Shared fixtures, random instance generators and independent oracles."""

from __future__ import annotations

import itertools
import random
from pathlib import Path

import numpy as np

from pap.parser import parse_program, parse_state, parse_status_set

DATA = Path(__file__).parent / "data"


def data(name: str) -> Path:
    return DATA / name


def load_program(name: str, **kw):
    return parse_program(data(name).read_text(), name, **kw)


def load_state(name: str):
    return parse_state(data(name).read_text(), name)


def atoms(text: str):
    return parse_status_set(text)


# ---------------------------------------------------------------- random programs

ACTIONS = ("a0", "a1", "a2", "a3")
OBJECTS = ("u", "v", "w")
MODS = ("P", "F", "W", "Do", "O")


def random_state(rng: random.Random, degenerate: bool = False, facts: int | None = None) -> str:
    """Text of a state over d.f() and d.g() with at most ``facts`` objects."""
    facts = rng.randint(0, 8) if facts is None else facts
    pool = [(call, o) for call in ("d.f()", "d.g()") for o in OBJECTS]
    chosen = rng.sample(pool, min(facts, len(pool)))
    lines = []
    for call in ("d.f()", "d.g()"):
        objs = [o for c, o in chosen if c == call]
        if not objs:
            continue
        if degenerate:
            items = objs
        else:
            items = [f"rv{{{o}: {rng.choice([0.3, 0.5, 0.7, 0.9, 1.0])}}}" for o in objs]
        lines.append(f"{call} = {{{', '.join(items)}}}")
    return "\n".join(lines) + "\n"


def _condition(rng: random.Random) -> str:
    call = rng.choice(["d.f()", "d.g()"])
    obj = rng.choice(OBJECTS)
    pol = "in" if rng.random() < 0.8 else "notin"
    cond = f"{pol}({obj}, {call})"
    if rng.random() < 0.3:
        cond += f" & in({rng.choice(OBJECTS)}, {rng.choice(['d.f()', 'd.g()'])})"
    return cond


def random_program(rng: random.Random, *, negation: bool = False, full_annotations: bool = False) -> str:
    """Up to 4 zero-arity actions and up to 6 rules.

    With ``full_annotations`` every annotation has upper bound 1, which is
    what the classical image needs to agree with the probabilistic program.
    """
    n_actions = rng.randint(1, 4)
    actions = ACTIONS[:n_actions]
    lines = []
    for a in actions:
        parts = []
        if rng.random() < 0.5:
            parts.append(f"pre: {_condition(rng)}")
        if rng.random() < 0.3:
            parts.append(f"add: in({rng.choice(OBJECTS)}, d.g())")
        if rng.random() < 0.3:
            parts.append(f"del: in({rng.choice(OBJECTS)}, d.f())")
        lines.append(f"action {a}() {{ {'; '.join(parts)} }}")
    for _ in range(rng.randint(0, 6)):
        head = f"{rng.choice(MODS)} {rng.choice(actions)}()"
        body = []
        if rng.random() < 0.6:
            lo = rng.choice([0.0, 0.3, 0.5, 0.7, 1.0])
            hi = 1.0 if full_annotations else rng.choice([1.0, 1.0, 0.8])
            hi = max(hi, lo)
            body.append(f"{_condition(rng)} : [{lo}, {hi}] @ {rng.choice(['ig', 'pc', 'nc', 'in'])}")
        for _ in range(rng.randint(0, 2)):
            body.append(f"{rng.choice(MODS)} {rng.choice(actions)}()")
        if negation:
            for _ in range(rng.randint(0, 2)):
                body.append(f"not {rng.choice(MODS)} {rng.choice(actions)}()")
        lines.append(f"{head} <- {', '.join(body)}." if body else f"{head}.")
    if rng.random() < 0.3 and n_actions >= 2:
        a, b = rng.sample(list(actions), 2)
        guard = "" if rng.random() < 0.5 else _condition(rng)
        lines.append(f"{{{a}(), {b}()}} <~ {guard}.")
    if rng.random() < 0.3:
        lines.append(f"ic {_condition(rng)} => in({rng.choice(OBJECTS)}, d.g()).")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- LP oracle


def vertex_minimum(lp, tol: float = 1e-7):
    """Minimum of an LP by enumerating basic feasible points.

    Every vertex makes the equality rows tight together with enough tight
    inequalities (rows or bounds) to pin all variables. Returns
    ``(status, value)`` with status ``optimal`` or ``infeasible``; the feasible
    region is bounded for every instance this is used on.
    """
    n = len(lp.variables)
    eq_a, eq_b, ineq_a, ineq_b = [], [], [], []  # inequalities stored as a.x <= b
    for r in lp.rows:
        a = np.array(r.coeffs, float)
        if r.relation == "=":
            eq_a.append(a)
            eq_b.append(r.rhs)
        elif r.relation == "<=":
            ineq_a.append(a)
            ineq_b.append(r.rhs)
        else:
            ineq_a.append(-a)
            ineq_b.append(-r.rhs)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        ineq_a.append(-e)
        ineq_b.append(-lp.lower[j])
        if lp.upper[j] is not None:
            ineq_a.append(e)
            ineq_b.append(lp.upper[j])
    E = np.array(eq_a).reshape(-1, n)
    rank = np.linalg.matrix_rank(E) if len(eq_a) else 0
    need = n - rank
    c = np.array(lp.objective, float)
    best = None
    I = np.array(ineq_a).reshape(-1, n)
    for combo in itertools.combinations(range(len(ineq_a)), need):
        M = np.vstack([E, I[list(combo)]]) if combo else E
        rhs = np.concatenate([eq_b, [ineq_b[k] for k in combo]])
        if np.linalg.matrix_rank(M) < n:
            continue
        x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        if len(eq_a) and np.max(np.abs(E @ x - np.array(eq_b))) > tol:
            continue
        if np.max(I @ x - np.array(ineq_b)) > tol:
            continue
        val = float(c @ x)
        if best is None or val < best:
            best = val
    return ("infeasible", None) if best is None else ("optimal", best)


# ---------------------------------------------------------------- ic-check instances

IC_ACTION = """action move(X) {
  pre: in(X, s.pos());
  del: in(X, s.pos());
  add: in(X, s.seen())
}
"""


def random_ic_instance(rng: random.Random):
    """A small state over s.pos()/s.seen(), the ``move`` action and one or two ICs.

    Returns ``(program_text, state_text, theta_object, p)``.
    """
    pos = rng.sample(["u", "v", "w"], rng.randint(1, 2))
    lines = []
    masses = [round(rng.uniform(0.05, 0.5), 2) for _ in pos]
    lines.append("s.pos() = {" + ", ".join(f"rv{{{o}: {q}}}" for o, q in zip(pos, masses)) + "}")
    if rng.random() < 0.5:
        lines.append(f"s.seen() = {{rv{{{rng.choice('uvw')}: {round(rng.uniform(0.1, 0.9), 2)}}}}}")
    ics = []
    for _ in range(rng.randint(1, 2)):
        a, b = rng.choice("uvw"), rng.choice("uvw")
        kind = rng.randrange(3)
        if kind == 0:
            ics.append(f"ic in({a}, s.pos()) => in({b}, s.seen()).")
        elif kind == 1:
            ics.append(f"ic true => notin({a}, s.seen()).")
        else:
            ics.append(f"ic in({a}, s.seen()) => notin({b}, s.pos()).")
    prog = IC_ACTION + "\n".join(ics) + "\n"
    return prog, "\n".join(lines) + "\n", rng.choice(pos), rng.choice([0.0, 0.3, 0.5, 0.9])
