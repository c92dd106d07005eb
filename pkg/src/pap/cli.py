"""Batch command-line front end.

Exit codes: 0 success, 1 input error, 2 semantic failure.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import click

from .kripke import (
    KripkeStructure,
    NotExecutable,
    check_compatibility,
    dump_kripke,
    execute_action_kripke,
    possibly_executable,
    product_kripke,
)
from .model import (
    STRATEGIES,
    ModelError,
    Program,
    render_action_atom,
    render_condition,
    render_status_atom,
    status_atom_key,
)
from .parser import ParseError, parse_action_atom, parse_kripke, parse_object, parse_program, parse_state, parse_status_set
from .psemantics import Execution, check_ic_p_consistency, generate_ic_lp
from .psemantics.operators import check_p_feasible
from .semantics import Evaluator, Failure
from .semantics.oracle import BoundExceeded
from .state import ConcConflict, ProbState, render_prob_state, state_diff

EXIT_OK, EXIT_INPUT, EXIT_SEMANTIC = 0, 1, 2


class InputError(Exception):
    pass


class SemanticFailure(Exception):
    pass


@dataclass
class RunConfig:
    program: Path | None
    state: Path | None
    p: float = 1.0
    strategy_default: str = "ig"
    closure: str = "classic"
    trace: bool = False
    fmt: str = "text"


class Output:
    def __init__(self, fmt: str):
        self.fmt = fmt

    def text(self, line: str = "") -> None:
        if self.fmt == "text":
            click.echo(line)

    def record(self, **fields) -> None:
        if self.fmt == "json-lines":
            click.echo(json.dumps(fields, sort_keys=True))


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load_program(cfg: RunConfig) -> Program:
    return parse_program(_read(cfg.program), str(cfg.program), cfg.strategy_default)


def _load_state(path: Path) -> ProbState:
    return parse_state(_read(path), str(path))


def _atoms(ps) -> list[str]:
    return [render_status_atom(a) for a in sorted(ps, key=status_atom_key)]


def _invocation(prog: Program, text: str):
    atom = parse_action_atom(text, "<action>")
    if not atom.is_ground():
        raise InputError("action arguments must be ground objects")
    if atom.name not in prog.actions:
        raise InputError(f"action {atom.name} is not declared in the program")
    defn = prog.actions[atom.name]
    if len(defn.params) != len(atom.args):
        raise InputError(f"action {atom.name} takes {len(defn.params)} arguments, got {len(atom.args)}")
    return atom, defn, dict(zip(defn.params, atom.values()))


def _parse_gamma(items: tuple[str, ...]) -> dict | None:
    if not items:
        return None
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"expected NAME=OBJECT, got {item!r}")
        out[name.strip()] = parse_object(value.strip(), "<gamma>")
    return out


def _run(fn, *args) -> None:
    try:
        code = fn(*args)
    except (SemanticFailure, NotExecutable, ConcConflict) as exc:
        click.echo(f"failure: {exc}", err=True)
        sys.exit(EXIT_SEMANTIC)
    except (ParseError, InputError, ModelError, BoundExceeded) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    sys.exit(code or EXIT_OK)


def _common(f):
    f = click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]), default="text",
                     help="Output format.")(f)
    f = click.option("--strategy-default", type=click.Choice(list(STRATEGIES) + ["in"]), default="ig",
                     help="Conjunction strategy for unannotated conditions.")(f)
    f = click.option("--p", "p", type=click.FloatRange(0.0, 1.0), default=1.0,
                     help="Entailment level for preconditions, guards and constraints.")(f)
    return f


@click.group()
def main() -> None:
    """Evaluate probabilistic agent programs over probabilistic states."""


# ---------------------------------------------------------------- eval


@main.command("eval")
@click.argument("program", type=click.Path(path_type=Path))
@click.argument("state", type=click.Path(path_type=Path))
@_common
@click.option("--closure", type=click.Choice(["classic", "extended"]), default="classic",
              help="Action closure variant (extended adds Do => O).")
@click.option("--trace", is_flag=True, help="Print one line per fired ground rule.")
def eval_cmd(program, state, p, strategy_default, fmt, closure, trace):
    """Print the reasonable status set of a positive program."""
    cfg = RunConfig(program, state, p, strategy_default, closure, trace, fmt)
    _run(cmd_eval, cfg)


def cmd_eval(cfg: RunConfig) -> int:
    prog = _load_program(cfg)
    if not prog.positive:
        raise InputError("the program uses negated status atoms; use `check` to classify candidate sets")
    pstate = _load_state(cfg.state)
    out = Output(cfg.fmt)
    events: list = []
    ev = Evaluator(prog, pstate, p=cfg.p, strategy=cfg.strategy_default, closure=cfg.closure)
    result = ev.lfp(trace=events if cfg.trace else None)
    if cfg.trace:
        for e in events:
            out.text(f"trace {e}")
            out.record(kind="trace", iteration=e.iteration, rule=e.rule, head=render_status_atom(e.head))
    if isinstance(result, Failure):
        out.text(str(result))
        out.record(kind="result", status="failure", reason=result.reason, detail=result.detail)
        return EXIT_SEMANTIC
    for line in _atoms(result):
        out.text(line)
    out.record(kind="result", status="ok", atoms=_atoms(result))
    return EXIT_OK


# ---------------------------------------------------------------- check


@main.command("check")
@click.argument("program", type=click.Path(path_type=Path))
@click.argument("state", type=click.Path(path_type=Path))
@click.argument("candidate", type=click.Path(path_type=Path))
@_common
@click.option("--closure", type=click.Choice(["classic", "extended"]), default="classic")
@click.option("--bound", type=int, default=20, show_default=True, help="Largest set checked for groundedness.")
@click.option("--mode", type=click.Choice(["weak", "strong"]), default="weak", help="p-feasibility mode.")
def check_cmd(program, state, candidate, p, strategy_default, fmt, closure, bound, mode):
    """Classify a candidate status set as feasible, rational and reasonable."""
    cfg = RunConfig(program, state, p, strategy_default, closure, False, fmt)
    _run(cmd_check, cfg, candidate, bound, mode)


def cmd_check(cfg: RunConfig, candidate: Path, bound: int = 20, mode: str = "weak") -> int:
    prog = _load_program(cfg)
    pstate = _load_state(cfg.state)
    ps = parse_status_set(_read(candidate), str(candidate))
    out = Output(cfg.fmt)
    ev = Evaluator(prog, pstate, p=cfg.p, strategy=cfg.strategy_default, closure=cfg.closure)
    report = check_p_feasible(prog, pstate, ps, cfg.p, mode, cfg.closure) if mode == "strong" else ev.check_feasible(ps)
    mark = lambda ok: "yes" if ok else "no"  # noqa: E731
    record = {"kind": "check", "atoms": _atoms(ps)}
    for key, ok in (("ps1", report.ps1_ok), ("ps2", report.ps2_ok), ("ps3", report.ps3_ok), ("ps4", report.ps4_ok)):
        out.text(f"{key.upper()} {mark(ok)}")
        for w in report.witnesses.get(key, ()):
            out.text(f"  {w}")
        record[key] = ok
    grounded = ev.grounded(ps, bound) if report.feasible else False
    rational = report.feasible and grounded
    reasonable = report.feasible and ev.reasonable(ps)
    out.text(f"feasible {mark(report.feasible)}")
    out.text(f"rational {'unknown' if grounded is None else mark(bool(rational))}")
    out.text(f"reasonable {mark(reasonable)}")
    record.update(feasible=report.feasible, rational=None if grounded is None else bool(rational), reasonable=reasonable)
    out.record(**record)
    return EXIT_OK


# ---------------------------------------------------------------- step


@main.command("step")
@click.argument("program", type=click.Path(path_type=Path))
@click.argument("state", type=click.Path(path_type=Path))
@click.argument("action")
@_common
@click.option("--out", "out_path", type=click.Path(path_type=Path), help="Write the new state here.")
@click.option("--force", is_flag=True, help="Execute even when the action is not possibly executable.")
@click.option("--kripke", "show_kripke", is_flag=True, help="Also print the executed structure.")
@click.option("--structure", type=click.Path(path_type=Path),
              help="Structure to execute in with --kripke (default: the product structure).")
@click.option("--gamma", multiple=True, help="Fix a precondition variable, NAME=OBJECT.")
def step_cmd(program, state, action, p, strategy_default, fmt, out_path, force, show_kripke, structure, gamma):
    """Execute one action invocation such as erase(t80)."""
    cfg = RunConfig(program, state, p, strategy_default, "classic", False, fmt)
    _run(cmd_step, cfg, action, out_path, force, show_kripke, gamma, structure)


def cmd_step(cfg: RunConfig, action: str, out_path: Path | None = None, force: bool = False,
             show_kripke: bool = False, gamma_items: tuple = (), structure: Path | None = None) -> int:
    prog = _load_program(cfg)
    pstate = _load_state(cfg.state)
    atom, defn, theta = _invocation(prog, action)
    gamma = _parse_gamma(gamma_items)
    out = Output(cfg.fmt)
    if not force and not possibly_executable(pstate, defn, theta):
        raise NotExecutable(f"{render_action_atom(atom)} is not possibly executable")
    ev = Evaluator(prog, pstate, p=cfg.p, strategy=cfg.strategy_default)
    env = dict(theta, **gamma) if gamma else ev.view.holds(defn.pre, theta)
    if env is None:
        env = theta  # forced without a witness binding in the current state
    new_state = ev.view.execute([(defn, env)]).state
    text = render_prob_state(new_state)
    if out_path is not None:
        atomic_write(out_path, text)
    diff = state_diff(pstate, new_state)
    for line in diff.splitlines():
        out.text(line)
    record = {"kind": "step", "action": render_action_atom(atom), "diff": diff.splitlines(), "state": text}
    if show_kripke:
        base = product_kripke(pstate) if structure is None else parse_kripke(_read(structure), str(structure))
        k = execute_action_kripke(base, defn, theta, gamma, force=force)
        out.text(dump_kripke(k).rstrip("\n"))
        record["kripke"] = dump_kripke(k).splitlines()
    elif out_path is None:
        out.text(text.rstrip("\n"))
    out.record(**record)
    return EXIT_OK


# ---------------------------------------------------------------- kripke


@main.command("kripke")
@click.argument("state", type=click.Path(path_type=Path))
@click.option("--check", "check_path", type=click.Path(path_type=Path), help="Verify a distribution file instead.")
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]), default="text")
def kripke_cmd(state, check_path, fmt):
    """Dump the product structure of a state, or check a given distribution."""
    _run(cmd_kripke, state, check_path, fmt)


def cmd_kripke(state: Path, check_path: Path | None = None, fmt: str = "text") -> int:
    pstate = _load_state(state)
    out = Output(fmt)
    if check_path is None:
        k = product_kripke(pstate)
        out.text(dump_kripke(k).rstrip("\n"))
        out.record(kind="kripke", states=dump_kripke(k).splitlines())
        return EXIT_OK
    k: KripkeStructure = parse_kripke(_read(check_path), str(check_path))
    report = check_compatibility(k, pstate)
    out.text(report.describe())
    out.record(kind="compatibility", ok=report.ok, problems=list(report.problems))
    return EXIT_OK if report.ok else EXIT_SEMANTIC


# ---------------------------------------------------------------- ic-check


@main.command("ic-check")
@click.argument("program", type=click.Path(path_type=Path))
@click.argument("state", type=click.Path(path_type=Path))
@click.argument("action")
@click.option("--p", "p", type=click.FloatRange(0.0, 1.0), default=1.0)
@click.option("--export-lp", type=click.Path(path_type=Path), help="Write the generated linear programs here.")
@click.option("--boole-lower", is_flag=True, help="Add the Boole lower bounds on old-state masses.")
@click.option("--gamma", multiple=True, help="Fix a precondition variable, NAME=OBJECT.")
@click.option("--format", "fmt", type=click.Choice(["text", "json-lines"]), default="text")
def ic_check_cmd(program, state, action, p, export_lp, boole_lower, gamma, fmt):
    """Worst-case probability of each integrity constraint after an action."""
    cfg = RunConfig(program, state, p, "ig", "classic", False, fmt)
    _run(cmd_ic_check, cfg, action, export_lp, boole_lower, gamma)


def cmd_ic_check(cfg: RunConfig, action: str, export_lp: Path | None = None, boole_lower: bool = False,
                 gamma_items: tuple = ()) -> int:
    prog = _load_program(cfg)
    pstate = _load_state(cfg.state)
    _, defn, theta = _invocation(prog, action)
    execution = Execution.single(defn, theta, _parse_gamma(gamma_items))
    ics = prog.integrity_constraints
    out = Output(cfg.fmt)
    if not ics:
        out.text("no integrity constraints")
        out.record(kind="ic", verdicts=[])
        return EXIT_OK
    verdicts = check_ic_p_consistency(pstate, execution, ics, cfg.p, boole_lower=boole_lower)
    if export_lp is not None:
        chunks = []
        for k, ic in enumerate(ics, 1):
            gen = generate_ic_lp(pstate, execution, ic, ics, cfg.p, boole_lower=boole_lower)
            header = f"// constraint {k}: {render_condition(ic.antecedent)} => {render_condition(ic.consequent)}\n"
            chunks.append((header if len(ics) > 1 else "") + gen.lp.to_text())
        atomic_write(export_lp, "".join(chunks))
    for v in verdicts:
        out.text(v.describe())
        out.record(kind="ic", constraint=v.describe().split(":")[0], guaranteed=v.guaranteed, minimum=v.minimum,
                   premise_violated=v.premise_violated, status=v.status)
    return EXIT_OK if all(v.guaranteed for v in verdicts) else EXIT_SEMANTIC


# ---------------------------------------------------------------- parse


_KINDS = {".pap": "program", ".pst": "state", ".kripke": "kripke", ".ps": "status-set"}


@main.command("parse")
@click.argument("path", type=click.Path(path_type=Path))
@click.option("--kind", type=click.Choice(sorted(set(_KINDS.values()))), help="Input kind (default: by extension).")
def parse_cmd(path, kind):
    """Check the syntax of a program, state, status set or structure file."""
    _run(cmd_parse, path, kind)


def cmd_parse(path: Path, kind: str | None = None) -> int:
    kind = kind or _KINDS.get(Path(path).suffix)
    if kind is None:
        raise InputError(f"cannot tell the kind of {path}; pass --kind")
    text = _read(path)
    parser = {"program": parse_program, "state": parse_state, "kripke": parse_kripke, "status-set": parse_status_set}[kind]
    parser(text, str(path))
    click.echo(f"ok: {kind}")
    return EXIT_OK


__all__ = ["RunConfig", "atomic_write", "cmd_check", "cmd_eval", "cmd_ic_check", "cmd_kripke", "cmd_parse", "cmd_step",
           "main"]
