"""Recursive-descent parser for programs (.pap), states (.pst), queries,
status sets and Kripke structure dumps."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable

from .annotations import UnsafeConditionError, check_safety
from .model import (
    ANNOTATION_FUNCTIONS,
    INFIX_TO_FUNCTION,
    MODALITIES,
    STRATEGIES,
    ActionAtom,
    ActionConstraint,
    ActionDef,
    AnnApply,
    AnnConst,
    AnnVar,
    Annotation,
    AnnotatedCondition,
    Arith,
    CodeCall,
    CodeCallAtom,
    CodeCallCondition,
    Comparison,
    Const,
    FieldAccess,
    IntegrityConstraint,
    ModelError,
    Program,
    RandomVariable,
    Record,
    Rule,
    StatusAtom,
    TRUE,
    Var,
    condition_vars,
    term_vars,
)
from .state import CoherenceError, ProbState


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


class ParseError(ValueError):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span


@dataclass(frozen=True)
class Token:
    kind: str  # ident, number, string, punct, eof
    text: str
    line: int
    col: int
    spaced: bool  # whitespace (or start of input) right before the token


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<number>\d+\.\d+(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct><-|<~|=>|<=|>=|!=|[()\[\]{},.:&@=<>+\-*/^;\#])
    """,
    re.VERBOSE,
)


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    spaced = True
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", SourceSpan(file, line, pos - line_start + 1))
        kind = m.lastgroup
        chunk = m.group()
        if kind == "ws":
            spaced = True
        else:
            tokens.append(Token(kind, chunk, line, pos - line_start + 1, spaced))
            spaced = False
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1, True))
    return tokens


def _is_var_name(name: str) -> bool:
    return name[0].isupper() or name[0] == "_"


class _Parser:
    def __init__(self, text: str, file: str, default_strategy: str = "ig", bare_constants: bool = False):
        self.toks = tokenize(text, file)
        self.i = 0
        self.file = file
        self.opens: list[Token] = []
        self.default_strategy = "in_" if default_strategy == "in" else default_strategy
        if self.default_strategy not in STRATEGIES:
            raise ParseError(f"unknown strategy {default_strategy!r}", SourceSpan(file, 1, 1))
        # in state and dump files there are no variables, so capitalised names are constants
        self.bare_constants = bare_constants

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def span(self, tok: Token | None = None) -> SourceSpan:
        tok = tok or self.tok
        return SourceSpan(self.file, tok.line, tok.col)

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        if tok is None and self.tok.kind == "eof" and self.opens:
            opener = self.opens[-1]
            return ParseError(f"unclosed {opener.text!r}: {message}", self.span(opener))
        return ParseError(message, self.span(tok))

    def at(self, text: str) -> bool:
        return self.tok.kind in ("punct", "ident") and self.tok.text == text

    def _advance(self) -> Token:
        tok = self.tok
        self.i += 1
        if tok.kind == "punct":
            if tok.text in "([{":
                self.opens.append(tok)
            elif tok.text in ")]}" and self.opens:
                self.opens.pop()
        return tok

    def accept(self, text: str) -> bool:
        if self.at(text):
            self._advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self._advance()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected {what}, found {self.tok.text or 'end of input'!r}")
        tok = self.tok
        self.i += 1
        return tok

    def number(self) -> float | int:
        neg = self.accept("-")
        if self.tok.kind != "number":
            raise self.error(f"expected a number, found {self.tok.text or 'end of input'!r}")
        text = self.tok.text
        self.i += 1
        value = float(text) if any(c in text for c in ".eE") else int(text)
        return -value if neg else value

    # -- terms
    def term(self):
        left = self.mul_term()
        while self.tok.kind == "punct" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            left = Arith(op, left, self.mul_term())
        return left

    def mul_term(self):
        left = self.unary_term()
        while self.tok.kind == "punct" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            left = Arith(op, left, self.unary_term())
        return left

    def unary_term(self):
        if self.at("-"):
            self.i += 1
            inner = self.unary_term()
            if isinstance(inner, Const) and isinstance(inner.value, (int, float)):
                return Const(-inner.value)
            return Arith("-", Const(0), inner)
        return self.postfix_term()

    def postfix_term(self):
        base = self.primary_term()
        # field access: a dot glued to both neighbours
        while self.at(".") and not self.tok.spaced and self.peek().kind == "ident" and not self.peek().spaced:
            self.i += 1
            base = FieldAccess(base, self.ident().text)
        return base

    def primary_term(self):
        tok = self.tok
        if tok.kind == "number":
            return Const(self.number())
        if tok.kind == "string":
            self.i += 1
            return Const(json.loads(tok.text))
        if tok.kind == "ident":
            if tok.text == "rec" and self.peek().text == "{":
                return Const(self.record())
            self.i += 1
            if _is_var_name(tok.text) and not self.bare_constants:
                return Var(tok.text)
            return Const(tok.text)
        if self.accept("("):
            t = self.term()
            self.expect(")")
            return t
        raise self.error(f"expected a term, found {tok.text or 'end of input'!r}")

    def record(self) -> Record:
        self.expect("rec")
        self.expect("{")
        fields = []
        if not self.at("}"):
            while True:
                name = self.ident("field name").text
                self.expect(":")
                fields.append((name, self.object_value()))
                if not self.accept(","):
                    break
        self.expect("}")
        try:
            return Record(tuple(fields))
        except ModelError as exc:
            raise self.error(str(exc)) from None

    def object_value(self):
        start = self.tok
        t = self.term()
        if not isinstance(t, Const):
            raise self.error("expected a constant object", start)
        return t.value

    # -- code calls and conditions
    def code_call(self) -> CodeCall:
        domain = self.ident("code-call domain").text
        self.expect(".")
        function = self.ident("code-call function").text
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.term())
                if not self.accept(","):
                    break
        self.expect(")")
        return CodeCall(domain, function, tuple(args))

    def atomic(self):
        tok = self.tok
        if tok.kind == "ident" and tok.text in ("in", "notin") and self.peek().text == "(":
            self.i += 1
            self.expect("(")
            subject = self.term()
            self.expect(",")
            cc = self.code_call()
            self.expect(")")
            return CodeCallAtom(tok.text, subject, cc)
        left = self.term()
        op = self.tok
        if op.kind != "punct" or op.text not in ("=", "!=", "<", ">", "<=", ">="):
            raise self.error(f"expected a comparison operator, found {op.text or 'end of input'!r}")
        self.i += 1
        return Comparison(op.text, left, self.term())

    def condition(self, allow_true: bool = False) -> CodeCallCondition:
        if allow_true and self.at("true") and self.peek().text not in ("=", "!=", "<", ">", "<=", ">="):
            self.i += 1
            return TRUE
        atoms = [self.atomic()]
        while self.accept("&"):
            atoms.append(self.atomic())
        return CodeCallCondition(tuple(atoms))

    # -- annotations
    def annotation(self) -> Annotation:
        self.expect("[")
        lo = self.ann_expr()
        self.expect(",")
        hi = self.ann_expr()
        self.expect("]")
        return Annotation(lo, hi)

    def ann_expr(self):
        left = self.ann_mul()
        while self.tok.text in ("+", "-") and self.tok.kind == "punct":
            op = self.tok.text
            self.i += 1
            left = AnnApply(INFIX_TO_FUNCTION[op], (left, self.ann_mul()))
        return left

    def ann_mul(self):
        left = self.ann_pow()
        while self.tok.text in ("*", "/") and self.tok.kind == "punct":
            op = self.tok.text
            self.i += 1
            left = AnnApply(INFIX_TO_FUNCTION[op], (left, self.ann_pow()))
        return left

    def ann_pow(self):
        base = self.ann_primary()
        if self.accept("^"):
            return AnnApply("pow", (base, self.ann_pow()))
        return base

    def ann_primary(self):
        tok = self.tok
        if tok.kind == "number" or tok.text == "-":
            return AnnConst(self.number())
        if self.accept("("):
            inner = self.ann_expr()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            self.i += 1
            if self.at("("):
                if tok.text not in ANNOTATION_FUNCTIONS:
                    raise self.error(f"unknown annotation function {tok.text!r}", tok)
                self.expect("(")
                args = [self.ann_expr()]
                while self.accept(","):
                    args.append(self.ann_expr())
                self.expect(")")
                try:
                    return AnnApply(tok.text, tuple(args))
                except ModelError as exc:
                    raise self.error(str(exc), tok) from None
            return AnnVar(tok.text)
        raise self.error(f"expected an annotation item, found {tok.text or 'end of input'!r}")

    def strategy(self) -> str:
        tok = self.ident("strategy")
        if tok.text == "in":
            return "in_"
        if tok.text not in STRATEGIES:
            raise self.error(f"unknown strategy {tok.text!r} (use ig, pc, nc or in)", tok)
        return tok.text

    def annotated(self) -> AnnotatedCondition:
        cond = self.condition()
        if self.accept(":"):
            ann = self.annotation()
            self.expect("@")
            return AnnotatedCondition(cond, ann, self.strategy())
        return AnnotatedCondition(cond, Annotation(AnnConst(1.0), AnnConst(1.0)), self.default_strategy)

    # -- status atoms
    def at_status_atom(self) -> bool:
        return (self.tok.kind == "ident" and self.tok.text in MODALITIES
                and self.peek().kind == "ident" and self.peek(2).text == "(")

    def args_list(self) -> tuple:
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.term())
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(args)

    def status_atom(self) -> StatusAtom:
        if not self.at_status_atom():
            raise self.error(f"expected a status atom (P, F, W, Do or O followed by an action), found {self.tok.text or 'end of input'!r}")
        modality = self.ident().text
        name = self.ident("action name").text
        return StatusAtom(modality, name, self.args_list())

    def action_atom(self) -> ActionAtom:
        name = self.ident("action name").text
        return ActionAtom(name, self.args_list())

    # -- statements
    def rule(self) -> Rule:
        start = self.tok
        head = self.status_atom()
        conds, pos, neg = [], [], []
        if self.accept("<-"):
            if not self.at("."):
                while True:
                    if self.at("not") and not self.at_status_atom():
                        self.i += 1
                        neg.append(self.status_atom())
                    elif self.at_status_atom():
                        pos.append(self.status_atom())
                    else:
                        conds.append(self.annotated())
                    if not self.accept(","):
                        break
        self.expect(".")
        rule = Rule(head, tuple(conds), tuple(pos), tuple(neg))
        _check_rule_safety(rule, self.span(start))
        return rule

    def action_def(self) -> ActionDef:
        start = self.expect("action")
        name = self.ident("action name").text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                p = self.ident("parameter")
                if not _is_var_name(p.text):
                    raise self.error("action parameters must be variables", p)
                params.append(p.text)
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect("{")
        pre, add, dele = TRUE, [], []
        while not self.at("}"):
            key = self.ident("pre, add or del")
            self.expect(":")
            if key.text == "pre":
                pre = TRUE if (self.at(";") or self.at("}")) else self.condition(allow_true=True)
            elif key.text in ("add", "del"):
                items = []
                while not (self.at(";") or self.at("}")):
                    atom = self.atomic()
                    if not isinstance(atom, CodeCallAtom) or atom.polarity != "in":
                        raise self.error("effects must be in(...) atoms", key)
                    items.append(atom)
                    if not (self.accept(",") or self.accept("&")):
                        break
                (add if key.text == "add" else dele).extend(items)
            else:
                raise self.error(f"unknown action section {key.text!r}", key)
            if not self.accept(";"):
                break
        self.expect("}")
        try:
            action = ActionDef(name, tuple(params), pre, tuple(add), tuple(dele))
        except ModelError as exc:
            raise self.error(str(exc), start) from None
        try:
            bound = check_safety(pre, params)
        except UnsafeConditionError as exc:
            raise ParseError(f"unsafe precondition of {name}: {exc}", self.span(start)) from None
        for atom in action.add + action.delete:
            loose = [v for v in _atom_vars(atom) if v not in bound]
            if loose:
                raise ParseError(f"effect of {name} uses unbound variable {loose[0]}", self.span(start))
        return action

    def constraint(self) -> ActionConstraint:
        start = self.expect("{")
        blocked = [self.action_atom()]
        while self.accept(","):
            blocked.append(self.action_atom())
        self.expect("}")
        self.expect("<~")
        guard = TRUE if self.at(".") else self.condition(allow_true=True)
        self.expect(".")
        try:
            check_safety(guard, ())
        except UnsafeConditionError as exc:
            raise ParseError(f"unsafe action constraint: {exc}", self.span(start)) from None
        return ActionConstraint(tuple(blocked), guard)

    def integrity(self) -> IntegrityConstraint:
        start = self.expect("ic")
        ante = TRUE if self.at("=>") else self.condition(allow_true=True)
        self.expect("=>")
        cons_start = self.tok
        cons = self.condition()
        self.expect(".")
        if len(cons.conjuncts) != 1:
            raise self.error("an integrity constraint has a single consequent atom", cons_start)
        try:
            check_safety(cons, check_safety(ante, ()))
        except UnsafeConditionError as exc:
            raise ParseError(f"unsafe integrity constraint: {exc}", self.span(start)) from None
        return IntegrityConstraint(ante, cons)

    def program(self) -> Program:
        rules, actions, acs, ics = [], {}, [], []
        while self.tok.kind != "eof":
            if self.at("action") and self.peek().kind == "ident":
                start = self.tok
                a = self.action_def()
                if a.name in actions:
                    raise self.error(f"action {a.name} defined twice", start)
                actions[a.name] = a
            elif self.at("{"):
                acs.append(self.constraint())
            elif self.at("ic") and not self.at_status_atom():
                ics.append(self.integrity())
            else:
                rules.append(self.rule())
        return Program(tuple(rules), actions, tuple(acs), tuple(ics))

    # -- states
    def state(self) -> ProbState:
        entries: dict = {}
        while self.tok.kind != "eof":
            start = self.tok
            cc = self.code_call()
            if not cc.is_ground():
                raise self.error("state entries need ground code calls", start)
            if cc in entries:
                raise self.error("code call listed twice", start)
            self.expect("=")
            self.expect("{")
            rvs = []
            if not self.at("}"):
                while True:
                    rvs.append(self.rv_literal())
                    if not self.accept(","):
                        break
            self.expect("}")
            self.accept(";")
            try:
                ProbState({cc: rvs})
            except CoherenceError as exc:
                raise self.error(str(exc), start) from None
            except ModelError as exc:
                raise self.error(str(exc), start) from None
            entries[cc] = rvs
        return ProbState(entries)

    def rv_literal(self) -> RandomVariable:
        start = self.tok
        if self.at("rv") and self.peek().text == "{":
            self.i += 1
            self.expect("{")
            items = []
            if not self.at("}"):
                while True:
                    obj = self.object_value()
                    self.expect(":")
                    items.append((obj, float(self.number())))
                    if not self.accept(","):
                        break
            self.expect("}")
        else:
            items = [(self.object_value(), 1.0)]
        try:
            return RandomVariable(items)
        except ModelError as exc:
            raise self.error(str(exc), start) from None

    def done(self) -> None:
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")


def _atom_vars(atom: CodeCallAtom) -> list[str]:
    out = list(term_vars(atom.subject))
    for a in atom.call.args:
        out.extend(term_vars(a))
    return out


def _check_rule_safety(rule: Rule, span: SourceSpan) -> None:
    """Γ binds left to right; positive status literals may bind further
    variables by matching the status set; head and negated literals must be bound."""
    bound: set[str] = set()
    try:
        for item in rule.body_prob:
            cond = item.condition if isinstance(item, AnnotatedCondition) else item
            bound = check_safety(cond, bound)
    except UnsafeConditionError as exc:
        raise ParseError(f"unsafe rule: {exc}", span) from None
    for atom in rule.body_pos:
        for a in atom.args:
            if not isinstance(a, (Var, Const)) and any(v not in bound for v in term_vars(a)):
                raise ParseError("unsafe rule: positive status literal arguments must be variables or ground", span)
            bound.update(term_vars(a))
    for atom in (rule.head, *rule.body_neg):
        for a in atom.args:
            for v in term_vars(a):
                if v not in bound:
                    raise ParseError(f"unsafe rule: variable {v} is never bound", span)


def _run(text: str, file: str, fn: Callable[[_Parser], object], **kw):
    p = _Parser(text, file, **kw)
    try:
        value = fn(p)
        p.done()
    except ModelError as exc:
        raise p.error(str(exc)) from None
    return value


def parse_program(text: str, file: str = "<program>", default_strategy: str = "ig") -> Program:
    return _run(text, file, _Parser.program, default_strategy=default_strategy)


def parse_state(text: str, file: str = "<state>") -> ProbState:
    return _run(text, file, _Parser.state, bare_constants=True)


def parse_query(text: str, file: str = "<query>", default_strategy: str = "ig"):
    """A status atom or an (optionally annotated) condition."""
    def go(p: _Parser):
        if p.at_status_atom():
            return p.status_atom()
        return p.annotated()
    return _run(text, file, go, default_strategy=default_strategy)


def parse_condition(text: str, file: str = "<condition>") -> CodeCallCondition:
    return _run(text, file, lambda p: p.condition(allow_true=True))


def parse_rule(text: str, file: str = "<rule>", default_strategy: str = "ig") -> Rule:
    return _run(text, file, _Parser.rule, default_strategy=default_strategy)


def parse_object(text: str, file: str = "<object>"):
    """A single constant object; capitalized names are read as strings."""
    return _run(text, file, _Parser.object_value, bare_constants=True)


def parse_action_atom(text: str, file: str = "<action>") -> ActionAtom:
    return _run(text, file, _Parser.action_atom)


def parse_status_set(text: str, file: str = "<status set>") -> frozenset[StatusAtom]:
    """Status atoms separated by commas or newlines, optionally inside braces."""
    def go(p: _Parser):
        braced = p.accept("{")
        atoms = []
        while p.tok.kind != "eof" and not p.at("}"):
            atom = p.status_atom()
            if not atom.is_ground():
                raise p.error("status sets contain ground atoms only")
            atoms.append(atom)
            p.accept(",")
        if braced:
            p.expect("}")
        return frozenset(atoms)
    return _run(text, file, go)


def parse_kripke(text: str, file: str = "<kripke>"):
    """Read the ``#i p=<prob> {call=obj, ...}`` dump format."""
    from .kripke import KripkeStructure
    from .state import det_from_pairs

    def go(p: _Parser):
        states, probs = [], []
        while p.tok.kind != "eof":
            p.expect("#")
            p.number()
            key = p.ident("p")
            if key.text != "p":
                raise p.error("expected p=<probability>", key)
            p.expect("=")
            probs.append(float(p.number()))
            p.expect("{")
            pairs = []
            if not p.at("}"):
                while True:
                    cc = p.code_call()
                    p.expect("=")
                    pairs.append((cc, p.object_value()))
                    if not p.accept(","):
                        break
            p.expect("}")
            states.append(det_from_pairs(pairs))
        return KripkeStructure(tuple(states), tuple(probs))
    return _run(text, file, go, bare_constants=True)
