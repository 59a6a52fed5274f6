"""Text format for sessions and global types (``.mps`` files).

A file is a sequence of items::

    P := r!l; P                       # equation (name starts upper-case)
    G := p!r.l; r?p.l; G              # global types use End / p!q.l / p!{...}
    p := P                            # participant (name starts lower-case)
    r := (p?l; end + q?l2; end)
    queue [p->r:l]                    # exactly one per file
    type G                            # optional annotation
    expect untypable InactivityViolation

The full grammar is in ``docs/grammar.md``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from sessionweave.queues import Queue, normalize_queue
from sessionweave.session import Network, Session
from sessionweave.terms import (
    END,
    IN,
    OUT,
    PROCESS,
    TYPE,
    Communication,
    GlobalType,
    Message,
    Node,
    Process,
    Ref,
    Term,
    solve,
)

KEYWORDS = {"end", "End", "queue", "type", "expect"}
VERDICTS = ("typable", "untypable")


class Diagnostic(NamedTuple):
    severity: str
    line: int
    column: int
    end_line: int
    end_column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


class Token(NamedTuple):
    kind: str
    value: str
    line: int
    col: int
    end_line: int
    end_col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<oplus>\(\+\)|⊕)
  | (?P<def>:=)
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z0-9_]+)
  | (?P<sym>[!?;()+{},.\[\]:])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError([Diagnostic("error", line, col, line, col + 1, f"unexpected character {text[pos]!r}")])
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                tokens.append(Token(value if kind == "sym" else kind, value, line, col, line, col + len(value)))
            col += len(value)
        pos = m.end()
    tokens.append(Token("eof", "", line, col, line, col))
    return tokens


@dataclass
class SourceFile:
    definitions: dict[str, Term]
    participants: list[str]
    session: Session
    expected_type: GlobalType | None = None
    expected_verdict: str | None = None
    expected_reason: str | None = None
    type_names: list[str] = field(default_factory=list)
    process_names: list[str] = field(default_factory=list)


@dataclass
class _Def:
    name: str
    expr: object
    tok: Token


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.diags: list[Diagnostic] = []
        self.anon = 0
        self.refs: list[tuple[str, Token]] = []
        self.node_sort: dict[int, str] = {}

    # -- token helpers

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, tok: Token, msg: str):
        raise ParseError(self.diags + [Diagnostic("error", tok.line, tok.col, tok.end_line, tok.end_col, msg)])

    def error(self, tok: Token, msg: str):
        self.diags.append(Diagnostic("error", tok.line, tok.col, tok.end_line, tok.end_col, msg))

    def expect(self, kind: str, what: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind:
            self.fail(t, f"expected {what or repr(kind)}, found {t.value or 'end of input'!r}")
        return self.next()

    def ident(self, what: str) -> Token:
        t = self.peek()
        if t.kind != "ident" or t.value in ("end", "End"):
            self.fail(t, f"expected {what}, found {t.value or 'end of input'!r}")
        return self.next()

    # -- expressions

    def expr(self):
        """Process or global-type expression; the sort follows from the syntax."""
        t = self.peek()
        if t.kind == "(":
            return self.proc_expr()
        if t.kind == "ident":
            if t.value == "end":
                return self.proc_expr()
            if t.value == "End":
                return self.type_expr()
            nxt = self.peek(1)
            if nxt.kind in ("!", "?"):
                after = self.peek(2)
                if after.kind == "{" or (after.kind == "ident" and self.peek(3).kind == "."):
                    return self.type_expr()
                return self.proc_expr()
            return self.ref()
        self.fail(t, f"expected an expression, found {t.value or 'end of input'!r}")

    def ref(self):
        t = self.ident("a name")
        if t.value in KEYWORDS:
            self.fail(t, f"keyword {t.value!r} cannot be used as a name")
        self.refs.append((t.value, t))
        return Ref(t.value)

    def proc_expr(self):
        t = self.peek()
        if t.kind == "ident" and t.value == "end":
            self.next()
            return Node(PROCESS, END, None, ())
        if t.kind == "(":
            return self.proc_choice()
        if t.kind == "ident":
            if self.peek(1).kind in ("!", "?"):
                kind, branch = self.proc_prefix()
                return self.node(PROCESS, kind, None, [branch], t)
            return self.ref()
        self.fail(t, f"expected a process, found {t.value or 'end of input'!r}")

    def proc_prefix(self):
        partner = self.ident("a participant")
        op = self.next()
        label = self.ident("a label")
        cont = Node(PROCESS, END, None, ())
        if self.peek().kind == ";":
            self.next()
            cont = self.proc_expr()
        kind = OUT if op.kind == "!" else IN
        return kind, (partner.value, label.value, cont, partner)

    def proc_choice(self):
        open_tok = self.expect("(")
        kind, first = self.proc_prefix()
        branches = [first]
        sep = None
        while self.peek().kind in ("+", "oplus"):
            s = self.next()
            if sep is None:
                sep = s.kind
            elif s.kind != sep:
                self.fail(s, "cannot mix '+' and '(+)' in one choice")
            k, br = self.proc_prefix()
            if k != kind:
                self.fail(br[3], "a choice cannot mix inputs and outputs")
            branches.append(br)
        if sep == "+" and kind == OUT:
            self.fail(open_tok, "output choices are separated by '(+)'")
        if sep == "oplus" and kind == IN:
            self.fail(open_tok, "input choices are separated by '+'")
        self.expect(")", "')'")
        return self.node(PROCESS, kind, None, branches, open_tok)

    def type_expr(self):
        t = self.peek()
        if t.kind == "ident" and t.value == "End":
            self.next()
            return Node(TYPE, END, None, ())
        if t.kind != "ident":
            self.fail(t, f"expected a global type, found {t.value or 'end of input'!r}")
        if self.peek(1).kind not in ("!", "?"):
            return self.ref()
        player = self.ident("a participant")
        op = self.next()
        kind = OUT if op.kind == "!" else IN
        if self.peek().kind == "{":
            self.next()
            branches = [self.type_branch()]
            while self.peek().kind == ",":
                self.next()
                branches.append(self.type_branch())
            self.expect("}", "'}'")
        else:
            branches = [self.type_branch()]
        return self.node(TYPE, kind, player.value, branches, player)

    def type_branch(self):
        partner = self.ident("a participant")
        self.expect(".", "'.'")
        label = self.ident("a label")
        cont = Node(TYPE, END, None, ())
        if self.peek().kind == ";":
            self.next()
            cont = self.type_expr()
        return (partner.value, label.value, cont, partner)

    def node(self, sort, kind, player, branches, tok):
        seen = set()
        clean = []
        for partner, label, cont, ptok in branches:
            if (partner, label) in seen:
                sym = "." if sort == TYPE else ("!" if kind == OUT else "?")
                self.error(ptok, f"duplicate branch {partner}{sym}{label}")
                continue
            if player is not None and partner == player:
                self.error(ptok, f"player {player} cannot communicate with itself")
                continue
            seen.add((partner, label))
            clean.append((partner, label, cont))
        return Node(sort, kind, player, tuple(clean))

    # -- file level

    def queue_lit(self) -> list[Message]:
        self.expect("[", "'['")
        msgs = []
        if self.peek().kind != "]":
            msgs.append(self.message())
            while self.peek().kind == ",":
                self.next()
                msgs.append(self.message())
        self.expect("]", "']'")
        return msgs

    def message(self) -> Message:
        s = self.ident("a sender")
        self.expect("arrow", "'->'")
        r = self.ident("a receiver")
        self.expect(":", "':'")
        l = self.ident("a label")
        return Message(s.value, l.value, r.value)

    def file(self) -> SourceFile:
        defs: list[_Def] = []
        queue: list[Message] | None = None
        type_expr = None
        verdict = reason = None
        while self.peek().kind != "eof":
            t = self.peek()
            if t.kind != "ident":
                self.fail(t, f"expected a definition, found {t.value!r}")
            if self.peek(1).kind == "def":
                if t.value in KEYWORDS:
                    self.fail(t, f"keyword {t.value!r} cannot be defined")
                self.next()
                self.next()
                defs.append(_Def(t.value, self.expr(), t))
            elif t.value == "queue":
                self.next()
                if queue is not None:
                    self.error(t, "more than one session queue")
                queue = self.queue_lit()
            elif t.value == "type":
                self.next()
                if type_expr is not None:
                    self.error(t, "more than one type annotation")
                type_expr = (self.type_expr(), t)
            elif t.value == "expect":
                self.next()
                v = self.ident("'typable' or 'untypable'")
                if v.value not in VERDICTS:
                    self.fail(v, "expected 'typable' or 'untypable'")
                verdict = v.value
                if verdict == "untypable" and self.peek().kind == "ident" and self.peek(1).kind != "def":
                    if self.peek().value not in KEYWORDS:
                        r = self.next()
                        from sessionweave.typecheck import NO_TYPE_FOUND, REASONS

                        if r.value not in REASONS + (NO_TYPE_FOUND,):
                            self.error(r, f"unknown failure reason {r.value}")
                        reason = r.value
            else:
                self.fail(t, f"expected a definition, found {t.value!r}")
        if queue is None:
            self.error(self.peek(), "missing session: no 'queue [...]' block")
        return self._resolve(defs, queue or [], type_expr, verdict, reason)

    def _resolve(self, defs, queue, type_expr, verdict, reason) -> SourceFile:
        table: dict[str, _Def] = {}
        for d in defs:
            if d.name in table:
                what = "participant" if _is_participant(d.name) else "definition"
                self.error(d.tok, f"duplicate {what} {d.name}")
                continue
            table[d.name] = d
        for name, tok in self.refs:
            if name not in table:
                self.error(tok, f"undefined name {name}")
        if self.diags:
            raise ParseError(self.diags)

        sorts: dict[str, str] = {}

        def sort_of(name, chain=()):
            if name in sorts:
                return sorts[name]
            if name in chain:
                self.fail(table[name].tok, "unguarded recursion through " + " -> ".join(chain + (name,)))
            e = table[name].expr
            s = e.sort if isinstance(e, Node) else sort_of(e.name, chain + (name,))
            sorts[name] = s
            return s

        for name in table:
            sort_of(name)
        self._check_sorts(table, sorts, type_expr)
        for name, d in table.items():
            if _is_participant(name) and sorts[name] != PROCESS:
                self.error(d.tok, f"participant {name} must be assigned a process")
        if self.diags:
            raise ParseError(self.diags)

        equations = {name: d.expr for name, d in table.items()}
        if type_expr is not None:
            equations[" type"] = type_expr[0]
        solved = solve(equations)
        participants = [n for n in table if _is_participant(n)]
        network = Network((p, solved[p]) for p in participants)
        return SourceFile(
            definitions={n: solved[n] for n in table},
            participants=participants,
            session=Session(network, normalize_queue(queue)),
            expected_type=solved.get(" type"),  # type: ignore[arg-type]
            expected_verdict=verdict,
            expected_reason=reason,
            type_names=[n for n in table if sorts[n] == TYPE],
            process_names=[n for n in table if sorts[n] == PROCESS and not _is_participant(n)],
        )

    def _check_sorts(self, table, sorts, type_expr):
        # a name used as a continuation must have the sort of the enclosing choice
        def walk(e, tok):
            if isinstance(e, Node):
                for _, _, c in e.branches:
                    if isinstance(c, Ref) and sorts[c.name] != e.sort:
                        self.error(table[c.name].tok, f"{c.name} is used as a {_sort_word(e.sort)} but defined as a {_sort_word(sorts[c.name])}")
                    walk(c, tok)

        for d in table.values():
            walk(d.expr, d.tok)
        if type_expr is not None:
            e, tok = type_expr
            walk(e, tok)
            if isinstance(e, Ref) and sorts[e.name] != TYPE:
                self.error(tok, f"{e.name} is not a global type")


def _sort_word(sort: str) -> str:
    return "process" if sort == PROCESS else "global type"


def _is_participant(name: str) -> bool:
    return name[0].islower()


def parse(text: str) -> SourceFile:
    """Parse a whole ``.mps`` file.  Raises :class:`ParseError` with diagnostics."""
    return _Parser(text).file()


def parse_file(path) -> SourceFile:
    with open(path, encoding="utf-8") as f:
        return parse(f.read())


def _parse_term(text: str, sort: str) -> Term:
    p = _Parser(text)
    if p.peek().kind == "ident" and p.peek(1).kind == "def":
        defs = []
        while p.peek().kind != "eof":
            name = p.ident("a name")
            p.expect("def", "':='")
            defs.append(_Def(name.value, p.proc_expr() if sort == PROCESS else p.type_expr(), name))
        names = {d.name for d in defs}
        for name, tok in p.refs:
            if name not in names:
                p.error(tok, f"undefined name {name}")
        if p.diags:
            raise ParseError(p.diags)
        try:
            return solve({d.name: d.expr for d in defs})[defs[0].name]
        except ValueError as e:
            p.fail(defs[0].tok, str(e))
    e = p.proc_expr() if sort == PROCESS else p.type_expr()
    if p.peek().kind != "eof":
        p.fail(p.peek(), f"unexpected {p.peek().value!r} after expression")
    if isinstance(e, Ref):
        p.fail(p.toks[0], f"undefined name {e.name}")
    if p.diags:
        raise ParseError(p.diags)
    for name, tok in p.refs:
        p.error(tok, f"undefined name {name}")
    if p.diags:
        raise ParseError(p.diags)
    return solve({"": e})[""]


def parse_process(text: str) -> Process:
    return _parse_term(text, PROCESS)  # type: ignore[return-value]


def parse_global_type(text: str) -> GlobalType:
    return _parse_term(text, TYPE)  # type: ignore[return-value]


def parse_queue(text: str) -> Queue:
    p = _Parser(text)
    msgs = p.queue_lit()
    p.expect("eof", "end of input")
    return normalize_queue(msgs)


def parse_session(text: str) -> Session:
    return parse(text).session


def parse_communication(text: str) -> Communication:
    m = re.fullmatch(r"\s*([A-Za-z0-9_]+)\s*([!?])\s*([A-Za-z0-9_]+)\s*\.\s*([A-Za-z0-9_]+)\s*", text)
    if m is None:
        raise ParseError([Diagnostic("error", 1, 1, 1, len(text) + 1, f"not a communication: {text!r}")])
    player, op, partner, label = m.groups()
    return Communication(player, OUT if op == "!" else IN, partner, label)


def parse_trace(text: str) -> tuple[Communication, ...]:
    """Communications separated by whitespace, commas or ``·``."""
    parts = [x for x in re.split(r"[\s,·]+", text) if x]
    return tuple(parse_communication(x) for x in parts)


# --------------------------------------------------------------------------
# pretty printing


def _loop_heads(roots: Iterable[Term]) -> list[Term]:
    """Targets of back edges of a depth-first search, in discovery order."""
    heads: list[Term] = []
    state: dict[Term, int] = {}
    for root in roots:
        if root in state:
            continue
        stack = [(root, 0)]
        state[root] = 1
        while stack:
            node, i = stack.pop()
            if i < len(node.branches):
                stack.append((node, i + 1))
                child = node.branches[i].cont
                s = state.get(child)
                if s is None:
                    state[child] = 1
                    stack.append((child, 0))
                elif s == 1 and child not in heads:
                    heads.append(child)
            else:
                state[node] = 2
    return heads


def _expr(t: Term, names: dict[Term, str], top: bool = False) -> str:
    if t in names and not top:
        return names[t]
    if t.kind == END:
        return "end" if t.sort == PROCESS else "End"
    if t.sort == PROCESS:
        sym = "!" if t.kind == OUT else "?"
        parts = [f"{b.partner}{sym}{b.label}; {_expr(b.cont, names)}" for b in t.branches]
        if len(parts) == 1:
            return parts[0]
        sep = " (+) " if t.kind == OUT else " + "
        return "(" + sep.join(parts) + ")"
    sym = "!" if t.kind == OUT else "?"
    parts = [f"{b.partner}.{b.label}; {_expr(b.cont, names)}" for b in t.branches]
    if len(parts) == 1:
        return f"{t.player}{sym}{parts[0]}"
    return f"{t.player}{sym}{{" + ", ".join(parts) + "}"


def _names_for(heads: list[Term], prefix: str) -> dict[Term, str]:
    return {h: f"{prefix}{k}" for k, h in enumerate(heads, 1)}


def pretty_term(t: Term) -> str:
    heads = _loop_heads([t])
    if not heads:
        return _expr(t, {})
    prefix = "P" if t.sort == PROCESS else "G"
    names = _names_for(heads, prefix)
    order = list(heads)
    if t not in names:
        names[t] = prefix
        order.insert(0, t)
    else:
        order.remove(t)
        order.insert(0, t)
    return "\n".join(f"{names[h]} := {_expr(h, names, top=True)}" for h in order)


def pretty_queue(q: Iterable[Message]) -> str:
    return "[" + ", ".join(str(Message(*m)) for m in normalize_queue(q)) + "]"


def pretty_session(s: Session) -> str:
    """File-form text of a session: equations, participants, queue."""
    roots = [proc for _, proc in s.network.items_sorted()]
    names = _names_for(_loop_heads(roots), "P")
    lines = [f"{n} := {_expr(h, names, top=True)}" for h, n in names.items()]
    lines += [f"{p} := {_expr(proc, names)}" for p, proc in s.network.items_sorted()]
    lines.append(f"queue {pretty_queue(s.queue)}")
    return "\n".join(lines)


def pretty_file(s: Session, gtype: GlobalType | None = None, expect: str | None = None) -> str:
    """A complete ``.mps`` file: the session, an optional type annotation and expectation."""
    lines = [pretty_session(s)]
    if gtype is not None:
        heads = _loop_heads([gtype])
        if heads:
            names = _names_for(heads, "G")
            lines += [f"{n} := {_expr(h, names, top=True)}" for h, n in names.items()]
        else:
            names = {}
        lines.append(f"type {_expr(gtype, names)}")
    if expect:
        lines.append(f"expect {expect}")
    return "\n".join(lines) + "\n"


def pretty_session_inline(s: Session) -> str:
    """One-line form ``p::P || q::Q || [queue]`` (with a ``where`` clause for loops)."""
    roots = [proc for _, proc in s.network.items_sorted()]
    names = _names_for(_loop_heads(roots), "P")
    parts = [f"{p}::{_expr(proc, names)}" for p, proc in s.network.items_sorted()]
    text = " || ".join(parts + [pretty_queue(s.queue)])
    if names:
        text += " where " + ", ".join(f"{n} := {_expr(h, names, top=True)}" for h, n in names.items())
    return text


def pretty_type_inline(g: GlobalType) -> str:
    names = _names_for(_loop_heads([g]), "G")
    text = _expr(g, names)
    if names:
        text += " where " + ", ".join(f"{n} := {_expr(h, names, top=True)}" for h, n in names.items())
    return text


def pretty(x) -> str:
    """Text form of a term, queue, session, communication or trace."""
    if isinstance(x, Term):
        return pretty_term(x)
    if isinstance(x, Session):
        return pretty_session(x)
    if isinstance(x, Communication):
        return str(x)
    if isinstance(x, Message):
        return str(x)
    if isinstance(x, tuple) and all(isinstance(m, Message) for m in x):
        return pretty_queue(x)
    if isinstance(x, tuple) and all(isinstance(c, Communication) for c in x):
        return " ".join(str(c) for c in x)
    raise TypeError(f"cannot pretty-print {type(x).__name__}")
