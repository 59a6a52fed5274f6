"""Typing of sessions against global types (rules End, Out, In).

Derivations are built goal-directed from the root of the global type.  The
rules are syntax directed, so there is no backtracking: the first violated
side condition is the answer.  Cyclic types are handled coinductively: a
judgement that already occurs on the current derivation path is accepted
with a ``CoinductiveLoop`` leaf.
"""

from __future__ import annotations

import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterable

from sessionweave.analysis import boundedness, inactive, players_of_type
from sessionweave.queues import Queue, dequeue, enqueue, normalize_queue, rm
from sessionweave.session import Network, Session, players_of_network
from sessionweave.terms import (
    END,
    IN,
    OUT,
    TYPE,
    GlobalType,
    Message,
    Node,
    Process,
    Ref,
    solve,
)
from sessionweave.typesem import UnboundedTypeError

END_RULE = "End"
OUT_RULE = "Out"
IN_RULE = "In"
LOOP_RULE = "CoinductiveLoop"

ROOT_MISMATCH = "RootMismatch"
BRANCH_SET_MISMATCH = "BranchSetMismatch"
PLAYERS_CONDITION = "PlayersCondition"
EMPTY_READY_SET = "EmptyReadySet"
READY_SET_MISMATCH = "ReadySetMismatch"
INACTIVITY_VIOLATION = "InactivityViolation"
END_RESIDUE = "EndResidue"
GROWTH_GUARD_EXCEEDED = "GrowthGuardExceeded"

REASONS = (
    ROOT_MISMATCH,
    BRANCH_SET_MISMATCH,
    PLAYERS_CONDITION,
    EMPTY_READY_SET,
    READY_SET_MISMATCH,
    INACTIVITY_VIOLATION,
    END_RESIDUE,
    GROWTH_GUARD_EXCEEDED,
)

# longest derivation path explored before giving up; keeps Python's stack safe
# verdict of the type search when no candidate type exists
NO_TYPE_FOUND = "NoTypeFound"

MAX_PATH = 1500


@dataclass(frozen=True)
class Judgement:
    gtype: GlobalType
    network: Network
    queue: Queue = ()

    def __post_init__(self):
        object.__setattr__(self, "queue", normalize_queue(self.queue))

    @classmethod
    def of(cls, gtype: GlobalType, session: Session) -> "Judgement":
        return cls(gtype, session.network, session.queue)

    @property
    def session(self) -> Session:
        return Session(self.network, self.queue)

    def __str__(self) -> str:
        from sessionweave.dsl import pretty_session_inline, pretty_type_inline

        return f"|- {pretty_type_inline(self.gtype)} |> {pretty_session_inline(self.session)}"


@dataclass(frozen=True, eq=False)
class Derivation:
    rule: str
    judgement: Judgement
    premises: tuple["Derivation", ...] = ()
    side: dict = field(default_factory=dict)

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)

    def iter_nodes(self):
        stack = [self]
        while stack:
            d = stack.pop()
            yield d
            stack.extend(reversed(d.premises))


@dataclass(frozen=True)
class TypeFailure:
    judgement: Judgement
    reason: str
    detail: str

    def __str__(self) -> str:
        return f"{self.reason}: {self.detail}"


@dataclass(frozen=True)
class Guard:
    max_judgements: int = 10_000
    max_queue: int = 64

    def __post_init__(self):
        if self.max_judgements <= 0 or self.max_queue <= 0:
            raise ValueError("guard limits must be positive")


DEFAULT_GUARD = Guard()


class _Fail(Exception):
    def __init__(self, failure: TypeFailure):
        self.failure = failure


@contextmanager
def _deep_recursion(limit: int = 20_000):
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, limit))
    try:
        yield
    finally:
        sys.setrecursionlimit(old)


def _key(b) -> str:
    return f"{b[0]}.{b[1]}"


def _msgs_str(msgs: Iterable[Message]) -> str:
    return "{" + ", ".join(str(m) for m in msgs) + "}"


def _players_condition(g_i: GlobalType, p: str, others: frozenset[str]) -> bool:
    return players_of_type(g_i) - {p} == others


KNOWN_RULE = "Known"


class _Checker:
    def __init__(self, guard: Guard, known: set | None = None):
        self.guard = guard
        self.seen: set[Judgement] = set()
        self.closed: dict[Judgement, Derivation] = {}
        self.work = 0
        # judgements already proved typable by earlier runs (TypingCache only)
        self.known = known if known is not None else set()

    def fail(self, j: Judgement, reason: str, detail: str):
        raise _Fail(TypeFailure(j, reason, detail))

    def check(self, j: Judgement, path: dict[Judgement, int]) -> tuple[Derivation, int]:
        """Derivation of ``j`` and the shallowest path index its loops refer to."""
        if j in path:
            return Derivation(LOOP_RULE, j, (), {"ancestor": path[j]}), path[j]
        if j in self.closed:
            return self.closed[j], len(path)
        if j in self.known:
            return Derivation(KNOWN_RULE, j), len(path)
        self.work += 1
        self.seen.add(j)
        if len(j.queue) > self.guard.max_queue:
            self.fail(j, GROWTH_GUARD_EXCEEDED, f"queue length {len(j.queue)} exceeds {self.guard.max_queue}")
        if len(self.seen) > self.guard.max_judgements or self.work > 20 * self.guard.max_judgements:
            self.fail(j, GROWTH_GUARD_EXCEEDED, f"more than {self.guard.max_judgements} judgements")
        if len(path) >= MAX_PATH:
            self.fail(j, GROWTH_GUARD_EXCEEDED, f"derivation path longer than {MAX_PATH}")

        g = j.gtype
        if g.kind == END:
            if len(j.network) or j.queue:
                self.fail(j, END_RESIDUE, "End requires a terminated network and an empty queue")
            d = Derivation(END_RULE, j)
            self.closed[j] = d
            return d, len(path)

        depth = len(path)
        path[j] = depth
        try:
            if g.kind == OUT:
                premises, side, low = self._out(j, path)
                rule = OUT_RULE
            else:
                premises, side, low = self._in(j, path)
                rule = IN_RULE
        finally:
            del path[j]
        d = Derivation(rule, j, tuple(premises), side)
        if low >= depth:
            self.closed[j] = d
            low = depth + 1
        return d, low

    def _root_process(self, j: Judgement, kind: str) -> Process:
        p = j.gtype.player
        proc = j.network.get(p)
        word = "output" if kind == OUT else "input"
        if proc is None:
            self.fail(j, ROOT_MISMATCH, f"type expects {p} to {word} but {p} is terminated or absent")
        if proc.kind != kind:
            self.fail(j, ROOT_MISMATCH, f"type expects {p} to {word} but its process does not")
        return proc

    def _out(self, j: Judgement, path):
        g = j.gtype
        p = g.player
        proc = self._root_process(j, OUT)
        if set(g.branch_keys()) != set(proc.branch_keys()):
            self.fail(
                j,
                BRANCH_SET_MISMATCH,
                f"type branches {sorted(map(_key, g.branch_keys()))} differ from process branches "
                f"{sorted(map(_key, proc.branch_keys()))}",
            )
        others = players_of_network(j.network) - {p}
        for b in g.branches:
            if not _players_condition(b.cont, p, others):
                self.fail(j, PLAYERS_CONDITION, f"players of branch {b.partner}.{b.label} minus {p} differ from {sorted(others)}")
        conts = dict(((b.partner, b.label), b.cont) for b in proc.branches)
        premises = []
        low = len(path) + 1
        for b in g.branches:
            m = Message(p, b.label, b.partner)
            sub = Judgement(b.cont, j.network.replace(p, conts[(b.partner, b.label)]), enqueue(j.queue, m))
            d, lo = self.check(sub, path)
            premises.append(d)
            low = min(low, lo)
        side = {"I": [_key(k) for k in g.branch_keys()]}
        return premises, side, low

    def _in(self, j: Judgement, path):
        g = j.gtype
        p = g.player
        proc = self._root_process(j, IN)
        tmsgs = {(b.partner, b.label): Message(b.partner, b.label, p) for b in g.branches}
        pmsgs = {(b.partner, b.label): Message(b.partner, b.label, p) for b in proc.branches}
        jt = rm(tmsgs, j.queue)
        jp = rm(pmsgs, j.queue)
        if jt != jp:
            self.fail(
                j,
                READY_SET_MISMATCH,
                f"ready branches of the type {sorted(map(_key, jt))} differ from those of the process {sorted(map(_key, jp))}",
            )
        if not jt:
            pending = [m for m in j.queue if m.receiver == p]
            if pending:
                self.fail(j, READY_SET_MISMATCH, f"no branch of {p} matches the pending messages {_msgs_str(pending)}")
            self.fail(j, EMPTY_READY_SET, f"no message for {p} on the queue")
        J = sorted(jt)
        senders = {q for q, _ in J}
        mm = frozenset(
            m for key, m in sorted({**tmsgs, **pmsgs}.items()) if key not in jt and m.sender not in senders
        )
        conts_t = {(b.partner, b.label): b.cont for b in g.branches}
        conts_p = {(b.partner, b.label): b.cont for b in proc.branches}
        for key in J:
            if not inactive(conts_t[key], mm):
                self.fail(
                    j,
                    INACTIVITY_VIOLATION,
                    f"continuation of {_key(key)} is not inactive for {_msgs_str(sorted(mm))}",
                )
        others = players_of_network(j.network) - {p}
        for b in g.branches:
            if not _players_condition(b.cont, p, others):
                self.fail(j, PLAYERS_CONDITION, f"players of branch {b.partner}.{b.label} minus {p} differ from {sorted(others)}")
        premises = []
        decomp = {}
        low = len(path) + 1
        for key in J:
            q_j = dequeue(j.queue, key[0], p)
            decomp[_key(key)] = q_j
            sub = Judgement(conts_t[key], j.network.replace(p, conts_p[key]), q_j)
            d, lo = self.check(sub, path)
            premises.append(d)
            low = min(low, lo)
        side = {
            "I": [_key(k) for k in g.branch_keys()],
            "H": [_key(k) for k in proc.branch_keys()],
            "J": [_key(k) for k in J],
            "M": sorted(mm),
            "decompositions": decomp,
        }
        return premises, side, low


def typecheck(j: Judgement, guard: Guard = DEFAULT_GUARD) -> Derivation | TypeFailure:
    """Derive ``|- G |> N || M`` or report the first violated condition.

    Raises :class:`UnboundedTypeError` if the global type is not bounded.
    A :data:`GROWTH_GUARD_EXCEEDED` failure means "unknown", never "typable".
    """
    report = boundedness(j.gtype)
    if not report.bounded:
        raise UnboundedTypeError(j.gtype, report.witnesses)
    checker = _Checker(guard)
    with _deep_recursion():
        try:
            d, _ = checker.check(j, {})
        except _Fail as e:
            return e.failure
    return d


class TypingCache:
    """Typability of many related judgements, sharing work between queries.

    The rules are syntax directed, so every judgement occurring in a
    successful derivation is typable, and a failure anywhere below a
    judgement makes it untypable whatever the path.  The derivations built
    here may cite earlier results with ``Known`` leaves, so they are for
    answering yes/no questions only; use :func:`typecheck` for auditing.
    """

    def __init__(self, guard: Guard = DEFAULT_GUARD):
        self.guard = guard
        self.good: set[Judgement] = set()
        self.bad: dict[Judgement, TypeFailure] = {}

    def __call__(self, j: Judgement) -> TypeFailure | None:
        if j in self.good:
            return None
        if j in self.bad:
            return self.bad[j]
        report = boundedness(j.gtype)
        if not report.bounded:
            raise UnboundedTypeError(j.gtype, report.witnesses)
        checker = _Checker(self.guard, self.good)
        with _deep_recursion():
            try:
                d, _ = checker.check(j, {})
            except _Fail as e:
                self.bad[j] = e.failure
                return e.failure
        self.good.update(n.judgement for n in d.iter_nodes())
        return None


def is_typable(gtype: GlobalType, session: Session, guard: Guard = DEFAULT_GUARD) -> bool:
    return isinstance(typecheck(Judgement.of(gtype, session), guard), Derivation)


# --------------------------------------------------------------------------
# independent re-verification of derivations


def _reachable(t):
    seen = {t}
    stack = [t]
    while stack:
        x = stack.pop()
        for b in x.branches:
            if b.cont not in seen:
                seen.add(b.cont)
                stack.append(b.cont)
    return seen


def _plays(g) -> set[str]:
    return {x.player for x in _reachable(g) if x.kind != END}


def _emits_any(g, msgs) -> bool:
    return any(
        (x.player, b.label, b.partner) in msgs for x in _reachable(g) if x.kind == OUT for b in x.branches
    )


def _first_on_channel(queue, sender, receiver):
    for m in queue:
        if m[0] == sender and m[2] == receiver:
            return m
    return None


def _remove_first(queue, m):
    out = list(queue)
    out.remove(m)  # earliest occurrence; equal messages share a channel
    return normalize_queue(out)


def recheck_derivation(d: Derivation) -> list[str]:
    """Re-verify every node of ``d`` from its judgement alone.

    Returns a list of problems (empty iff the derivation is valid).  Uses its
    own implementations of ready messages, inactivity and players.
    """
    problems: list[str] = []
    stack = [(d, ())]
    while stack:
        node, ancestors = stack.pop()
        problems.extend(_recheck_node(node, ancestors))
        for prem in node.premises:
            stack.append((prem, ancestors + (node.judgement,)))
    return problems


def _recheck_node(d: Derivation, ancestors: tuple[Judgement, ...]) -> list[str]:
    j = d.judgement
    g, net, queue = j.gtype, j.network, j.queue
    where = f"at {j}"
    if d.rule == LOOP_RULE:
        if j not in ancestors:
            return [f"loop without matching ancestor {where}"]
        return []
    if d.rule == END_RULE:
        if g.kind != END or len(net) or queue:
            return [f"End rule misapplied {where}"]
        return []
    p = g.player
    proc = net.get(p)
    kind = OUT if d.rule == OUT_RULE else IN
    if g.kind != kind or proc is None or proc.kind != kind:
        return [f"{d.rule} rule does not match the judgement {where}"]
    others = set(net) - {p}
    problems = []
    for b in g.branches:
        if _plays(b.cont) - {p} != others:
            problems.append(f"players condition fails for {b.partner}.{b.label} {where}")
    tconts = {(b.partner, b.label): b.cont for b in g.branches}
    pconts = {(b.partner, b.label): b.cont for b in proc.branches}
    expected = []
    if kind == OUT:
        if set(tconts) != set(pconts):
            problems.append(f"branch sets differ {where}")
            return problems
        for key in g.branch_keys():
            m = Message(p, key[1], key[0])
            expected.append(Judgement(tconts[key], net.replace(p, pconts[key]), tuple(queue) + (m,)))
    else:
        def ready(keys):
            return {k for k in keys if _first_on_channel(queue, k[0], p) == (k[0], k[1], p)}

        jt, jp = ready(tconts), ready(pconts)
        if jt != jp or not jt:
            problems.append(f"ready sets {sorted(jt)} / {sorted(jp)} invalid {where}")
            return problems
        senders = {k[0] for k in jt}
        mm = {(k[0], k[1], p) for k in set(tconts) | set(pconts) if k not in jt and k[0] not in senders}
        if sorted(tuple(m) for m in d.side.get("M", ())) != sorted(mm):
            problems.append(f"recorded message set differs from {sorted(mm)} {where}")
        if [_key(k) for k in sorted(jt)] != list(d.side.get("J", ())):
            problems.append(f"recorded ready set differs {where}")
        for key in sorted(jt):
            if _emits_any(tconts[key], mm):
                problems.append(f"continuation {_key(key)} is not inactive {where}")
            rest = _remove_first(queue, Message(key[0], key[1], p))
            if normalize_queue(d.side.get("decompositions", {}).get(_key(key), ())) != rest:
                problems.append(f"recorded decomposition for {_key(key)} is wrong {where}")
            expected.append(Judgement(tconts[key], net.replace(p, pconts[key]), rest))
    got = [prem.judgement for prem in d.premises]
    if got != expected:
        problems.append(f"premises do not match the rule {where}")
    return problems


# --------------------------------------------------------------------------
# JSON export


def judgement_to_json(j: Judgement) -> dict:
    from sessionweave.dsl import pretty_queue, pretty_session_inline, pretty_type_inline

    return {
        "type": pretty_type_inline(j.gtype),
        "session": pretty_session_inline(j.session),
        "queue": pretty_queue(j.queue),
    }


def derivation_to_json(d: Derivation) -> dict:
    from sessionweave.dsl import pretty_queue

    side = {}
    for k, v in d.side.items():
        if k == "M":
            side[k] = [str(m) for m in v]
        elif k == "decompositions":
            side[k] = {key: pretty_queue(q) for key, q in sorted(v.items())}
        else:
            side[k] = v
    return {
        "rule": d.rule,
        "judgement": judgement_to_json(d.judgement),
        "side": side,
        "premises": [derivation_to_json(p) for p in d.premises],
    }


def failure_to_json(f: TypeFailure) -> dict:
    return {"reason": f.reason, "detail": f.detail, "judgement": judgement_to_json(f.judgement)}


# --------------------------------------------------------------------------
# bounded search for a typing


@dataclass(frozen=True)
class SearchBound:
    """Limits of :func:`check_untypable_exhaustive`.

    ``max_depth`` bounds the number of rule applications on a derivation
    path, ``max_nodes`` the total number of search nodes.
    """

    max_depth: int = 60
    max_nodes: int = 200_000
    max_queue: int = 16


@dataclass(frozen=True)
class ExhaustiveVerdict:
    typable: bool
    witness: GlobalType | None
    bound: SearchBound
    explored: int
    complete: bool
    note: str = ""

    @property
    def verdict(self) -> str:
        if self.typable:
            return "typable"
        return "untypable" if self.complete else "untypable-within-bound"


class _Search:
    """Depth-first search for a global type typing a session.

    Without loss of generality input nodes of the candidate type carry only
    their live branches (extra dead branches only add side conditions), so
    the players condition holds automatically and the search state is the
    session plus the set of messages the type may no longer emit.  A state
    may loop back to an identical ancestor state when every participant
    acts on the way, which keeps the candidate bounded.
    """

    def __init__(self, bound: SearchBound):
        self.bound = bound
        self.nodes = 0
        self.cut = False
        self.failed: set = set()
        self.solved: dict = {}
        self.equations: dict[str, Node] = {}
        # lowest path index consulted by the current subtree
        self.touch = 0

    def search(self, state, path: list):
        net, queue, forbid = state
        if not len(net):
            return Node(TYPE, END, None, ()) if not queue else None
        for idx, frame in enumerate(path):
            if frame[0] == state:
                self.touch = min(self.touch, idx)
                if {f[2] for f in path[idx:]} >= set(net):
                    return Ref(frame[1])
                return None
        if state in self.solved:
            return self.solved[state]
        if state in self.failed:
            return None
        self.nodes += 1
        if self.nodes > self.bound.max_nodes or len(path) >= self.bound.max_depth or len(queue) > self.bound.max_queue:
            self.cut = True
            return None
        depth = len(path)
        name = f"X{self.nodes}"
        frame = [state, name, None]
        path.append(frame)
        outer = self.touch
        lowest = depth
        result = None
        for p, proc in net.items_sorted():
            frame[2] = p
            self.touch = depth
            result = self.try_player(p, proc, state, path)
            lowest = min(lowest, self.touch)
            if result is not None:
                break
        path.pop()
        self.touch = min(outer, lowest)
        if result is not None:
            self.equations[name] = result
            if lowest >= depth:
                self.solved[state] = Ref(name)
            return Ref(name)
        if lowest >= depth and not self.cut:
            self.failed.add(state)
        return None

    def try_player(self, p, proc, state, path):
        net, queue, forbid = state
        branches = []
        if proc.kind == OUT:
            if any(Message(p, b.label, b.partner) in forbid for b in proc.branches):
                return None
            for b in proc.branches:
                m = Message(p, b.label, b.partner)
                e = self.search((net.replace(p, b.cont), enqueue(queue, m), forbid), path)
                if e is None:
                    return None
                branches.append((b.partner, b.label, e))
            return Node(TYPE, OUT, p, tuple(branches))
        msgs = {(b.partner, b.label): Message(b.partner, b.label, p) for b in proc.branches}
        live = sorted(rm(msgs, queue))
        if not live:
            return None
        senders = {q for q, _ in live}
        mm = frozenset(m for k, m in msgs.items() if k not in live and m.sender not in senders)
        conts = {(b.partner, b.label): b.cont for b in proc.branches}
        for key in live:
            e = self.search((net.replace(p, conts[key]), dequeue(queue, key[0], p), forbid | mm), path)
            if e is None:
                return None
            branches.append((key[0], key[1], e))
        return Node(TYPE, IN, p, tuple(branches))

    def witness(self, root) -> GlobalType:
        eqs: dict[str, object] = {}
        todo = [root]
        while todo:
            e = todo.pop()
            if isinstance(e, Ref):
                if e.name not in eqs:
                    eqs[e.name] = self.equations[e.name]
                    todo.append(eqs[e.name])
            elif isinstance(e, Node):
                todo.extend(c for _, _, c in e.branches)
        return solve({**eqs, " root": root})[" root"]  # type: ignore[return-value]


def check_untypable_exhaustive(s: Session, bound: SearchBound = SearchBound()) -> ExhaustiveVerdict:
    """Search for a global type typing ``s`` within ``bound``.

    A positive answer carries a witness that was re-checked with
    :func:`typecheck`.  A negative answer is evidence, not proof: ``complete``
    tells whether the search space was exhausted without hitting the bound.
    """
    search = _Search(bound)
    with _deep_recursion():
        root = search.search((s.network, s.queue, frozenset()), [])
    if root is None:
        return ExhaustiveVerdict(False, None, bound, search.nodes, not search.cut)
    witness = search.witness(root)
    try:
        result = typecheck(Judgement.of(witness, s))
    except UnboundedTypeError:
        return ExhaustiveVerdict(False, None, bound, search.nodes, False, "candidate type was unbounded")
    if not isinstance(result, Derivation):
        note = f"candidate rejected by the checker: {result.reason}"
        return ExhaustiveVerdict(False, None, bound, search.nodes, False, note)
    return ExhaustiveVerdict(True, witness, bound, search.nodes, True)
