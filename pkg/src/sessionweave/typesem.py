"""Transition system of type configurations (global type || queue).

Top-level outputs and inputs fire directly.  A communication whose player
differs from the root player may also fire inside the choice: for an output
choice every branch must be able to perform it (with the branch's pending
message still at the tail of its channel); for an input choice every live
branch must, dead branches inherit the continuation of the first live one.

Inside an input choice each live branch ``j`` is stepped against the queue
with its own message removed, and that message is put back in front of its
channel afterwards.  Stepping against the unconsumed queue instead (pass
``literal=True``) blocks later inputs on the same channel as the choice and
loses subject reduction, e.g. on the fake-race session.

Steps are computed one player at a time.  The recursion for player ``r``
never descends further than ``depth(G, r)``, which is finite for bounded
types.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from sessionweave.analysis import boundedness, players_of_type
from sessionweave.queues import Queue, dequeue, enqueue, is_ready, normalize_queue, push_front, rm, strip_tail
from sessionweave.terms import (
    END,
    IN,
    OUT,
    Branch,
    Communication,
    GlobalType,
    Message,
    STORE,
    TYPE,
)

__all__ = [
    "TOP_OUT",
    "TOP_IN",
    "INSIDE_OUT",
    "INSIDE_IN",
    "TypeConfig",
    "TypeStep",
    "UnboundedTypeError",
    "rm",
    "type_steps",
    "step_with",
]

TOP_OUT = "Top-Out"
TOP_IN = "Top-In"
INSIDE_OUT = "Inside-Out"
INSIDE_IN = "Inside-In"


class UnboundedTypeError(ValueError):
    def __init__(self, gtype: GlobalType, witnesses=()):
        self.gtype = gtype
        self.witnesses = witnesses
        detail = ", ".join(f"{p} in {w}" for w, p, _ in witnesses[:3])
        super().__init__(f"global type is not bounded ({detail})" if detail else "global type is not bounded")


@dataclass(frozen=True)
class TypeConfig:
    gtype: GlobalType
    queue: Queue = ()

    def __post_init__(self):
        object.__setattr__(self, "queue", normalize_queue(self.queue))


class TypeStep(NamedTuple):
    communication: Communication
    target: TypeConfig
    rule: str


def _require_bounded(g: GlobalType) -> None:
    report = boundedness(g)
    if not report.bounded:
        raise UnboundedTypeError(g, report.witnesses)


def type_steps(c: TypeConfig, stats: dict | None = None, literal: bool = False) -> tuple[TypeStep, ...]:
    """Every transition of ``c``, sorted by communication.

    If ``stats`` is given it receives, per player, the deepest recursion level
    reached by the inside rules.
    """
    _require_bounded(c.gtype)
    ctx = _Ctx(stats, literal)
    steps = []
    for r in sorted(players_of_type(c.gtype)):
        found = _steps(c.gtype, c.queue, r, 1, ctx)
        for beta in sorted(found):
            g2, q2, rule = found[beta]
            steps.append(TypeStep(beta, TypeConfig(g2, q2), rule))
    return tuple(steps)


def step_with(
    c: TypeConfig, beta: Communication, stats: dict | None = None, literal: bool = False
) -> TypeStep | None:
    _require_bounded(c.gtype)
    found = _steps(c.gtype, c.queue, beta.player, 1, _Ctx(stats, literal))
    if beta not in found:
        return None
    g2, q2, rule = found[beta]
    return TypeStep(beta, TypeConfig(g2, q2), rule)


class _Ctx:
    __slots__ = ("memo", "stats", "literal")

    def __init__(self, stats: dict | None, literal: bool):
        self.memo: dict = {}
        self.stats = stats
        self.literal = literal


def _steps(g: GlobalType, q: Queue, r: str, level: int, ctx: _Ctx) -> dict:
    """Map from communications of player ``r`` to (target type, queue, rule)."""
    if ctx.stats is not None and ctx.stats.get(r, 0) < level:
        ctx.stats[r] = level
    if g.kind == END or r not in players_of_type(g):
        return {}
    key = (g, q, r)
    if key in ctx.memo:
        return ctx.memo[key]
    p = g.player
    result: dict = {}
    if p == r:
        for b in g.branches:
            if g.kind == OUT:
                m = Message(p, b.label, b.partner)
                result[Communication(p, OUT, b.partner, b.label)] = (b.cont, enqueue(q, m), TOP_OUT)
            else:
                m = Message(b.partner, b.label, p)
                if is_ready(q, m):
                    result[Communication(p, IN, b.partner, b.label)] = (b.cont, dequeue(q, b.partner, p), TOP_IN)
    elif g.kind == OUT:
        result = _inside_out(g, q, r, level, ctx)
    else:
        result = _inside_in(g, q, r, level, ctx)
    ctx.memo[key] = result
    return result


def _inside_out(g, q, r, level, ctx) -> dict:
    p = g.player
    per_branch = []
    for b in g.branches:
        m = Message(p, b.label, b.partner)
        per_branch.append((b, m, _steps(b.cont, enqueue(q, m), r, level + 1, ctx)))
    common = set(per_branch[0][2])
    for _, _, inner in per_branch[1:]:
        common &= set(inner)
    result = {}
    for beta in common:
        conts = []
        rests = set()
        for b, m, inner in per_branch:
            g2, q2, _ = inner[beta]
            rest = strip_tail(q2, m)
            if rest is None:
                break
            rests.add(rest)
            conts.append(Branch(b.partner, b.label, g2))
        else:
            if len(rests) == 1:
                result[beta] = (STORE.make(TYPE, OUT, p, conts), rests.pop(), INSIDE_OUT)
    return result


def _inside_in(g, q, r, level, ctx) -> dict:
    p = g.player
    msgs = [Message(b.partner, b.label, p) for b in g.branches]
    live = sorted(rm(msgs, q))
    if not live:
        return {}
    dead = [i for i in range(len(msgs)) if i not in live]
    awaken = {Communication(msgs[i].sender, OUT, p, msgs[i].label) for i in dead}
    if ctx.literal:
        inner = {j: _steps(g.branches[j].cont, q, r, level + 1, ctx) for j in live}
    else:
        inner = {}
        for j in live:
            m = msgs[j]
            found = _steps(g.branches[j].cont, dequeue(q, m.sender, p), r, level + 1, ctx)
            inner[j] = {beta: (g2, push_front(q2, m), rule) for beta, (g2, q2, rule) in found.items()}
    common = set(inner[live[0]])
    for j in live[1:]:
        common &= set(inner[j])
    common -= awaken
    result = {}
    for beta in common:
        queues = {inner[j][beta][1] for j in live}
        if len(queues) != 1:
            continue
        # branches are sorted by (sender, label), so live[0] is the smallest live key
        filler = inner[live[0]][beta][0]
        conts = [
            Branch(b.partner, b.label, inner[i][beta][0] if i in inner else filler)
            for i, b in enumerate(g.branches)
        ]
        result[beta] = (STORE.make(TYPE, IN, p, conts), queues.pop(), INSIDE_IN)
    return result
