"""Random terms and sessions for tests and the generated corpus.

``random_typed_session`` builds a global type and the processes of its
participants together, so the session is typable by construction: outputs
are emitted as they are generated, the matching inputs may be delayed
(first in, first out), races let one receiver accept two messages in
either order, an optional final choice is made by one participant and
read by another, and the whole protocol may loop.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from sessionweave.session import Network, Session
from sessionweave.terms import END, IN, OUT, PROCESS, STORE, TYPE, GlobalType, Node, Ref, solve

DEFAULT_PARTICIPANTS = ("p", "q", "r", "s")
DEFAULT_LABELS = ("a", "b", "c", "d")


def random_regular_type(
    rng: random.Random,
    n_nodes: int = 20,
    participants=DEFAULT_PARTICIPANTS,
    labels=DEFAULT_LABELS,
    end_prob: float = 0.15,
    max_branches: int = 3,
) -> GlobalType:
    """A random regular global type with at most ``n_nodes`` distinct nodes.

    Node 0 is the root; every continuation points at a random node, so the
    result is usually cyclic and often unbounded.
    """
    raw = []
    for i in range(n_nodes):
        if i > 0 and rng.random() < end_prob:
            raw.append((TYPE, END, None, []))
            continue
        player = rng.choice(participants)
        kind = rng.choice((OUT, IN))
        keys = set()
        for _ in range(rng.randint(1, max_branches)):
            partner = rng.choice([x for x in participants if x != player])
            keys.add((partner, rng.choice(labels)))
        branches = [(pt, lb, rng.randrange(n_nodes)) for pt, lb in sorted(keys)]
        raw.append((TYPE, kind, player, branches))
    return STORE.intern_graph(raw)[0]  # type: ignore[return-value]


def random_process(
    rng: random.Random,
    n_nodes: int = 10,
    partners=DEFAULT_PARTICIPANTS,
    labels=DEFAULT_LABELS,
    end_prob: float = 0.2,
    max_branches: int = 3,
):
    raw = []
    for i in range(n_nodes):
        if i > 0 and rng.random() < end_prob:
            raw.append((PROCESS, END, None, []))
            continue
        keys = {(rng.choice(partners), rng.choice(labels)) for _ in range(rng.randint(1, max_branches))}
        raw.append((PROCESS, rng.choice((OUT, IN)), None, [(pt, lb, rng.randrange(n_nodes)) for pt, lb in sorted(keys)]))
    return STORE.intern_graph(raw)[0]


@dataclass(frozen=True)
class TypedSession:
    session: Session
    gtype: GlobalType
    description: str


def _pick_two(rng, xs):
    a, b = rng.sample(list(xs), 2)
    return a, b


def random_typed_session(
    rng: random.Random,
    participants=("p", "q", "r"),
    labels=DEFAULT_LABELS,
    n_segments: int = 4,
    delay_prob: float = 0.5,
    race_prob: float = 0.25,
    choice_prob: float = 0.5,
    recursive_prob: float = 0.3,
) -> TypedSession:
    """A session together with a global type that types it."""
    if len(participants) < 2:
        raise ValueError("need at least two participants")
    events: list[tuple] = []
    pending: list[tuple] = []
    kinds = []
    for _ in range(n_segments):
        while pending and rng.random() < 0.5:
            events.append(pending.pop(0))
        if len(participants) >= 3 and rng.random() < race_prob:
            events.extend(pending)
            pending.clear()
            r = rng.choice(participants)
            p, q = _pick_two(rng, [x for x in participants if x != r])
            events.append(("race", p, q, r, rng.choice(labels), rng.choice(labels)))
            kinds.append("race")
            continue
        p, q = _pick_two(rng, participants)
        l = rng.choice(labels)
        events.append(("out", p, q, l))
        # an input may not overtake a delayed one on the same channel
        if rng.random() < delay_prob or any(x[1] == q and x[2] == p for x in pending):
            pending.append(("in", q, p, l))
            kinds.append("delayed")
        else:
            events.append(("in", q, p, l))
            kinds.append("msg")
    events.extend(pending)
    choice = None
    if rng.random() < choice_prob:
        p, q = _pick_two(rng, participants)
        l1, l2 = rng.sample(list(labels), 2)
        branches = []
        for lab in (l1, l2):
            body = [("out", p, q, lab), ("in", q, p, lab)]
            if rng.random() < 0.5:
                l3 = rng.choice(labels)
                body += [("out", q, p, l3), ("in", p, q, l3)]
            branches.append(body)
        choice = (p, q, branches)
        kinds.append("choice")
    actors = sorted({e[1] for e in events} | {e[2] for e in events} | ({e[3] for e in events if e[0] == "race"}))
    if choice:
        actors = sorted(set(actors) | {choice[0], choice[1]})
    recursive = rng.random() < recursive_prob
    if recursive:
        kinds.append("loop")
    return _build(events, choice, actors, recursive, "+".join(kinds))


def _type_seq(events, tail):
    g = tail
    for e in reversed(events):
        if e[0] == "out":
            _, p, q, l = e
            g = Node(TYPE, OUT, p, ((q, l, g),))
        elif e[0] == "in":
            _, q, p, l = e
            g = Node(TYPE, IN, q, ((p, l, g),))
        else:
            _, p, q, r, l1, l2 = e
            inner = Node(
                TYPE,
                IN,
                r,
                ((p, l1, Node(TYPE, IN, r, ((q, l2, g),))), (q, l2, Node(TYPE, IN, r, ((p, l1, g),)))),
            )
            g = Node(TYPE, OUT, p, ((r, l1, Node(TYPE, OUT, q, ((r, l2, inner),))),))
    return g


def _proc_seq(events, x, tail):
    t = tail
    for e in reversed(events):
        if e[0] == "out" and e[1] == x:
            t = Node(PROCESS, OUT, None, ((e[2], e[3], t),))
        elif e[0] == "in" and e[1] == x:
            t = Node(PROCESS, IN, None, ((e[2], e[3], t),))
        elif e[0] == "race":
            _, p, q, r, l1, l2 = e
            if x == p:
                t = Node(PROCESS, OUT, None, ((r, l1, t),))
            elif x == q:
                t = Node(PROCESS, OUT, None, ((r, l2, t),))
            elif x == r:
                t = Node(
                    PROCESS,
                    IN,
                    None,
                    ((p, l1, Node(PROCESS, IN, None, ((q, l2, t),))), (q, l2, Node(PROCESS, IN, None, ((p, l1, t),)))),
                )
    return t


def _build(events, choice, actors, recursive, description) -> TypedSession:
    type_tail = Ref("G") if recursive else Node(TYPE, END, None, ())
    if choice:
        p, q, branches = choice
        labels = [body[0][3] for body in branches]
        after = Node(
            TYPE, OUT, p, tuple((q, lab, _type_seq(body[1:], type_tail)) for lab, body in zip(labels, branches))
        )
        g = _type_seq(events, after)
    else:
        g = _type_seq(events, type_tail)
    eqs: dict = {"G": g}
    for x in actors:
        tail = Ref(f"P_{x}") if recursive else Node(PROCESS, END, None, ())
        if choice and x in (choice[0], choice[1]):
            p, q, branches = choice
            kind = OUT if x == p else IN
            partner = q if x == p else p
            # the reader's input choice already consumes the chosen label
            skip = 1 if x == p else 2
            alts = tuple((partner, body[0][3], _proc_seq(body[skip:], x, tail)) for body in branches)
            last = Node(PROCESS, kind, None, alts)
        else:
            last = tail
        eqs[f"P_{x}"] = _proc_seq(events, x, last)
    solved = solve(eqs)
    network = Network((x, solved[f"P_{x}"]) for x in actors)
    return TypedSession(Session(network, ()), solved["G"], description)  # type: ignore[arg-type]
