"""Networks, sessions and their labelled transition system (Send/Rcv)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, NamedTuple

from sessionweave.queues import EMPTY, Queue, channel_head, dequeue, enqueue, normalize_queue
from sessionweave.terms import IN, OUT, Communication, Message, Process, TermError, check_identifier


class Network(Mapping[str, Process]):
    """Located processes ``p1::P1 || ... || pn::Pn``.

    Terminated processes are dropped on construction, so two networks are
    structurally congruent iff they compare equal.
    """

    __slots__ = ("_items", "_index")

    def __init__(self, located: Mapping[str, Process] | Iterable[tuple[str, Process]] = ()):
        pairs = list(located.items()) if isinstance(located, Mapping) else list(located)
        seen = set()
        items = []
        for p, proc in pairs:
            check_identifier(p, "participant")
            if p in seen:
                raise TermError(f"duplicate participant {p}")
            seen.add(p)
            if not isinstance(proc, Process):
                raise TermError(f"{p} is not located at a process")
            if not proc.is_end:
                items.append((p, proc))
        items.sort(key=lambda x: x[0])
        self._items: tuple[tuple[str, Process], ...] = tuple(items)
        self._index = dict(items)

    def __getitem__(self, p: str) -> Process:
        return self._index[p]

    def __iter__(self) -> Iterator[str]:
        return (p for p, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Network) and self._items == other._items

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        return "Network(" + ", ".join(f"{p}::{proc}" for p, proc in self._items) + ")"

    def items_sorted(self) -> tuple[tuple[str, Process], ...]:
        return self._items

    def replace(self, p: str, proc: Process) -> "Network":
        """The network with ``p`` relocated to ``proc`` (dropped if terminated)."""
        new = Network.__new__(Network)
        items = [(q, x) for q, x in self._items if q != p]
        if not proc.is_end:
            items.append((p, proc))
            items.sort(key=lambda x: x[0])
        new._items = tuple(items)
        new._index = dict(items)
        return new

    def without(self, p: str) -> "Network":
        new = Network.__new__(Network)
        new._items = tuple((q, x) for q, x in self._items if q != p)
        new._index = dict(new._items)
        return new


def players_of_network(n: Network) -> frozenset[str]:
    """Participants whose process is not terminated."""
    return frozenset(n)


@dataclass(frozen=True)
class Session:
    network: Network
    queue: Queue = EMPTY

    def __post_init__(self):
        object.__setattr__(self, "queue", normalize_queue(self.queue))

    def __str__(self) -> str:
        from sessionweave.dsl import pretty_session_inline

        return pretty_session_inline(self)


class SessionStep(NamedTuple):
    communication: Communication
    target: Session


class NoSuchStep(Exception):
    def __init__(self, index: int, communication: Communication, state: Session):
        super().__init__(f"step {index}: {communication} is not enabled in {state}")
        self.index = index
        self.communication = communication
        self.state = state


def session_steps(s: Session) -> tuple[SessionStep, ...]:
    """All Send and Rcv transitions, sorted by (player, kind, partner, label)."""
    steps = []
    for p, proc in s.network.items_sorted():
        if proc.kind == OUT:
            for b in proc.branches:
                q = enqueue(s.queue, Message(p, b.label, b.partner))
                steps.append(SessionStep(Communication(p, OUT, b.partner, b.label), Session(s.network.replace(p, b.cont), q)))
        elif proc.kind == IN:
            for b in proc.branches:
                head = channel_head(s.queue, b.partner, p)
                if head is not None and head.label == b.label:
                    q = dequeue(s.queue, b.partner, p)
                    steps.append(SessionStep(Communication(p, IN, b.partner, b.label), Session(s.network.replace(p, b.cont), q)))
    steps.sort(key=lambda st: st.communication)
    return tuple(steps)


def step_session(s: Session, beta: Communication) -> Session | None:
    for st in session_steps(s):
        if st.communication == beta:
            return st.target
    return None


def apply_trace(s: Session, trace: Iterable[Communication]) -> Session:
    for i, beta in enumerate(trace):
        nxt = step_session(s, beta)
        if nxt is None:
            raise NoSuchStep(i, beta, s)
        s = nxt
    return s


def is_stuck(s: Session) -> bool:
    return not session_steps(s) and (len(s.network) > 0 or len(s.queue) > 0)


def is_terminated(s: Session) -> bool:
    return len(s.network) == 0 and len(s.queue) == 0
