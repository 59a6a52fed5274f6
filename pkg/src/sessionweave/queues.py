"""Message queues modulo reordering of messages on different channels.

Only the order between messages of the same (sender, receiver) channel is
observable, so a queue is kept as a tuple in canonical form: messages
bucketed by channel, channels in lexicographic order, per-channel order
preserved.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence, TypeVar

from sessionweave.terms import Message

Queue = tuple[Message, ...]

EMPTY: Queue = ()

K = TypeVar("K")


def normalize_queue(q: Iterable[Message]) -> Queue:
    buckets: dict[tuple[str, str], list[Message]] = {}
    for m in q:
        buckets.setdefault((m.sender, m.receiver), []).append(Message(*m))
    return tuple(m for ch in sorted(buckets) for m in buckets[ch])


def queues_equivalent(q1: Iterable[Message], q2: Iterable[Message]) -> bool:
    return normalize_queue(q1) == normalize_queue(q2)


def enqueue(q: Queue, m: Message) -> Queue:
    """Append ``m`` at the tail of its channel.  ``q`` must be canonical."""
    key = (m.sender, m.receiver)
    pos = len(q)
    for i, x in enumerate(q):
        if (x.sender, x.receiver) > key:
            pos = i
            break
    return q[:pos] + (m,) + q[pos:]


def push_front(q: Queue, m: Message) -> Queue:
    """Put ``m`` at the head of its channel.  ``q`` must be canonical."""
    key = (m.sender, m.receiver)
    pos = len(q)
    for i, x in enumerate(q):
        if (x.sender, x.receiver) >= key:
            pos = i
            break
    return q[:pos] + (m,) + q[pos:]


def channel_head(q: Queue, sender: str, receiver: str) -> Message | None:
    for m in q:
        if m.sender == sender and m.receiver == receiver:
            return m
    return None


def dequeue(q: Queue, sender: str, receiver: str) -> Queue:
    """Remove the earliest message of channel sender->receiver."""
    for i, m in enumerate(q):
        if m.sender == sender and m.receiver == receiver:
            return q[:i] + q[i + 1 :]
    raise ValueError(f"no message on channel {sender}->{receiver}")


def channel_heads(q: Queue) -> dict[tuple[str, str], Message]:
    heads: dict[tuple[str, str], Message] = {}
    for m in q:
        heads.setdefault((m.sender, m.receiver), m)
    return heads


def is_ready(q: Queue, m: Message) -> bool:
    """True iff ``q`` is equivalent to ``m`` followed by some queue."""
    return channel_head(q, m.sender, m.receiver) == m


def strip_tail(q: Queue, m: Message) -> Queue | None:
    """``q'`` such that ``q`` is equivalent to ``q'`` followed by ``m``, if any."""
    last = None
    for i, x in enumerate(q):
        if x.sender == m.sender and x.receiver == m.receiver:
            last = i
    if last is None or q[last] != m:
        return None
    return q[:last] + q[last + 1 :]


def rm(candidates: Mapping[K, Message] | Sequence[Message], q: Queue) -> frozenset:
    """Indices of the candidate messages that can be read first from ``q``.

    A candidate is ready when it is the earliest message of its channel.
    ``candidates`` is a mapping from indices to messages or a sequence
    (indexed by position).
    """
    items = candidates.items() if isinstance(candidates, Mapping) else enumerate(candidates)
    heads = channel_heads(q)
    return frozenset(i for i, m in items if heads.get((m.sender, m.receiver)) == m)
