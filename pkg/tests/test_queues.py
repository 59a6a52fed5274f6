from hypothesis import given, settings

from sessionweave.queues import (
    dequeue,
    enqueue,
    is_ready,
    normalize_queue,
    push_front,
    queues_equivalent,
    rm,
    strip_tail,
)
from sessionweave.terms import Message

from tests.strategies import messages, queues

PR_A = Message("p", "a", "r")
PR_B = Message("p", "b", "r")
QR_C = Message("q", "c", "r")


def _channel(q, ch):
    return [m for m in q if (m.sender, m.receiver) == ch]


def test_channels_commute_but_not_within():
    assert queues_equivalent([PR_A, QR_C], [QR_C, PR_A])
    assert not queues_equivalent([PR_A, PR_B], [PR_B, PR_A])


def test_enqueue_and_dequeue():
    q = normalize_queue([QR_C])
    q = enqueue(q, PR_A)
    q = enqueue(q, PR_B)
    assert q == (PR_A, PR_B, QR_C)
    assert dequeue(q, "p", "r") == (PR_B, QR_C)
    assert push_front(dequeue(q, "p", "r"), PR_A) == q


def test_ready_and_strip():
    q = normalize_queue([PR_A, QR_C, PR_B])
    assert is_ready(q, PR_A) and is_ready(q, QR_C) and not is_ready(q, PR_B)
    assert strip_tail(q, PR_B) == (PR_A, QR_C)
    assert strip_tail(q, PR_A) is None


@settings(max_examples=1000)
@given(queues)
def test_normalize_is_idempotent(q):
    n = normalize_queue(q)
    assert normalize_queue(n) == n


@settings(max_examples=1000)
@given(queues)
def test_normalize_preserves_channel_order(q):
    n = normalize_queue(q)
    assert sorted(n) == sorted(q)
    for m in q:
        ch = (m.sender, m.receiver)
        assert _channel(n, ch) == _channel(q, ch)


@given(queues, messages())
def test_push_front_then_dequeue(q, m):
    n = normalize_queue(q)
    assert dequeue(push_front(n, m), m.sender, m.receiver) == n
    assert is_ready(push_front(n, m), m)


@given(queues, messages())
def test_enqueue_then_strip(q, m):
    n = normalize_queue(q)
    assert strip_tail(enqueue(n, m), m) == n


def _ready_oracle(candidates, q):
    # literal reading: q is equivalent to m_i followed by q with one copy of m_i removed
    out = set()
    for i, m in enumerate(candidates):
        for k, x in enumerate(q):
            if x == m:
                rest = q[:k] + q[k + 1 :]
                channels = {(y.sender, y.receiver) for y in q}
                if all(_channel([m] + rest, ch) == _channel(q, ch) for ch in channels):
                    out.add(i)
    return frozenset(out)


@settings(max_examples=1000)
@given(queues.map(tuple), queues.map(tuple))
def test_rm_matches_oracle(cands, q):
    assert rm(cands, normalize_queue(q)) == _ready_oracle(cands, list(q))
