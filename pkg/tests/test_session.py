import pytest

from sessionweave.dsl import parse_process, parse_session, parse_trace
from sessionweave.session import (
    Network,
    NoSuchStep,
    Session,
    apply_trace,
    is_stuck,
    is_terminated,
    session_steps,
    step_session,
)
from sessionweave.terms import Message, TermError

CONFLUENT = "p := r!l; end\nq := r!l2; end\nr := (p?l; q?l2; end + q?l2; p?l; end)\nqueue []"


def maximal_traces(s):
    steps = session_steps(s)
    if not steps:
        return [((), s)]
    return [((st.communication,) + t, end) for st in steps for t, end in maximal_traces(st.target)]


def test_send_appends_to_queue():
    s = parse_session("p := q!a; q!b; end\nqueue [p->q:z]")
    (st,) = session_steps(s)
    assert str(st.communication) == "p!q.a"
    assert st.target.queue == (Message("p", "z", "q"), Message("p", "a", "q"))


def test_receive_reads_channel_head_only():
    s = parse_session("q := (p?a; end + p?b; end)\nqueue [p->q:b, p->q:a]")
    assert [str(st.communication) for st in session_steps(s)] == ["q?p.b"]
    t = step_session(s, parse_trace("q?p.b")[0])
    assert is_stuck(t) and t.queue == (Message("p", "a", "q"),)


def test_other_channels_do_not_block():
    s = parse_session("q := r?c; end\nqueue [p->q:a, r->q:c]")
    assert [str(st.communication) for st in session_steps(s)] == ["q?r.c"]


def test_confluent_race_traces():
    # six interleavings, all of length four and all terminated
    traces = maximal_traces(parse_session(CONFLUENT))
    assert len(traces) == 6
    assert len({t for t, _ in traces}) == 6
    assert all(len(t) == 4 and is_terminated(end) for t, end in traces)


def test_steps_are_sorted():
    s = parse_session(CONFLUENT)
    steps = session_steps(s)
    assert [st.communication for st in steps] == sorted(st.communication for st in steps)


def test_apply_trace():
    s = parse_session(CONFLUENT)
    end = apply_trace(s, parse_trace("q!r.l2 r?q.l2 p!r.l r?p.l"))
    assert is_terminated(end)
    with pytest.raises(NoSuchStep) as e:
        apply_trace(s, parse_trace("p!r.l r?q.l2"))
    assert e.value.index == 1


def test_four_party_network_can_get_stuck():
    s = parse_session(
        """
        p := (s!a; t!a; r!d; end (+) s!b; t!b; end)
        r := (s?c; t?e; p?d; end + t?e; s?c; end)
        s := (p?a; r!c; end + p?b; r!c; end)
        t := (p?a; r!e; end + p?b; r!e; end)
        queue []
        """
    )
    ends = {end for _, end in maximal_traces(s)}
    stuck = [e for e in ends if is_stuck(e)]
    assert stuck
    assert Session(Network({"r": parse_process("p?d; end")}), ()) in stuck


def test_network_rules():
    end = parse_process("end")
    assert len(Network({"p": end})) == 0
    with pytest.raises(TermError):
        Network([("p", parse_process("q!a; end")), ("p", end)])
    with pytest.raises(TermError):
        Network({"p": "q!a"})
    empty = Session(Network(), ())
    assert is_terminated(empty) and not is_stuck(empty)
    assert is_stuck(Session(Network(), (Message("p", "a", "q"),)))
