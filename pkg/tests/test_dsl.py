import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sessionweave.dsl import (
    ParseError,
    parse,
    parse_communication,
    parse_global_type,
    parse_process,
    parse_queue,
    parse_session,
    parse_trace,
    pretty,
    pretty_file,
    pretty_session,
    pretty_term,
)
from sessionweave.session import Network, Session
from sessionweave.terms import IN, OUT, Communication, Message

from tests.strategies import global_types, names, processes, queues, typed_sessions

CONFLUENT = """
# confluent race
p := r!l; end
q := r!l2; end
r := (p?l; q?l2; end + q?l2; p?l; end)
queue []
type p!r.l; q!r.l2; r?{p.l; r?q.l2; End, q.l2; r?p.l; End}
expect typable
"""


def test_parse_example_file():
    src = parse(CONFLUENT)
    assert src.participants == ["p", "q", "r"]
    assert src.expected_verdict == "typable" and src.expected_reason is None
    assert src.session.queue == ()
    r = src.session.network["r"]
    assert r.kind == IN and r.branch_keys() == (("p", "l"), ("q", "l2"))
    g = src.expected_type
    assert (g.player, g.kind) == ("p", OUT)


def test_recursion_and_names():
    src = parse("P := r!l; P\np := P\nqueue [p->r:l, p->r:l]\nG := p!r.l; G\ntype G")
    p = src.session.network["p"]
    assert p.branches[0].cont is p
    assert src.session.queue == (Message("p", "l", "r"),) * 2
    assert src.type_names == ["G"] and src.process_names == ["P"]


def test_unicode_oplus_and_trace_separators():
    assert parse_process("(q!a; end ⊕ r!b; end)") is parse_process("(q!a; end (+) r!b; end)")
    assert parse_trace("p!q.a · q?p.a") == parse_trace("p!q.a, q?p.a") == parse_trace("p!q.a q?p.a")
    assert parse_trace("") == ()


def test_communication():
    assert parse_communication("p!q.l") == Communication("p", OUT, "q", "l")
    assert parse_communication(" r?p.l2 ") == Communication("r", IN, "p", "l2")
    with pytest.raises(ParseError):
        parse_communication("p!q")


def test_queue_is_normalised():
    assert parse_queue("[q->r:c, p->r:a]") == (Message("p", "a", "r"), Message("q", "c", "r"))


@pytest.mark.parametrize(
    "text, line, col, fragment",
    [
        ("p := q!a; end", 1, 14, "missing session"),
        ("p := q!a; end\nqueue []\nqueue []", 3, 1, "more than one"),
        ("p := X\nqueue []", 1, 6, "undefined name X"),
        ("p := q!a; end\np := q!b; end\nqueue []", 2, 1, "duplicate participant"),
        ("X := Y\nY := X\np := X\nqueue []", 1, 1, "unguarded recursion"),
        ("G := p!q.a; End\np := G\nqueue []", 2, 1, "must be assigned a process"),
        ("p := (q!a; end + q?b; end)\nqueue []", 1, 18, "cannot mix inputs and outputs"),
        ("p := (q!a; end (+) r!b; end + s!c; end)\nqueue []", 1, 29, "cannot mix '+' and '(+)'"),
        ("p := (q?a; end + q?a; end)\nqueue []", 1, 18, "duplicate branch"),
        ("p := q!a; end\nqueue []\ntype p!p.a; End", 3, 8, "cannot communicate with itself"),
        ("p := q!a; end $\nqueue []", 1, 15, "unexpected character"),
        ("p := q!a; end\nqueue []\nexpect maybe", 3, 8, "'typable' or 'untypable'"),
        ("p := q!a; end\nqueue []\nexpect untypable Nonsense", 3, 18, "unknown failure reason"),
        ("p := q!a; end\nqueue [p->q]", 2, 12, "expected ':'"),
        ("P := q!a; end\nqueue []\ntype P", 3, 1, "not a global type"),
        ("p := q!a;", 1, 10, "expected a process"),
    ],
)
def test_diagnostics(text, line, col, fragment):
    with pytest.raises(ParseError) as e:
        parse(text)
    d = e.value.diagnostics[0]
    assert (d.line, d.column) == (line, col)
    assert fragment in d.message
    assert d.severity == "error"


def test_several_errors_are_collected():
    with pytest.raises(ParseError) as e:
        parse("p := X\nq := Y\nqueue []")
    assert [d.line for d in e.value.diagnostics] == [1, 2]


def test_printing_cyclic_type():
    g = parse_global_type("G := p!r.l; q!r.l2; r?{p.l; r?q.l2; G, q.l2; r?p.l; G}")
    text = pretty_term(g)
    assert text.splitlines()[0].startswith("G1 := p!r.l; q!r.l2; r?{")
    assert parse_global_type(text) is g


def test_pretty_dispatch():
    assert pretty(parse_communication("p!q.l")) == "p!q.l"
    assert pretty(parse_queue("[p->q:a]")) == "[p->q:a]"
    assert pretty(parse_trace("p!q.a q?p.a")) == "p!q.a q?p.a"
    with pytest.raises(TypeError):
        pretty(3)


@settings(max_examples=1000)
@given(global_types())
def test_type_round_trip(g):
    assert parse_global_type(pretty_term(g)) is g


@settings(max_examples=500)
@given(processes())
def test_process_round_trip(p):
    assert parse_process(pretty_term(p)) is p


@st.composite
def sessions(draw):
    parts = draw(st.lists(names, unique=True, max_size=4))
    return Session(Network({x: draw(processes()) for x in parts}), tuple(draw(queues)))


@settings(max_examples=500)
@given(sessions())
def test_session_round_trip(s):
    assert parse_session(pretty_session(s)) == s


@settings(max_examples=200)
@given(typed_sessions())
def test_file_round_trip(ts):
    src = parse(pretty_file(ts.session, ts.gtype, "typable"))
    assert src.session == ts.session
    assert src.expected_type is ts.gtype
    assert src.expected_verdict == "typable"
