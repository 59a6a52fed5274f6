"""Hypothesis strategies shared by the property tests."""

import random

from hypothesis import strategies as st

from sessionweave.generators import random_process, random_regular_type, random_typed_session
from sessionweave.terms import Message

PARTICIPANTS = ("p", "q", "r", "s")
LABELS = ("a", "b", "c")

names = st.sampled_from(PARTICIPANTS)
labels = st.sampled_from(LABELS)


@st.composite
def messages(draw):
    sender = draw(names)
    receiver = draw(names.filter(lambda x: x != sender))
    return Message(sender, draw(labels), receiver)


queues = st.lists(messages(), max_size=8)


@st.composite
def global_types(draw, max_nodes=8, max_branches=3):
    rng = random.Random(draw(st.integers(0, 2**32)))
    n = draw(st.integers(1, max_nodes))
    return random_regular_type(rng, n, PARTICIPANTS[:3], LABELS, end_prob=0.3, max_branches=max_branches)


@st.composite
def processes(draw, max_nodes=6):
    rng = random.Random(draw(st.integers(0, 2**32)))
    return random_process(rng, draw(st.integers(1, max_nodes)), PARTICIPANTS, LABELS)


@st.composite
def typed_sessions(draw):
    rng = random.Random(draw(st.integers(0, 2**32)))
    return random_typed_session(rng, n_segments=draw(st.integers(1, 4)))
