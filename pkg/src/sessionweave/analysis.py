"""Static analyses on global types: players, depth, boundedness, inactivity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import networkx as nx

from sessionweave.terms import END, OUT, Communication, GlobalType, Message, iter_subterms

INFINITY = math.inf


@lru_cache(maxsize=None)
def players_of_type(g: GlobalType) -> frozenset[str]:
    """Least fixpoint of plays(End) = {} and plays(choice) = {player} | plays(children).

    Over a finite subterm graph the least fixpoint is just the set of
    players of reachable nodes.
    """
    return frozenset(t.player for t in iter_subterms(g) if t.kind != END)


def depth(g: GlobalType, p: str) -> int | float:
    """Supremum over paths of the first position where ``p`` plays.

    0 when ``p`` is not a player, ``math.inf`` when some path avoids ``p``.
    """
    if p not in players_of_type(g):
        return 0
    if g.player == p:
        return 1
    return _depth_table(g, p)[g]


@lru_cache(maxsize=4096)
def _depth_table(g: GlobalType, p: str) -> dict[GlobalType, int | float]:
    # graph of reachable nodes not played by p, stopping at p's nodes
    graph = nx.DiGraph()
    for t in iter_subterms_until(g, p):
        graph.add_node(t)
        for b in t.branches:
            if b.cont.player != p:
                graph.add_edge(t, b.cont)
    bad = {t for t in graph if t.kind == END}
    for comp in nx.strongly_connected_components(graph):
        if len(comp) > 1 or any(graph.has_edge(t, t) for t in comp):
            bad |= comp
    infinite = set(bad)
    for t in bad:
        infinite |= nx.ancestors(graph, t)
    result: dict[GlobalType, int | float] = {t: INFINITY for t in infinite}
    finite = graph.subgraph(t for t in graph if t not in infinite)
    for t in reversed(list(nx.topological_sort(finite))):
        # a child played by p sits at depth 1 of its own subterm
        result[t] = 1 + max((1 if b.cont.player == p else result[b.cont] for b in t.branches), default=0)
    return result


def iter_subterms_until(g: GlobalType, p: str):
    """Reachable nodes of ``g`` along paths on which ``p`` has not played yet."""
    if g.player == p:
        return
    seen = {g}
    todo = [g]
    while todo:
        t = todo.pop()
        yield t
        for b in t.branches:
            c = b.cont
            if c.player != p and c not in seen:
                seen.add(c)
                todo.append(c)


@dataclass(frozen=True)
class BoundednessReport:
    bounded: bool
    witnesses: tuple[tuple[GlobalType, str, float], ...] = ()


@lru_cache(maxsize=65536)
def boundedness(g: GlobalType) -> BoundednessReport:
    """Check that every player of every subterm has finite depth there.

    For a player ``p``, a subterm ``t`` has infinite depth iff ``p`` plays
    somewhere below ``t`` and, moving only through nodes not played by ``p``,
    ``t`` reaches ``End`` or a cycle.  Both sets are computed with linear
    passes per player instead of one depth table per subterm.
    """
    nodes = list(iter_subterms(g))
    preds: dict[GlobalType, list[GlobalType]] = {t: [] for t in nodes}
    for t in nodes:
        for b in t.branches:
            preds[b.cont].append(t)
    witnesses = []
    for p in sorted(players_of_type(g)):
        reaches_p = _backward({t for t in nodes if t.player == p}, preds, lambda t: True)
        avoid = [t for t in nodes if t.player != p]
        reaches_end = _backward({t for t in avoid if t.kind == END}, preds, lambda t: t.player != p)
        # peel nodes whose p-free successors all have finite p-free paths
        out_deg = {t: sum(1 for b in t.branches if b.cont.player != p) for t in avoid}
        stack = [t for t in avoid if out_deg[t] == 0]
        peeled = set(stack)
        while stack:
            t = stack.pop()
            for u in preds[t]:
                if u.player != p and u not in peeled:
                    out_deg[u] -= 1
                    if out_deg[u] == 0:
                        peeled.add(u)
                        stack.append(u)
        for t in avoid:
            if t in reaches_p and (t in reaches_end or t not in peeled):
                witnesses.append((t, p, INFINITY))
    witnesses.sort(key=lambda w: (w[1], w[0].uid))
    return BoundednessReport(not witnesses, tuple(witnesses))


def _backward(start: set, preds, allowed) -> set:
    seen = set(start)
    stack = list(start)
    while stack:
        t = stack.pop()
        for u in preds[t]:
            if u not in seen and allowed(u):
                seen.add(u)
                stack.append(u)
    return seen


def boundedness_by_depth(g: GlobalType) -> BoundednessReport:
    """The definition read literally: depth of every player at every subterm."""
    witnesses = []
    for sub in iter_subterms(g):
        for p in sorted(players_of_type(sub)):
            if depth(sub, p) == INFINITY:
                witnesses.append((sub, p, INFINITY))
    witnesses.sort(key=lambda w: (w[1], w[0].uid))
    return BoundednessReport(not witnesses, tuple(witnesses))


def is_bounded(g: GlobalType) -> bool:
    return boundedness(g).bounded


def inactive(g: GlobalType, msgs: Iterable[Message]) -> bool:
    """True iff no output reachable from ``g`` emits a message in ``msgs``."""
    msgs = frozenset(Message(*m) for m in msgs)
    if not msgs:
        return True
    return not any(
        Message(t.player, b.label, b.partner) in msgs
        for t in iter_subterms(g)
        if t.kind == OUT
        for b in t.branches
    )


def paths_prefixes(g: GlobalType, n: int) -> frozenset[tuple[Communication, ...]]:
    """All prefixes of length at most ``n`` of the paths of ``g``."""
    if n < 0:
        raise ValueError("length bound must be non-negative")
    out = set()
    frontier = [((), g)]
    for _ in range(n + 1):
        nxt = []
        for trace, node in frontier:
            out.add(trace)
            if len(trace) == n:
                continue
            for b in node.branches:
                nxt.append((trace + (Communication(node.player, node.kind, b.partner, b.label),), b.cont))
        frontier = nxt
    return frozenset(out)
