"""Regular terms for processes and global types.

Processes and global types are possibly infinite trees with finitely many
distinct subtrees.  They are stored as graphs of :class:`Term` nodes that are
hash-consed in a process-wide store: two terms denote the same tree exactly
when they are the same Python object.  Cyclic terms are built from equation
systems with :func:`solve`; the store minimizes every new graph before
interning it, so ``G = p!q.a; G`` and ``H = p!q.a; p!q.a; H`` end up as one node.
"""

from __future__ import annotations

import re
import threading
from collections import deque
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence, Union

import networkx as nx

END = "end"
OUT = "out"
IN = "in"

PROCESS = "process"
TYPE = "type"


class TermError(ValueError):
    """Raised when a term violates a well-formedness condition."""


class UndefinedName(TermError):
    pass


class UnguardedRecursion(TermError):
    pass


class Branch(NamedTuple):
    partner: str
    label: str
    cont: "Term"


class Message(NamedTuple):
    sender: str
    label: str
    receiver: str

    @property
    def channel(self) -> tuple[str, str]:
        return (self.sender, self.receiver)

    def __str__(self) -> str:
        return f"{self.sender}->{self.receiver}:{self.label}"


class Communication(NamedTuple):
    """An output ``player!partner.label`` or an input ``player?partner.label``.

    The player is the active side: the sender of an output, the receiver of
    an input.  Field order gives the canonical step ordering.
    """

    player: str
    kind: str
    partner: str
    label: str

    @classmethod
    def output(cls, sender: str, label: str, receiver: str) -> "Communication":
        return cls(sender, OUT, receiver, label)

    @classmethod
    def input(cls, receiver: str, label: str, sender: str) -> "Communication":
        return cls(receiver, IN, sender, label)

    @property
    def message(self) -> Message:
        """The message this communication enqueues or consumes."""
        if self.kind == OUT:
            return Message(self.player, self.label, self.partner)
        return Message(self.partner, self.label, self.player)

    def __str__(self) -> str:
        sym = "!" if self.kind == OUT else "?"
        return f"{self.player}{sym}{self.partner}.{self.label}"


Trace = tuple[Communication, ...]


def players_of_trace(trace: Iterable[Communication]) -> frozenset[str]:
    return frozenset(c.player for c in trace)


_IDENT = re.compile(r"[A-Za-z0-9_]+")


def check_identifier(name: str, what: str = "identifier") -> str:
    # same character set as the text format, so every term can be printed
    if not isinstance(name, str) or not _IDENT.fullmatch(name):
        raise TermError(f"{what} must match [A-Za-z0-9_]+, got {name!r}")
    return name


class Term:
    """A node of a regular term.  Never construct directly; use the builders."""

    __slots__ = ("kind", "player", "branches", "uid")
    sort: str = ""

    def __init__(self, kind: str, player: str | None, uid: int):
        self.kind = kind
        self.player = player
        self.branches: tuple[Branch, ...] = ()
        self.uid = uid

    def __hash__(self) -> int:
        return self.uid

    def __eq__(self, other: object) -> bool:
        return self is other

    def __lt__(self, other: "Term") -> bool:
        return self.uid < other.uid

    @property
    def is_end(self) -> bool:
        return self.kind == END

    def branch_keys(self) -> tuple[tuple[str, str], ...]:
        return tuple((b.partner, b.label) for b in self.branches)

    def children(self) -> tuple["Term", ...]:
        return tuple(b.cont for b in self.branches)

    def __repr__(self) -> str:
        from sessionweave.dsl import pretty

        return f"{type(self).__name__}({pretty(self)!r})"

    def __str__(self) -> str:
        from sessionweave.dsl import pretty

        return pretty(self)

    def __reduce__(self):
        # pickling goes through the text form so that interning is preserved
        from sessionweave.dsl import pretty

        return (_unpickle, (self.sort, pretty(self)))


class Process(Term):
    __slots__ = ()
    sort = PROCESS


class GlobalType(Term):
    __slots__ = ()
    sort = TYPE


def _unpickle(sort: str, text: str) -> Term:
    from sessionweave.dsl import parse_global_type, parse_process

    return parse_process(text) if sort == PROCESS else parse_global_type(text)


_CLASSES = {PROCESS: Process, TYPE: GlobalType}


class NodeView(NamedTuple):
    kind: str
    player: str | None
    branches: tuple[Branch, ...]


def unfold(term: Term) -> NodeView:
    """Top constructor and children of a term (one step of unfolding)."""
    return NodeView(term.kind, term.player, term.branches)


def subterm_refs(root: Term) -> frozenset[Term]:
    """All distinct subterms reachable from ``root``, including ``root``."""
    return frozenset(iter_subterms(root))


def iter_subterms(root: Term) -> Iterator[Term]:
    """Reachable subterms in breadth-first order, branches in canonical order."""
    seen = {root}
    todo = deque([root])
    while todo:
        t = todo.popleft()
        yield t
        for b in t.branches:
            if b.cont not in seen:
                seen.add(b.cont)
                todo.append(b.cont)


# --------------------------------------------------------------------------
# the store


def _shallow_sig(sort, kind, player, branches) -> tuple:
    return (sort, kind, player, tuple((p, l, c.uid) for p, l, c in branches))


class TermStore:
    """Append-only intern table.  All mutation happens under one lock."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._next_uid = 0
        self._shallow: dict[tuple, Term] = {}
        self._cyclic: dict[tuple, Term] = {}

    def __len__(self) -> int:
        return len(self._shallow)

    def _new(self, sort: str, kind: str, player: str | None) -> Term:
        t = _CLASSES[sort](kind, player, self._next_uid)
        self._next_uid += 1
        return t

    def make(self, sort: str, kind: str, player: str | None, branches: Iterable[Branch]) -> Term:
        """Intern a node whose children are already interned."""
        branches = tuple(sorted(branches, key=lambda b: (b.partner, b.label)))
        sig = _shallow_sig(sort, kind, player, branches)
        with self._lock:
            found = self._shallow.get(sig)
            if found is not None:
                return found
            t = self._new(sort, kind, player)
            t.branches = branches
            self._shallow[sig] = t
            return t

    def intern_graph(self, nodes: Sequence[tuple]) -> list[Term]:
        """Intern a raw graph, returning the canonical term for each node.

        Each raw node is ``(sort, kind, player, [(partner, label, child)])``
        where ``child`` is either an index into ``nodes`` or an interned Term.
        """
        with self._lock:
            return self._intern_graph(nodes)

    def _intern_graph(self, nodes: Sequence[tuple]) -> list[Term]:
        n_raw = len(nodes)
        existing: list[Term] = []
        ext_index: dict[Term, int] = {}

        def ext(t: Term) -> int:
            if t not in ext_index:
                for s in iter_subterms(t):
                    if s not in ext_index:
                        ext_index[s] = n_raw + len(existing)
                        existing.append(s)
            return ext_index[t]

        base: list[tuple] = []
        kids: list[list[int]] = []
        for sort, kind, player, branches in nodes:
            branches = sorted(branches, key=lambda b: (b[0], b[1]))
            base.append((sort, kind, player, tuple((p, l) for p, l, _ in branches)))
            kids.append([c if isinstance(c, int) else ext(c) for _, _, c in branches])
        for t in existing:
            base.append((t.sort, t.kind, t.player, t.branch_keys()))
            kids.append([ext_index[c] for c in t.children()])

        # Moore refinement: start from constructor/label signatures
        total = len(base)
        block = _renumber(base)
        while True:
            refined = _renumber([(block[i], tuple(block[c] for c in kids[i])) for i in range(total)])
            if max(refined, default=-1) == max(block, default=-1):
                block = refined
                break
            block = refined

        rep: dict[int, Term] = {}
        for i in range(n_raw, total):
            assert block[i] not in rep, "existing terms are pairwise distinct"
            rep[block[i]] = existing[i - n_raw]

        # one representative raw node per unresolved block
        members: dict[int, int] = {}
        for i in range(n_raw):
            if block[i] not in rep and block[i] not in members:
                members[block[i]] = i

        graph = nx.DiGraph()
        graph.add_nodes_from(members)
        for b, i in members.items():
            for c in kids[i]:
                if block[c] in members:
                    graph.add_edge(b, block[c])
        cond = nx.condensation(graph)
        order = list(nx.topological_sort(cond))
        for scc_id in reversed(order):
            scc = sorted(cond.nodes[scc_id]["members"])
            if len(scc) == 1 and not graph.has_edge(scc[0], scc[0]):
                b = scc[0]
                i = members[b]
                sort, kind, player, labels = base[i]
                brs = [Branch(p, l, rep[block[c]]) for (p, l), c in zip(labels, kids[i])]
                rep[b] = self.make(sort, kind, player, brs)
                continue
            keys = {b: self._scc_key(b, set(scc), members, base, kids, block, rep) for b in scc}
            found = self._cyclic.get(keys[scc[0]])
            if found is not None:
                for b in scc:
                    rep[b] = self._cyclic[keys[b]]
                continue
            for b in scc:
                sort, kind, player, _ = base[members[b]]
                rep[b] = self._new(sort, kind, player)
            for b in scc:
                i = members[b]
                labels = base[i][3]
                t = rep[b]
                t.branches = tuple(Branch(p, l, rep[block[c]]) for (p, l), c in zip(labels, kids[i]))
                self._shallow[_shallow_sig(t.sort, t.kind, t.player, t.branches)] = t
                self._cyclic[keys[b]] = t
        return [rep[block[i]] for i in range(n_raw)]

    @staticmethod
    def _scc_key(root, scc, members, base, kids, block, rep) -> tuple:
        # BFS numbering inside the component; edges leaving it point at uids
        number = {root: 0}
        order = [root]
        out = []
        k = 0
        while k < len(order):
            b = order[k]
            k += 1
            i = members[b]
            sort, kind, player, labels = base[i]
            edges = []
            for (p, l), c in zip(labels, kids[i]):
                cb = block[c]
                if cb in scc:
                    if cb not in number:
                        number[cb] = len(order)
                        order.append(cb)
                    edges.append((p, l, "i", number[cb]))
                else:
                    edges.append((p, l, "x", rep[cb].uid))
            out.append((sort, kind, player, tuple(edges)))
        return tuple(out)


def _renumber(keys: list) -> list[int]:
    table: dict = {}
    return [table.setdefault(k, len(table)) for k in keys]


STORE = TermStore()

END_PROCESS: Process = STORE.make(PROCESS, END, None, ())  # type: ignore[assignment]
END_TYPE: GlobalType = STORE.make(TYPE, END, None, ())  # type: ignore[assignment]


# --------------------------------------------------------------------------
# builders for finite terms


def _check_branches(branches, sort: str, player: str | None, kind: str) -> list[Branch]:
    branches = [Branch(check_identifier(p, "participant"), check_identifier(l, "label"), c) for p, l, c in branches]
    if not branches:
        raise TermError("a choice needs at least one branch")
    seen = set()
    for b in branches:
        key = (b.partner, b.label)
        if key in seen:
            raise TermError(f"duplicate branch {b.partner}.{b.label}")
        seen.add(key)
        if player is not None and b.partner == player:
            raise TermError(f"player {player} cannot communicate with itself")
        if isinstance(b.cont, Term) and b.cont.sort != sort:
            raise TermError(f"continuation of {b.partner}.{b.label} has the wrong sort")
    return branches


def out_choice(branches: Iterable[tuple[str, str, Process]]) -> Process:
    """Internal choice ``q1!l1; P1 (+) ... (+) qn!ln; Pn``."""
    return STORE.make(PROCESS, OUT, None, _check_branches(branches, PROCESS, None, OUT))  # type: ignore[return-value]


def in_choice(branches: Iterable[tuple[str, str, Process]]) -> Process:
    """External choice ``q1?l1; P1 + ... + qn?ln; Pn``."""
    return STORE.make(PROCESS, IN, None, _check_branches(branches, PROCESS, None, IN))  # type: ignore[return-value]


def type_out(player: str, branches: Iterable[tuple[str, str, GlobalType]]) -> GlobalType:
    check_identifier(player, "participant")
    return STORE.make(TYPE, OUT, player, _check_branches(branches, TYPE, player, OUT))  # type: ignore[return-value]


def type_in(player: str, branches: Iterable[tuple[str, str, GlobalType]]) -> GlobalType:
    check_identifier(player, "participant")
    return STORE.make(TYPE, IN, player, _check_branches(branches, TYPE, player, IN))  # type: ignore[return-value]


# --------------------------------------------------------------------------
# equation systems


class Ref(NamedTuple):
    name: str


class Node(NamedTuple):
    """A constructor whose continuations may be names, nodes or terms."""

    sort: str
    kind: str
    player: str | None
    branches: tuple[tuple[str, str, "Expr"], ...]


Expr = Union[Ref, Node, Term]


def end_node(sort: str) -> Node:
    return Node(sort, END, None, ())


def solve(equations: Mapping[str, Expr]) -> dict[str, Term]:
    """Solve a finite system of (mutually) recursive equations.

    Every name maps to the canonical regular term that satisfies the system.
    Raises :class:`UndefinedName` for dangling names and
    :class:`UnguardedRecursion` for definitions such as ``X := Y, Y := X``.
    """
    raw: list[tuple] = []
    name_root: dict[str, int | Term] = {}

    def build(e: Expr) -> int | Term:
        if isinstance(e, Term):
            return e
        if isinstance(e, Ref):
            return ("ref", e.name)  # type: ignore[return-value]
        branches = _check_branches(e.branches, e.sort, e.player, e.kind) if e.kind != END else []
        idx = len(raw)
        raw.append(None)
        raw[idx] = (e.sort, e.kind, e.player, [(p, l, build(c)) for p, l, c in branches])
        return idx

    for name, e in equations.items():
        name_root[name] = build(e)

    def resolve(target, chain=()):
        while isinstance(target, tuple):
            name = target[1]
            if name not in name_root:
                raise UndefinedName(f"undefined name {name}")
            if name in chain:
                raise UnguardedRecursion("unguarded recursion through " + " -> ".join(chain + (name,)))
            chain = chain + (name,)
            target = name_root[name]
        return target

    resolved = {name: resolve(r, ()) for name, r in name_root.items()}
    for k, (sort, kind, player, branches) in enumerate(raw):
        fixed = []
        for p, l, c in branches:
            c = resolve(c)
            csort = raw[c][0] if isinstance(c, int) else c.sort
            if csort != sort:
                raise TermError(f"continuation of {p}.{l} has the wrong sort")
            fixed.append((p, l, c))
        raw[k] = (sort, kind, player, fixed)

    terms = STORE.intern_graph(raw)
    return {name: (terms[r] if isinstance(r, int) else r) for name, r in resolved.items()}
