"""Bounded model checking of typed sessions.

Subject reduction and session fidelity are checked by a breadth-first walk
over judgements reachable from a typed one.  Lock-freedom and stuckness walk
the session alone.  Race findings are informational.

A report is ``pass`` when every trace of length up to ``k`` was covered,
``fail`` with a replayable counterexample, or ``bound-exhausted`` when the
state or queue limit stopped the walk before that.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from sessionweave.session import Session, session_steps, step_session
from sessionweave.terms import Communication, GlobalType
from sessionweave.typecheck import (
    DEFAULT_GUARD,
    GROWTH_GUARD_EXCEEDED,
    Guard,
    Judgement,
    TypingCache,
)
from sessionweave.typesem import TypeConfig, step_with, type_steps

SR = "SR"
SF = "SF"
LF = "LF"
STUCKNESS = "Stuckness"
RACES = "Races"
PROPERTIES = (SR, SF, LF, STUCKNESS, RACES)

PASS = "pass"
FAIL = "fail"
BOUND_EXHAUSTED = "bound-exhausted"


@dataclass(frozen=True)
class ExplorationBound:
    k: int = 8
    max_states: int = 100_000
    max_queue: int = 64

    def __post_init__(self):
        if self.k <= 0 or self.max_states <= 0 or self.max_queue <= 0:
            raise ValueError("exploration bounds must be positive")


DEFAULT_BOUND = ExplorationBound()


@dataclass(frozen=True)
class Counterexample:
    trace: tuple[Communication, ...]
    session: Session
    gtype: GlobalType | None
    clause: str
    communication: Communication | None = None
    participant: str | None = None


@dataclass(frozen=True)
class VerificationReport:
    property: str
    status: str
    counterexample: Counterexample | None = None
    stats: dict = field(default_factory=dict)
    complete: bool = False
    note: str = ""
    reached: frozenset = field(default=frozenset(), repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return self.status == PASS


def _require_typed(prop: str, j: Judgement, typer: TypingCache) -> VerificationReport | None:
    """None when ``j`` is typable, a bound-exhausted report when the guard stops typing."""
    failure = typer(j)
    if failure is None:
        return None
    if failure.reason == GROWTH_GUARD_EXCEEDED:
        return VerificationReport(prop, BOUND_EXHAUSTED, None, {}, False, f"typing guard hit: {failure}")
    raise ValueError(f"judgement is not typable: {failure}")


def _walk(
    root,
    bound: ExplorationBound,
    expand: Callable,
    queue_len: Callable,
):
    """Breadth-first walk to depth ``bound.k``.

    ``expand(state, trace)`` returns successor (communication, state) pairs
    or raises :class:`_Found` to stop with a counterexample.  Returns
    (visited, stats, exhausted, complete).
    """
    visited = {root: ()}
    todo = deque([(root, ())])
    frontier_open = False
    exhausted = False
    transitions = revisits = deepest = 0
    while todo:
        state, trace = todo.popleft()
        deepest = max(deepest, len(trace))
        if queue_len(state) > bound.max_queue:
            exhausted = True
            continue
        succ = expand(state, trace)
        transitions += len(succ)
        for beta, nxt in succ:
            if nxt in visited:
                revisits += 1
                continue
            if len(trace) + 1 > bound.k:
                frontier_open = True
                continue
            if len(visited) >= bound.max_states:
                exhausted = True
                continue
            visited[nxt] = trace + (beta,)
            todo.append((nxt, trace + (beta,)))
    stats = {
        "states": len(visited),
        "transitions": transitions,
        "revisits": revisits,
        "max_trace": deepest,
    }
    return visited, stats, exhausted, not frontier_open and not exhausted


class _Found(Exception):
    def __init__(self, cex: Counterexample):
        self.cex = cex


class _GuardHit(Exception):
    pass


def _typed(typer: TypingCache, j: Judgement, trace, jd: Judgement, beta) -> None:
    failure = typer(j)
    if failure is None:
        return
    if failure.reason == GROWTH_GUARD_EXCEEDED:
        raise _GuardHit(str(failure))
    raise _Found(Counterexample(trace, jd.session, jd.gtype, f"successor untypable ({failure.reason})", beta))


def _report(prop, root, bound, expand, queue_len, note="") -> VerificationReport:
    try:
        visited, stats, exhausted, complete = _walk(root, bound, expand, queue_len)
    except _Found as e:
        return VerificationReport(prop, FAIL, e.cex, {}, False, note)
    except _GuardHit as e:
        return VerificationReport(prop, BOUND_EXHAUSTED, None, {}, False, f"typing guard hit: {e}")
    status = BOUND_EXHAUSTED if exhausted else PASS
    return VerificationReport(prop, status, None, stats, complete, note, frozenset(visited))


def check_subject_reduction(
    j: Judgement, bound: ExplorationBound = DEFAULT_BOUND, guard: Guard = DEFAULT_GUARD
) -> VerificationReport:
    """Every session step of a typed judgement is a type step to a typed judgement."""
    typer = TypingCache(guard)
    early = _require_typed(SR, j, typer)
    if early is not None:
        return early

    def expand(jd: Judgement, trace):
        out = []
        cfg = TypeConfig(jd.gtype, jd.queue)
        for st in session_steps(jd.session):
            beta = st.communication
            ts = step_with(cfg, beta)
            if ts is None:
                raise _Found(Counterexample(trace, jd.session, jd.gtype, "no matching type step", beta))
            if ts.target.queue != st.target.queue:
                raise _Found(Counterexample(trace, jd.session, jd.gtype, "queues differ after the step", beta))
            nxt = Judgement(ts.target.gtype, st.target.network, st.target.queue)
            _typed(typer, nxt, trace, jd, beta)
            out.append((beta, nxt))
        return out

    return _report(SR, j, bound, expand, lambda jd: len(jd.queue))


def check_session_fidelity(
    j: Judgement,
    bound: ExplorationBound = DEFAULT_BOUND,
    guard: Guard = DEFAULT_GUARD,
    require_typed: bool = True,
) -> VerificationReport:
    """Every type step of a typed judgement is a session step to a typed judgement.

    With ``require_typed=False`` the judgement need not be typable and only
    the step-matching clause is checked (used to test mutated sessions).
    """
    typer = TypingCache(guard)
    if require_typed:
        early = _require_typed(SF, j, typer)
        if early is not None:
            return early

    def expand(jd: Judgement, trace):
        steps = type_steps(TypeConfig(jd.gtype, jd.queue))
        targets = []
        for ts in steps:
            nxt = step_session(jd.session, ts.communication)
            if nxt is None:
                raise _Found(Counterexample(trace, jd.session, jd.gtype, "no matching session step", ts.communication))
            targets.append((ts, nxt))
        out = []
        for ts, nxt in targets:
            beta = ts.communication
            if nxt.queue != ts.target.queue:
                raise _Found(Counterexample(trace, jd.session, jd.gtype, "queues differ after the step", beta))
            nj = Judgement(ts.target.gtype, nxt.network, nxt.queue)
            if require_typed:
                _typed(typer, nj, trace, jd, beta)
            out.append((beta, nj))
        return out

    return _report(SF, j, bound, expand, lambda jd: len(jd.queue))


def _session_of(x) -> tuple[Session, GlobalType | None]:
    if isinstance(x, Judgement):
        return x.session, x.gtype
    return x, None


def _session_expand(s: Session, trace):
    return [(st.communication, st.target) for st in session_steps(s)]


def check_lock_freedom(x: Judgement | Session, bound: ExplorationBound = DEFAULT_BOUND) -> VerificationReport:
    """Every live participant of every reachable state can eventually act.

    The search for a continuation from a state is itself bounded by
    ``bound.max_states`` states.
    """
    s, g = _session_of(x)
    inner_exhausted = False

    def can_all_act(state: Session) -> tuple[set[str], bool]:
        waiting = set(state.network)
        seen = {state}
        todo = deque([state])
        while todo and waiting:
            cur = todo.popleft()
            for st in session_steps(cur):
                waiting.discard(st.communication.player)
                if st.target not in seen:
                    if len(seen) >= bound.max_states:
                        return waiting, True
                    seen.add(st.target)
                    todo.append(st.target)
        return waiting, False

    def expand(state: Session, trace):
        nonlocal inner_exhausted
        waiting, hit = can_all_act(state)
        if waiting and not hit:
            p = min(waiting)
            raise _Found(Counterexample(trace, state, g, f"{p} can never act", participant=p))
        inner_exhausted = inner_exhausted or hit
        return _session_expand(state, trace)

    rep = _report(LF, s, bound, expand, lambda st: len(st.queue))
    if rep.status == PASS and inner_exhausted:
        return VerificationReport(LF, BOUND_EXHAUSTED, None, rep.stats, False, "continuation search hit max_states")
    return rep


def check_stuckness(x: Judgement | Session, bound: ExplorationBound = DEFAULT_BOUND) -> VerificationReport:
    """No reachable state is stuck (non-terminated without transitions)."""
    s, g = _session_of(x)

    def expand(state: Session, trace):
        succ = _session_expand(state, trace)
        if not succ and (len(state.network) or state.queue):
            raise _Found(Counterexample(trace, state, g, "stuck state"))
        return succ

    return _report(STUCKNESS, s, bound, expand, lambda st: len(st.queue))


# --------------------------------------------------------------------------
# input races

CONFLUENT = "confluent"
NON_CONFLUENT = "non-confluent"


@dataclass(frozen=True)
class RaceFinding:
    state: Session
    trace: tuple[Communication, ...]
    receiver: str
    inputs: tuple[Communication, ...]
    classification: str


def _race_at(state: Session, trace) -> list[RaceFinding]:
    by_receiver: dict[str, list[Communication]] = {}
    for st in session_steps(state):
        c = st.communication
        if c.kind == "in":
            by_receiver.setdefault(c.player, []).append(c)
    findings = []
    for r, inputs in sorted(by_receiver.items()):
        if len({c.partner for c in inputs}) < 2:
            continue
        confluent = True
        for a in inputs:
            for b in inputs:
                if a.partner >= b.partner:
                    continue
                sa, sb = step_session(state, a), step_session(state, b)
                ab = step_session(sa, b) if sa is not None else None
                ba = step_session(sb, a) if sb is not None else None
                if ab is None or ba is None or ab != ba:
                    confluent = False
        findings.append(RaceFinding(state, trace, r, tuple(inputs), CONFLUENT if confluent else NON_CONFLUENT))
    return findings


def find_races(x: Judgement | Session, bound: ExplorationBound = DEFAULT_BOUND) -> list[RaceFinding]:
    """States where a receiver has enabled inputs from different senders.

    A finding is confluent when, for every pair of such inputs, both orders
    are possible and reach the same session.  This classification is a
    heuristic reading of "innocuous race".
    """
    return races_report(x, bound)[1]


def races_report(
    x: Judgement | Session, bound: ExplorationBound = DEFAULT_BOUND
) -> tuple[VerificationReport, list[RaceFinding]]:
    s, _ = _session_of(x)
    findings: list[RaceFinding] = []

    def expand(state: Session, trace):
        findings.extend(_race_at(state, trace))
        return _session_expand(state, trace)

    _, stats, exhausted, complete = _walk(s, bound, expand, lambda st: len(st.queue))
    stats = dict(stats, findings=len(findings), confluent=sum(f.classification == CONFLUENT for f in findings))
    return VerificationReport(
        RACES,
        BOUND_EXHAUSTED if exhausted else PASS,
        None,
        stats,
        complete,
        "informational; confluence classification is heuristic",
        frozenset(),
    ), findings


# --------------------------------------------------------------------------
# replay and serialization


def replay(root: Judgement | Session, cex: Counterexample) -> bool:
    """Re-execute a counterexample trace and confirm the reported state."""
    from sessionweave.session import apply_trace

    s, g = _session_of(root)
    try:
        reached = apply_trace(s, cex.trace)
    except Exception:
        return False
    if reached != cex.session:
        return False
    if g is not None and cex.gtype is not None:
        cfg = TypeConfig(g, s.queue)
        for beta in cex.trace:
            st = step_with(cfg, beta)
            if st is None:
                return False
            cfg = st.target
        if cfg.gtype is not cex.gtype:
            return False
    return True


def counterexample_to_json(c: Counterexample) -> dict:
    from sessionweave.dsl import pretty_session_inline, pretty_type_inline

    return {
        "trace": " ".join(str(b) for b in c.trace),
        "state": pretty_session_inline(c.session),
        "type": pretty_type_inline(c.gtype) if c.gtype is not None else None,
        "clause": c.clause,
        "communication": str(c.communication) if c.communication is not None else None,
        "participant": c.participant,
    }


def report_to_json(r: VerificationReport) -> dict:
    return {
        "property": r.property,
        "status": r.status,
        "complete": r.complete,
        "stats": dict(sorted(r.stats.items())),
        "counterexample": counterexample_to_json(r.counterexample) if r.counterexample else None,
        "note": r.note,
    }


def race_to_json(f: RaceFinding) -> dict:
    from sessionweave.dsl import pretty_session_inline

    return {
        "trace": " ".join(str(b) for b in f.trace),
        "state": pretty_session_inline(f.state),
        "receiver": f.receiver,
        "inputs": [str(c) for c in f.inputs],
        "classification": f.classification,
    }


def verify_all(
    j: Judgement,
    properties: Iterable[str] = (SR, SF, LF),
    bound: ExplorationBound = DEFAULT_BOUND,
    guard: Guard = DEFAULT_GUARD,
) -> list[VerificationReport]:
    out = []
    for prop in properties:
        if prop == SR:
            out.append(check_subject_reduction(j, bound, guard))
        elif prop == SF:
            out.append(check_session_fidelity(j, bound, guard))
        elif prop == LF:
            out.append(check_lock_freedom(j, bound))
        elif prop == STUCKNESS:
            out.append(check_stuckness(j, bound))
        elif prop == RACES:
            out.append(races_report(j, bound)[0])
        else:
            raise ValueError(f"unknown property {prop}")
    return out
