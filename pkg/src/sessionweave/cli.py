"""Command line front end: ``sessionweave check|simulate|verify|analyze``.

Exit codes
  check:    0 typable, 1 type failure, 2 growth guard hit, 3 parse or boundedness error
  simulate: 0, or 3 on parse errors
  verify:   0 all expectations met, 1 some failure, 2 bound exhausted (no failure), 3 parse error
  analyze:  0, or 3 on parse errors
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from pathlib import Path

from sessionweave.analysis import INFINITY, boundedness, depth, inactive, players_of_type
from sessionweave.dsl import ParseError, SourceFile, parse_file, pretty_session_inline, pretty_type_inline
from sessionweave.session import is_stuck, is_terminated, session_steps
from sessionweave.typecheck import (
    GROWTH_GUARD_EXCEEDED,
    NO_TYPE_FOUND,
    Derivation,
    Guard,
    Judgement,
    SearchBound,
    check_untypable_exhaustive,
    derivation_to_json,
    failure_to_json,
    typecheck,
)
from sessionweave.typesem import UnboundedTypeError
from sessionweave.verify import (
    BOUND_EXHAUSTED,
    FAIL,
    LF,
    PASS,
    PROPERTIES,
    RACES,
    SF,
    SR,
    ExplorationBound,
    check_lock_freedom,
    check_session_fidelity,
    check_stuckness,
    race_to_json,
    races_report,
    report_to_json,
    verify_all,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_GUARD = 2
EXIT_ERROR = 3

DEFAULT_PROPERTIES = (SR, SF, LF)


class _Style:
    def __init__(self):
        self.on = sys.stdout.isatty() and not os.environ.get("SESSIONWEAVE_NO_COLOR")

    def status(self, text: str) -> str:
        if not self.on:
            return text
        colour = {"pass": "32", "typable": "32", "fail": "31", "untypable": "31"}.get(text, "33")
        return f"\033[{colour}m{text}\033[0m"


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        print("\n".join(text_lines))


def _load(path: str, args) -> SourceFile | None:
    try:
        return parse_file(path)
    except ParseError as e:
        diags = [d._asdict() for d in e.diagnostics]
        _emit(args, {"file": path, "error": "parse", "diagnostics": diags}, [f"{path}:{d}" for d in e.diagnostics])
    except OSError as e:
        _emit(args, {"file": path, "error": "io", "message": str(e)}, [f"{path}: {e}"])
    return None


def _guard(args) -> Guard:
    return Guard(args.guard_judgements, args.guard_queue)


def _bound(args) -> ExplorationBound:
    return ExplorationBound(args.depth, args.max_states, args.guard_queue)


def _fmt_depth(d) -> str:
    return "inf" if d == INFINITY else str(d)


def _derivation_text(d: Derivation, indent: int = 0) -> list[str]:
    lines = [" " * indent + f"[{d.rule}] {d.judgement}"]
    for prem in d.premises:
        lines.extend(_derivation_text(prem, indent + 2))
    return lines


def _boundedness_json(report) -> dict:
    return {
        "bounded": report.bounded,
        "witnesses": [{"subterm": pretty_type_inline(w), "player": p, "depth": "inf"} for w, p, _ in report.witnesses],
    }


# --------------------------------------------------------------------------
# check


def _type_for(src: SourceFile, args):
    """The annotated type, or one found by bounded search (None if none)."""
    if src.expected_type is not None:
        return src.expected_type, "annotation"
    verdict = check_untypable_exhaustive(src.session, SearchBound())
    return verdict.witness, "search"


def cmd_check(args) -> int:
    src = _load(args.file, args)
    if src is None:
        return EXIT_ERROR
    g, origin = _type_for(src, args)
    if g is None:
        payload = {"file": args.file, "verdict": "untypable", "reason": NO_TYPE_FOUND, "type_origin": origin}
        _emit(args, payload, [f"{args.file}: untypable (no type found by bounded search)"])
        return EXIT_FAIL
    try:
        res = typecheck(Judgement.of(g, src.session), _guard(args))
    except UnboundedTypeError as e:
        payload = {"file": args.file, "error": "unbounded", "boundedness": _boundedness_json(boundedness(g))}
        lines = [f"{args.file}: global type is not bounded"]
        lines += [f"  depth of {p} is inf in {pretty_type_inline(w)}" for w, p, _ in e.witnesses]
        _emit(args, payload, lines)
        return EXIT_ERROR
    style = _Style()
    payload = {"file": args.file, "type": pretty_type_inline(g), "type_origin": origin}
    if isinstance(res, Derivation):
        payload["verdict"] = "typable"
        lines = [f"{args.file}: {style.status('typable')} by {pretty_type_inline(g)}"]
        if args.derivation:
            payload["derivation"] = derivation_to_json(res)
            lines += _derivation_text(res, 2)
        _emit(args, payload, lines)
        return EXIT_OK
    payload["verdict"] = "untypable"
    payload["failure"] = failure_to_json(res)
    lines = [f"{args.file}: {style.status('untypable')} {res.reason}", f"  {res.detail}", f"  at {res.judgement}"]
    _emit(args, payload, lines)
    return EXIT_GUARD if res.reason == GROWTH_GUARD_EXCEEDED else EXIT_FAIL


# --------------------------------------------------------------------------
# simulate


def _state_flag(s) -> str:
    if is_terminated(s):
        return "terminated"
    if is_stuck(s):
        return "stuck"
    return "cut"


def _maximal_traces(s, depth_bound: int, limit: int):
    traces = []
    truncated = False
    stack = [(s, ())]
    while stack:
        state, trace = stack.pop()
        steps = session_steps(state)
        if not steps or len(trace) >= depth_bound:
            if len(traces) >= limit:
                truncated = True
                break
            traces.append((trace, state, _state_flag(state) if not steps else "cut"))
            continue
        for st in reversed(steps):
            stack.append((st.target, trace + (st.communication,)))
    return traces, truncated


def _end_states(s, depth_bound: int):
    """Reachable states (to the bound) without steps, each with a shortest trace."""
    parent = {s: None}
    order = [s]
    frontier = [s]
    transitions = 0
    for _ in range(depth_bound):
        nxt = []
        for state in frontier:
            for st in session_steps(state):
                transitions += 1
                if st.target not in parent:
                    parent[st.target] = (state, st.communication)
                    order.append(st.target)
                    nxt.append(st.target)
        frontier = nxt
    transitions += sum(len(session_steps(x)) for x in frontier)
    ends = []
    for state in order:
        if session_steps(state):
            continue
        trace = []
        cur = state
        while parent[cur] is not None:
            cur, beta = parent[cur]
            trace.append(beta)
        ends.append((tuple(reversed(trace)), state, _state_flag(state)))
    return ends, {"states": len(order), "transitions": transitions}


def _trace_line(trace, state, flag) -> str:
    mark = "STUCK " if flag == "stuck" else ""
    return f"{mark}{' '.join(str(b) for b in trace)}  =>  {pretty_session_inline(state)}  [{flag}]"


def _trace_json(trace, state, flag) -> dict:
    return {"trace": [str(b) for b in trace], "final": pretty_session_inline(state), "end": flag}


def cmd_simulate(args) -> int:
    src = _load(args.file, args)
    if src is None:
        return EXIT_ERROR
    s = src.session
    if not session_steps(s):
        flag = _state_flag(s)
        payload = {"file": args.file, "traces": [], "truncated": False, "end_states": [], "no_steps": flag}
        _emit(args, payload, [f"{args.file}: no steps ({flag})"])
        return EXIT_OK
    if args.one:
        rng = random.Random(args.seed)
        trace = []
        state = s
        while len(trace) < args.depth:
            steps = session_steps(state)
            if not steps:
                break
            st = steps[0] if args.seed is None else rng.choice(steps)
            trace.append(st.communication)
            state = st.target
        flag = _state_flag(state) if not session_steps(state) else "cut"
        payload = {"file": args.file, "traces": [_trace_json(tuple(trace), state, flag)]}
        _emit(args, payload, [_trace_line(trace, state, flag)])
        return EXIT_OK
    traces, truncated = _maximal_traces(s, args.depth, args.max_traces)
    ends, lts = _end_states(s, args.depth)
    lines = [f"maximal traces (depth {args.depth}):"]
    lines += ["  " + _trace_line(*t) for t in traces]
    if truncated:
        lines.append(f"  ... truncated after {args.max_traces} traces")
    lines.append(f"end states ({lts['states']} states, {lts['transitions']} transitions explored):")
    lines += ["  " + _trace_line(*t) for t in ends]
    if not ends:
        lines.append("  none within the bound")
    payload = {
        "file": args.file,
        "traces": [_trace_json(*t) for t in traces],
        "truncated": truncated,
        "end_states": [_trace_json(*t) for t in ends],
        "lts": lts,
        "stuck": sum(flag == "stuck" for _, _, flag in ends),
    }
    _emit(args, payload, lines)
    return EXIT_OK


# --------------------------------------------------------------------------
# verify


def _verify_file(path: str, args, properties) -> tuple[dict, str]:
    """Report for one file and its outcome: pass, fail or bound-exhausted."""
    try:
        src = parse_file(path)
    except (ParseError, OSError) as e:
        return {"file": path, "outcome": FAIL, "error": str(e)}, FAIL
    bound = _bound(args)
    g, origin = _type_for(src, args)
    entry: dict = {"file": path, "expected": src.expected_verdict, "expected_reason": src.expected_reason}
    if g is None:
        entry["verdict"] = "untypable"
        entry["reason"] = NO_TYPE_FOUND
        res = None
    else:
        entry["type"] = pretty_type_inline(g)
        entry["type_origin"] = origin
        try:
            res = typecheck(Judgement.of(g, src.session), _guard(args))
        except UnboundedTypeError:
            entry["verdict"] = "error"
            entry["reason"] = "Unbounded"
            entry["outcome"] = FAIL
            return entry, FAIL
        if isinstance(res, Derivation):
            entry["verdict"] = "typable"
        else:
            entry["verdict"] = "untypable"
            entry["reason"] = res.reason
    reports = []
    if entry["verdict"] == "typable":
        j = Judgement.of(g, src.session)
        props = [p for p in properties if p != RACES]
        reports = [report_to_json(r) for r in verify_all(j, props, bound, _guard(args))]
        if RACES in properties:
            rep, findings = races_report(j, bound)
            reports.append(dict(report_to_json(rep), findings=[race_to_json(f) for f in findings]))
    else:
        # evidence for rejected sessions; these reports do not decide the outcome
        if g is not None:
            j = Judgement.of(g, src.session)
            reports.append(report_to_json(check_session_fidelity(j, bound, _guard(args), require_typed=False)))
        reports.append(report_to_json(check_lock_freedom(src.session, bound)))
        reports.append(report_to_json(check_stuckness(src.session, bound)))
        if src.expected_type is not None:
            # another type may still fit; reported for information only
            search = check_untypable_exhaustive(src.session, SearchBound())
            entry["search"] = {"verdict": search.verdict, "explored": search.explored}
            if search.witness is not None:
                entry["search"]["witness"] = pretty_type_inline(search.witness)
    entry["reports"] = reports
    outcome = _outcome(entry, src)
    entry["outcome"] = outcome
    return entry, outcome


def _outcome(entry: dict, src: SourceFile) -> str:
    statuses = [r["status"] for r in entry["reports"]]
    if src.expected_verdict == "untypable":
        ok = entry["verdict"] == "untypable" and entry.get("reason") != GROWTH_GUARD_EXCEEDED
        if src.expected_reason and entry.get("reason") != src.expected_reason:
            ok = False
        return PASS if ok else FAIL
    if entry["verdict"] != "typable":
        if entry.get("reason") == GROWTH_GUARD_EXCEEDED:
            return BOUND_EXHAUSTED
        return FAIL
    if FAIL in statuses:
        return FAIL
    if BOUND_EXHAUSTED in statuses:
        return BOUND_EXHAUSTED
    return PASS


def _corpus_files(root: str) -> list[str]:
    base = Path(root)
    return sorted(str(p) for p in base.rglob("*.mps"))


def cmd_verify(args) -> int:
    properties = tuple(args.property) if args.property else DEFAULT_PROPERTIES
    files = list(args.files)
    if args.corpus is not None:
        files += _corpus_files(args.corpus)
        files = [f for f in files if "/analysis/" not in f.replace(os.sep, "/")]
    if not files:
        print("no input files", file=sys.stderr)
        return EXIT_ERROR
    if len(files) == 1 and args.corpus is None:
        try:
            parse_file(files[0])
        except (ParseError, OSError):
            _load(files[0], args)
            return EXIT_ERROR
    style = _Style()
    entries = []
    outcomes = []
    lines = []
    for f in files:
        entry, outcome = _verify_file(f, args, properties)
        entries.append(entry)
        outcomes.append(outcome)
        verdict = entry.get("verdict", "error")
        reason = f" {entry['reason']}" if entry.get("reason") else ""
        lines.append(f"{style.status(outcome):>16}  {f}: {verdict}{reason}")
        for r in entry.get("reports", []):
            line = f"    {r['property']:<10} {style.status(r['status'])}"
            if r.get("counterexample"):
                c = r["counterexample"]
                line += f"  after [{c['trace']}] {c['clause']}"
                if c.get("communication"):
                    line += f" ({c['communication']})"
            if "findings" in r:
                line += f"  {len(r['findings'])} race finding(s)"
            lines.append(line)
    summary = {o: outcomes.count(o) for o in (PASS, FAIL, BOUND_EXHAUSTED)}
    lines.append(f"{summary[PASS]} passed, {summary[FAIL]} failed, {summary[BOUND_EXHAUSTED]} bound-exhausted")
    payload = {
        "bound": {"k": args.depth, "max_states": args.max_states, "max_queue": args.guard_queue},
        "properties": list(properties),
        "files": entries,
        "summary": summary,
    }
    _emit(args, payload, lines)
    if summary[FAIL]:
        return EXIT_FAIL
    if summary[BOUND_EXHAUSTED]:
        return EXIT_GUARD
    return EXIT_OK


# --------------------------------------------------------------------------
# analyze


def _analyze_type(name: str, g, queue) -> tuple[dict, list[str]]:
    players = sorted(players_of_type(g))
    depths = {p: _fmt_depth(depth(g, p)) for p in players}
    report = boundedness(g)
    msgs = tuple(queue)
    info = {
        "name": name,
        "type": pretty_type_inline(g),
        "players": players,
        "depth": depths,
        "boundedness": _boundedness_json(report),
        "inactive_for_queue": inactive(g, msgs),
    }
    lines = [f"{name} = {pretty_type_inline(g)}", f"  players: {', '.join(players) if players else '(none)'}"]
    lines += [f"  depth({name}, {p}) = {d}" for p, d in depths.items()]
    lines.append(f"  bounded: {'yes' if report.bounded else 'no'}")
    lines += [f"    depth of {p} is inf in {pretty_type_inline(w)}" for w, p, _ in report.witnesses]
    return info, lines


def cmd_analyze(args) -> int:
    src = _load(args.file, args)
    if src is None:
        return EXIT_ERROR
    targets = [(n, src.definitions[n]) for n in src.type_names]
    if src.expected_type is not None:
        targets.append(("type", src.expected_type))
    infos, lines = [], []
    for name, g in targets:
        info, ls = _analyze_type(name, g, src.session.queue)
        infos.append(info)
        lines += ls
    if not targets:
        lines.append(f"{args.file}: no global types")
    _emit(args, {"file": args.file, "types": infos}, lines)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--guard-judgements", type=int, default=10_000, metavar="N")
    common.add_argument("--guard-queue", type=int, default=64, metavar="N")
    common.add_argument("--depth", type=int, default=8, metavar="K", help="trace length bound")
    common.add_argument("--max-states", type=int, default=100_000, metavar="N")

    parser = argparse.ArgumentParser(prog="sessionweave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="typecheck a session file")
    p.add_argument("file")
    p.add_argument("--derivation", action="store_true", help="print the derivation")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", parents=[common], help="list executions of a session")
    p.add_argument("file")
    p.add_argument("--one", action="store_true", help="a single maximal trace")
    p.add_argument("--seed", type=int, default=None, help="pick steps at random with this seed")
    p.add_argument("--max-traces", type=int, default=200, metavar="N")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[common], help="bounded check of the metatheory")
    p.add_argument("files", nargs="*")
    p.add_argument("--corpus", nargs="?", const="corpus", default=None, metavar="DIR")
    p.add_argument("--property", action="append", choices=PROPERTIES)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analyze", parents=[common], help="players, depth and boundedness")
    p.add_argument("file")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.guard_judgements <= 0 or args.guard_queue <= 0 or args.depth <= 0 or args.max_states <= 0:
        print("limits must be positive", file=sys.stderr)
        return EXIT_ERROR
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
