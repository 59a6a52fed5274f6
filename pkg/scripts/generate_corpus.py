"""Write generated typed sessions into corpus/typable.

Sessions are drawn from ``random_typed_session`` with consecutive seeds and
kept when their reachable state space up to depth 8 is small, so the
metatheory suite stays quick.  Selection uses state counts, not timings,
which keeps the output reproducible.

    python3 scripts/generate_corpus.py [--count 12] [--max-states 400]
"""

import argparse
import random
from pathlib import Path

from sessionweave.generators import random_typed_session
from sessionweave.dsl import parse_file, pretty_file
from sessionweave.typecheck import is_typable
from sessionweave.verify import PASS, ExplorationBound, check_stuckness

OUT = Path(__file__).resolve().parent.parent / "corpus" / "typable"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=12)
    ap.add_argument("--max-states", type=int, default=400)
    ap.add_argument("--first-seed", type=int, default=0)
    args = ap.parse_args()

    kept = 0
    seed = args.first_seed
    while kept < args.count:
        ts = random_typed_session(random.Random(seed))
        seed += 1
        # state count of the session LTS; the stuckness walk visits exactly those
        rep = check_stuckness(ts.session, ExplorationBound(k=8))
        if rep.status != PASS or rep.stats["states"] > args.max_states:
            continue
        if not is_typable(ts.gtype, ts.session):
            raise SystemExit(f"seed {seed - 1}: generated session does not typecheck")
        path = OUT / f"gen_{seed - 1:04d}.mps"
        header = f"# generated: seed {seed - 1}, shape {ts.description}\n"
        path.write_text(header + pretty_file(ts.session, ts.gtype, "typable"))
        src = parse_file(path)
        assert src.session == ts.session and src.expected_type is ts.gtype, path
        assert is_typable(src.expected_type, src.session)
        print(f"{path.name}: {rep.stats['states']} states, {ts.description}")
        kept += 1


if __name__ == "__main__":
    main()
