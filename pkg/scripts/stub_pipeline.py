#!/usr/bin/env python3
"""Run every CLI stage end to end on a small synthetic corpus with stub backends.

Needs no model downloads. Outputs land in a fresh --workdir (a temp dir by default).
"""

import argparse
import json
import os
import tempfile
from pathlib import Path

from privfill.cli import main as cli

REVIEWS = [
    "The soup was cold. The waiter was rude. We left early.",
    "Great pasta and friendly staff. Dr. Lee recommended it. We will return.",
    "Parking was hard to find. Inside it was cozy. The tea was good.",
    "Service took forever. Food was fine though.",
    "Best pizza in town! Open late. Prices are fair.",
    "Too noisy for a date. The wine list was short.",
]
AUTHORS = ["ann", "bob", "cat"]


def write_inputs(root: Path, n_docs: int):
    docs = [{"id": f"r{i:03d}", "text": REVIEWS[i % len(REVIEWS)],
             "utility_label": "pos" if i % len(REVIEWS) in (1, 2, 4) else "neg",
             "privacy_label": AUTHORS[i % 3]} for i in range(n_docs)]
    (root / "docs.jsonl").write_text("".join(json.dumps(d) + "\n" for d in docs))
    emails = [{"user": AUTHORS[i % 3], "id": f"e{i}",
               "body": f"Item {i} is ready.\n-----Original Message-----\nold thread\nThanks,\nSam"}
              for i in range(12)]
    (root / "emails.jsonl").write_text("".join(json.dumps(e) + "\n" for e in emails))
    wiki = [{"text": "The river is long. It flows east. Boats use it. Fish live there. It floods."}]
    (root / "wiki.jsonl").write_text(json.dumps(wiki[0]) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", type=Path)
    ap.add_argument("--docs", type=int, default=60)
    ap.add_argument("--epsilon", type=float, default=2.0)
    args = ap.parse_args()

    root = args.workdir or Path(tempfile.mkdtemp(prefix="privfill-"))
    root.mkdir(parents=True, exist_ok=True)
    if any(root.iterdir()):
        raise SystemExit(f"{root} is not empty")
    write_inputs(root, args.docs)
    os.chdir(root)

    eps = str(args.epsilon)
    steps = [
        ["prep", "--source", "enron", "--in", "emails.jsonl", "--out", "enron.jsonl"],
        ["infill", "--style", "wiki", "--in", "wiki.jsonl", "--out", "infill.jsonl"],
        ["calibrate", "--backend", "stub:toy", "--in", "docs.jsonl", "--out", "cal.json"],
    ]
    for mech in ("privfill", "privfill_dp", "dp_prompt"):
        step = ["rewrite", "--mechanism", mech, "--backend", "stub:toy", "--in", "docs.jsonl",
                "--out", f"{mech}.jsonl", "--overwrite"]
        if mech != "privfill":
            step += ["--epsilon", eps, "--calibration", "cal.json"]
        steps.append(step)
        for kind in ("utility", "privacy"):
            steps.append(["evaluate", "--kind", kind, "--originals", "docs.jsonl", "--rewritten", f"{mech}.jsonl",
                          "--out", f"{mech}.{kind}.json", "--trainer", "tfidf", "--dataset", "toy"])
    reports = [s[s.index("--out") + 1] for s in steps if s[0] == "evaluate"]
    steps.append(["report", *reports, "--out", "table.txt"])

    for argv in steps:
        code = cli(argv)
        if code:
            raise SystemExit(f"step failed ({code}): {' '.join(argv)}")
    print(f"outputs in {root}")


if __name__ == "__main__":
    main()
