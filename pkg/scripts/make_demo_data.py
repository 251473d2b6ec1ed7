#!/usr/bin/env python3
"""Generate a small synthetic implicit-feedback dataset for the CLI walkthrough.

Writes interactions.tsv (user<TAB>item) and side.tsv (item<TAB>tag|tag) into
the target directory. Real datasets in the same TSV layout (e.g. the
MovieLens u.data dump plus a genre file) work identically.
"""

import argparse
from pathlib import Path

from diffgt.rng import RandomSource
from diffgt.synth import clustered_interactions, write_interaction_tsv, write_side_tsv


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--users", type=int, default=120)
    parser.add_argument("--items", type=int, default=160)
    parser.add_argument("--clusters", type=int, default=4)
    parser.add_argument("--edges-per-user", type=int, default=12)
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument("--out", default="demo_data")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graph, side = clustered_interactions(
        args.users, args.items, args.clusters, args.edges_per_user, RandomSource(args.seed)
    )
    write_interaction_tsv(out / "interactions.tsv", graph)
    write_side_tsv(out / "side.tsv", side)
    print(f"wrote {len(graph.edges)} interactions for {args.users} users x {args.items} items -> {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
