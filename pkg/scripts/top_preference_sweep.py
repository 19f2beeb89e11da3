"""Cluster counts of HAP and greedy while sweeping only the top-layer preference.

    python3 scripts/top_preference_sweep.py --lower -1.5 -3.0 --top -3.5 -14 --steps 8
"""

import argparse

import numpy as np

from hap.datagen import problem_from_sequences
from hap.experiments import SeqRecoveryConfig, sequence_trees, top_preference_sweep
from hap.io import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tree-index", type=int, default=0, help="which size-filtered tree to use")
    ap.add_argument("--lower", type=float, nargs="+", default=[-1.5, -3.0])
    ap.add_argument("--top", type=float, nargs=2, default=(-3.5, -14.0))
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--out", default="results/top_preference_sweep.csv")
    args = ap.parse_args()

    seed, tree = sequence_trees(SeqRecoveryConfig(num_trees=args.tree_index + 1))[-1]
    L = len(args.lower) + 1
    problem = problem_from_sequences(tree, L, list(args.lower) + [args.top[0]])
    rows = top_preference_sweep(problem, np.linspace(args.top[0], args.top[1], args.steps))
    print(f"tree seed {seed}, {tree.num_nodes} sequences, lower preferences {args.lower}")
    print(f"{'top c':>8}  {'HAP counts':<16} greedy counts")
    for r in rows:
        print(f"{r['top_preference']:8.2f}  {str(r['counts_hap']):<16} {r['counts_greedy']}")
    write_csv(args.out, ["top_preference", "counts_hap", "counts_greedy"],
              [[r["top_preference"], " ".join(map(str, r["counts_hap"])), " ".join(map(str, r["counts_greedy"]))]
               for r in rows])
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
