"""Write the synthetic corpora referenced by configs/toy_*.yaml into data/."""

import argparse
from pathlib import Path

from cpgnmt.experiments import CORPORA


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data", help="parent directory for the corpora")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("names", nargs="*", default=sorted(CORPORA), help="corpora to build")
    args = ap.parse_args()
    for name in args.names:
        path = CORPORA[name](Path(args.out) / name, seed=args.seed)
        print(f"{name}\t{path}")


if __name__ == "__main__":
    main()
