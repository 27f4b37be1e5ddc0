"""Print median metrics per (method, bits) from one or more results.csv files.

    python scripts/summarize.py results/acceptance_mnist/results.csv
"""

import argparse
import csv
from collections import defaultdict
from statistics import median


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("results", nargs="+")
    ap.add_argument("--metric", default="test_metric",
                    choices=["train_metric", "validation_metric", "test_metric"])
    args = ap.parse_args()

    for path in args.results:
        groups = defaultdict(list)
        hidden = {}
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        for r in rows:
            key = (r["method"], int(r["bits"]))
            if r[args.metric]:
                groups[key].append(float(r[args.metric]))
            hidden[key] = r["hidden_size"]
        name = rows[0]["metric"] if rows else "?"
        print(f"{path}  ({name}, median over seeds)")
        print(f"  {'method':<10}{'bits':>5}{'hidden':>8}{'n':>4}{'median':>10}")
        for (method, bits), vals in sorted(groups.items()):
            print(f"  {method:<10}{bits:>5}{hidden[(method, bits)]:>8}{len(vals):>4}{median(vals):>10.3f}")


if __name__ == "__main__":
    main()
