"""Rebuild the mention-vs-call cross-reference table from reference counts.

Prints each tool's mention rate with a seed-averaged percentile-bootstrap
interval, its call count and verdict. Use --seeds 1 for a single-seed table.
"""

import argparse

import numpy as np

from harmony_harness.analytics import ToolEvidence, bootstrap_ci, indicator_samples
from harmony_harness.registry import default_registry

N = 160
COUNTS = {  # tool: (samples mentioning it, actual calls)
    "print_tree": (45, 101),
    "search": (55, 11),
    "open_file": (71, 3),
    "apply_patch": (4, 8),
    "read_file": (40, 1),
    "list_files": (17, 2),
    "delete_file": (14, 0),
    "write_file": (12, 0),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--resamples", type=int, default=1000)
    args = ap.parse_args()

    reg = default_registry()
    print(f"{'tool':12s} {'mentions [95% CI]':24s} {'calls':>5s}  verdict")
    for name, (k, calls) in COUNTS.items():
        cis = [bootstrap_ci(indicator_samples(k, N), args.resamples, seed=s) for s in range(args.seeds)]
        lo = 100 * np.mean([c.lo for c in cis])
        hi = 100 * np.mean([c.hi for c in cis])
        ev = ToolEvidence(name, k, N, calls, reg.is_alias(name, "repo_browser"))
        ci = f"{100 * k / N:.1f}% [{lo:.1f}, {hi:.1f}]"
        print(f"{name:12s} {ci:24s} {calls:5d}  {ev.verdict.value}")


if __name__ == "__main__":
    main()
