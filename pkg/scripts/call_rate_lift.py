"""Call-rate lift when tools are defined vs. not, from outcome rates.

Rates are turned into 0/1 samples of size --n; the ratio uses the point
estimates and each side gets its own bootstrap interval.
"""

import argparse

from harmony_harness.analytics import call_rate_lift, indicator_samples

ROWS = {"print_tree": (0.294, 0.986), "search": (0.038, 0.588)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for tool, (base, tools) in ROWS.items():
        lift = call_rate_lift(
            indicator_samples(round(base * args.n), args.n),
            indicator_samples(round(tools * args.n), args.n),
            seed=args.seed,
        )
        ratio = "unbounded" if lift.unbounded else f"{lift.ratio:.2f}x"
        print(f"{tool:12s} baseline {lift.baseline.percent()}  with tools {lift.with_tools.percent()}  lift {ratio}")


if __name__ == "__main__":
    main()
