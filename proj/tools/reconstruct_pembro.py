#!/usr/bin/env python3
"""Rebuild data/pembro.csv from per-interval counts.

Overall survival, pembrolizumab alone (group 1) vs cetuximab with
chemotherapy (group 0), KEYNOTE-048 full population. Follow-up is cut into
five-month intervals; within each interval the event times and the censoring
times are spread evenly, separately: with d events in [a, b) the j-th sits at
a + (b - a) * j / (d + 1).

The interval counts are not printed anywhere in usable form. They were chosen
so that the rebuilt data match the published aggregates: group sizes and event
totals (301/237, 300/264), median follow-up 0.96 y, maximum follow-up 3.96 y,
the milestone survival, median and 3.5-year RMST estimates with their standard
errors, the one-sided score and 2-year survival p-values (0.0100, 0.0053) and
the 0.87 correlation between those two statistics.
"""

import argparse
import csv
from pathlib import Path

MONTH = 1.0 / 12.0
WIDTH = 5 * MONTH

# (events, censored) per interval [0,5), [5,10), ... months
COUNTS = {
    0: [(54, 1), (86, 1), (50, 1), (42, 2), (11, 0), (9, 10), (8, 6), (2, 12), (1, 2), (1, 1)],
    1: [(73, 1), (55, 0), (46, 0), (34, 5), (9, 1), (11, 13), (7, 1), (0, 11), (1, 31), (1, 1)],
}


def spread(lo, hi, k):
    return [lo + (hi - lo) * j / (k + 1) for j in range(1, k + 1)]


def rows():
    out = []
    for group, table in COUNTS.items():
        for k, (events, censored) in enumerate(table):
            lo, hi = k * WIDTH, (k + 1) * WIDTH
            out += [(t, 1, group) for t in spread(lo, hi, events)]
            out += [(t, 0, group) for t in spread(lo, hi, censored)]
    out.sort(key=lambda r: (r[2], r[0], -r[1]))
    return out


def main():
    default = Path(__file__).resolve().parent.parent / "data" / "pembro.csv"
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=default)
    args = ap.parse_args()
    data = rows()
    with args.out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "event", "group"])
        for t, e, g in data:
            w.writerow([repr(t), e, g])
    for g in (0, 1):
        sub = [r for r in data if r[2] == g]
        print(f"group {g}: {len(sub)} subjects, {sum(r[1] for r in sub)} events")


if __name__ == "__main__":
    main()
