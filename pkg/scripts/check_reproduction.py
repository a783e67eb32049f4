#!/usr/bin/env python3
"""Compare report metrics against reference targets within a tolerance.

For reproduction studies against externally published numbers: feed it the
report JSONs from `simquery run` plus a targets file, and it prints the
deviation per report. Deviations are reported, never hard-failed, because
reproductions with real encoders depend on checkpoint revisions and data
preparation outside this tool's control. Exit code 1 merely signals that
at least one report fell outside its tolerance.

Targets file (JSON): a list of objects with keys
  match:    {"provider": ..., "method": ..., "dataset_label": ...}
            (any subset; all given fields must equal the report's)
  accuracy: target value
  tolerance: allowed absolute deviation (default 0.05)
"""

from __future__ import annotations

import argparse
import json
import sys


def matches(report: dict, criteria: dict) -> bool:
    return all(report.get(key) == value for key, value in criteria.items())


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("reports", nargs="+", help="report JSON files from 'simquery run'")
    ap.add_argument("--targets", required=True, help="JSON file of reference targets")
    args = ap.parse_args()

    with open(args.targets, encoding="utf-8") as f:
        targets = json.load(f)
    reports = []
    for path in args.reports:
        with open(path, encoding="utf-8") as f:
            reports.append((path, json.load(f)))

    any_out = False
    for target in targets:
        criteria = target.get("match", {})
        tol = float(target.get("tolerance", 0.05))
        want = float(target["accuracy"])
        hits = [(path, rep) for path, rep in reports if matches(rep, criteria)]
        if not hits:
            print(f"NO REPORT matched {criteria}")
            any_out = True
            continue
        for path, rep in hits:
            got = float(rep["accuracy"])
            delta = got - want
            status = "within" if abs(delta) <= tol else "OUTSIDE"
            if status == "OUTSIDE":
                any_out = True
            print(
                f"{status} tolerance: {path} accuracy={got:.3f} "
                f"target={want:.3f} delta={delta:+.3f} (tol {tol:.3f})"
            )
    return 1 if any_out else 0


if __name__ == "__main__":
    sys.exit(main())
