#!/usr/bin/env python3
"""Optional real-data check against a local MIMIC-III v1.4 copy.

Needs credentialed access, so it is not part of the test suite.

    python scripts/check_mimic.py --admissions ADMISSIONS.csv \
        --notes NOTEEVENTS.csv --output-dir out/mimic

Expected: roughly 45,305 cohort subjects, a positive rate between 5% and
6%, and Bag-of-Words logistic regression AUC in 0.74 +/- 0.05.
"""

import argparse
import json
import os
import sys

from icureadmit.cli import main

EXPECTED_SUBJECTS = 45305
SUBJECT_TOLERANCE = 0.05


def parse_args():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--admissions", required=True)
    p.add_argument("--notes", required=True)
    p.add_argument("--output-dir", default="out/mimic")
    p.add_argument("--threads", type=int)
    p.add_argument("--annotations", help="external CUI annotations; default is the bundled lexicon")
    return p.parse_args()


def main_script():
    args = parse_args()
    common = ["--output-dir", args.output_dir]
    if args.threads:
        common += ["--threads", str(args.threads)]
    featurize = ["featurize"] + (["--annotations", args.annotations] if args.annotations else [])
    for step in (["cohort", "--admissions", args.admissions, "--notes", args.notes], featurize, ["evaluate"]):
        code = main([*step, *common])
        if code:
            return code

    with open(os.path.join(args.output_dir, "cohort_stats.json")) as fh:
        stats = json.load(fh)
    with open(os.path.join(args.output_dir, "report.json")) as fh:
        report = json.load(fh)
    n, pos = stats["retained_count"], stats["positive_count"]
    auc = next(
        r["test_auc"] for r in report["results"]
        if r["classifier"] == "logistic_regression" and r["feature_set"] == "bow"
    )
    checks = [
        ("cohort size", abs(n - EXPECTED_SUBJECTS) <= SUBJECT_TOLERANCE * EXPECTED_SUBJECTS, f"{n} subjects"),
        ("positive rate", 0.05 <= pos / n <= 0.06, f"{pos / n:.4f}"),
        ("BoW logistic AUC", auc is not None and abs(auc - 0.74) <= 0.05, f"{auc}"),
    ]
    for name, ok, detail in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return 0 if all(ok for _, ok, _ in checks) else 1


if __name__ == "__main__":
    sys.exit(main_script())
