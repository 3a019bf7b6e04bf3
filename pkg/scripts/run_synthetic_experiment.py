#!/usr/bin/env python3
"""Run synth -> cohort -> featurize -> evaluate -> report on synthetic data.

    python scripts/run_synthetic_experiment.py --output-dir out/planted
    python scripts/run_synthetic_experiment.py --signal-strength 0 --n-subjects 6000 \
        --positive-rate 0.3 --output-dir out/null
"""

import argparse
import sys
import time

from icureadmit.cli import main


def parse_args():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--output-dir", default="out/synthetic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--n-subjects", type=int, default=2000)
    p.add_argument("--positive-rate", type=float, default=0.06)
    p.add_argument("--n-signal-terms", type=int, default=10)
    p.add_argument("--signal-strength", type=float, default=0.8)
    p.add_argument("--top-k", type=int, default=20)
    return p.parse_args()


def main_script():
    args = parse_args()
    common = ["--output-dir", args.output_dir, "--seed", str(args.seed)]
    if args.threads:
        common += ["--threads", str(args.threads)]
    steps = [
        ["synth", "--n-subjects", str(args.n_subjects), "--positive-rate", str(args.positive_rate),
         "--n-signal-terms", str(args.n_signal_terms), "--signal-strength", str(args.signal_strength)],
        ["cohort"],
        ["featurize"],
        ["evaluate"],
        ["report", "-k", str(args.top_k)],
    ]
    for step in steps:
        start = time.perf_counter()
        code = main([*step, *common])
        print(f"# {step[0]}: exit {code}, {time.perf_counter() - start:.1f} s", file=sys.stderr)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main_script())
