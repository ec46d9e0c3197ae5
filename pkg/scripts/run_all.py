"""Run every CLI command with its default configuration and summarize the verdicts.

    python scripts/run_all.py [--output-dir reports] [--jobs 4]
"""
import argparse
import sys
import time

from nlgrad.cli import DEFAULTS, main


def run(output_dir: str, jobs: int) -> int:
    status = 0
    summary = []
    for command in DEFAULTS:
        t0 = time.perf_counter()
        code = main([command, "--output-dir", output_dir, "--jobs", str(jobs)])
        summary.append((command, code, time.perf_counter() - t0))
        status = max(status, code)
    print()
    for command, code, dt in summary:
        print(f"{command:12s} {'pass' if code == 0 else 'FAIL'}  {dt:6.1f} s")
    return status


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output-dir", default="reports")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    sys.exit(run(args.output_dir, args.jobs))
