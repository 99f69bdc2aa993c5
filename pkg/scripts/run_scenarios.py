"""Run the golden scenario suite and compare traces against the recorded ones.

    python scripts/run_scenarios.py            # check
    python scripts/run_scenarios.py --update   # re-record golden traces
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from periphemu.runtime import run_files

SUITE = Path(__file__).resolve().parent.parent / "fixtures" / "scenarios" / "suite.json"


def load_suite(path: Path = SUITE) -> list[dict]:
    doc = json.loads(path.read_text())
    return [{k: path.parent / v for k, v in entry.items()} for entry in doc["scenarios"]]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--update", action="store_true", help="overwrite golden traces")
    ap.add_argument("--suite", type=Path, default=SUITE)
    args = ap.parse_args()
    bad = 0
    start = time.perf_counter()
    for entry in load_suite(args.suite):
        result = run_files(entry["machine"], entry["scenario"])
        trace = result.trace_text()
        golden: Path = entry["golden"]
        if args.update and result.passed:
            golden.parent.mkdir(parents=True, exist_ok=True)
            golden.write_text(trace)
        same = golden.exists() and golden.read_text() == trace
        ok = result.passed and same
        bad += not ok
        status = "ok" if ok else ("trace differs" if result.passed else result.message)
        print(f"{entry['scenario'].name:28s} {len(result.trace):4d} records  {status}")
    print(f"{bad} failing, {time.perf_counter() - start:.2f}s")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
