"""Regenerate the criterion 9 baseline from a fresh criterion 6 run.

Usage: ``python3 tests/data/make_baseline.py`` from the repository root.
"""

import json
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

from test_acceptance import BASELINE, criterion6_run, criterion9_diagnostics  # noqa: E402


def main():
    pb, traj, dt = criterion6_run()
    data = criterion9_diagnostics(traj[-1].network, pb.h)
    data["F"] = traj[-1].F
    BASELINE.write_text(json.dumps(data, indent=1) + "\n")
    print(f"wrote {BASELINE} after {dt:.0f}s, F={traj[-1].F!r}")


if __name__ == "__main__":
    main()
