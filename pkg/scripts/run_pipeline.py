#!/usr/bin/env python3
"""Generate a synthetic trip file and run the full analysis report on it.

Usage: python scripts/run_pipeline.py [workdir] [n_records]
"""

import os
import sys

from accelstats.cli import main

workdir = sys.argv[1] if len(sys.argv) > 1 else "pipeline_out"
n = sys.argv[2] if len(sys.argv) > 2 else "200000"
os.makedirs(workdir, exist_ok=True)

trips = os.path.join(workdir, "trips.csv")
rc = main(["synth", "--n", n, "--seed", "42", "--out", trips])
if rc != 0:
    sys.exit(rc)

# Desk-scale convergence settings; the chunk must be small enough that the
# requested stability window fits inside the file.
chunk = str(max(1000, int(n) // 40))
rc = main(["report", "--input", trips, "--out-dir", workdir,
           "--chunk", chunk, "--epsilon", "5e-3", "--window", "10"])
print(f"report bundle: {os.path.join(workdir, 'report.json')}")
sys.exit(rc)
