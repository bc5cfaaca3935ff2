#!/usr/bin/env python3
"""Emit SVG contour overlays for the two bivariate model hypotheses.

The normal model produces elliptical level sets; the Pareto model produces
the four-sided pattern.  Output goes to model_contours/{bndm,bpdm}.svg.

Usage: python scripts/contour_figure.py [outdir]
"""

import os
import sys

from accelstats.cli import main

outdir = sys.argv[1] if len(sys.argv) > 1 else "model_contours"
os.makedirs(outdir, exist_ok=True)

levels = "1e-06,0.0001,0.001,0.01,0.1"
rc1 = main(["contour", "--model", "bndm", "--sigma-x", "0.47", "--sigma-y", "0.136",
            "--levels", levels, "--out-format", "svg",
            "--out", os.path.join(outdir, "bndm.svg")])
rc2 = main(["contour", "--model", "bpdm", "--levels", levels, "--out-format", "svg",
            "--out", os.path.join(outdir, "bpdm.svg")])
rc3 = main(["contour", "--model", "bpdm", "--levels", levels,
            "--out", os.path.join(outdir, "bpdm.json")])
sys.exit(rc1 or rc2 or rc3)
