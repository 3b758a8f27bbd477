"""
Scoring every method
====================

Run the full method suite on two synthetic palette images and print the
per-channel D(reference || output).  Outputs and CSVs land in
``demo_output/``.
"""

import warnings
from pathlib import Path

import numpy as np

from colorgrade.evalreport import export_artifacts, export_report, run_suite
from colorgrade.imagecore import ImagePlanar

rng = np.random.default_rng(4)


def palette(k=3):
    colors = rng.uniform(0.2, 0.8, (k, 3))
    x = colors[rng.integers(0, k, 64 * 64)] + 0.04 * rng.standard_normal((64 * 64, 3))
    return ImagePlanar(np.clip(x, 0, 1).reshape(64, 64, 3))


source, target = palette(), palette()
out = Path("demo_output")
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    result = run_suite(source, target, target, output_dir=out / "images")

for rep in sorted(result.reports, key=lambda r: sum(r.kl.values())):
    kl = "  ".join(f"{ch}={v:7.4f}" for ch, v in rep.kl.items())
    print(f"{rep.method:12s} {kl}  {', '.join(rep.flags)}")

export_report(result.reports, out / "report.json")
export_artifacts(result, out / "images")
