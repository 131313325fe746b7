"""
Evaluating on a synthetic dataset
=================================

Generate a small dataset with the default class mix (tag absent, tilted,
blurred, low contrast, washed out, clean), run the pipeline over it and
print the outcome table on the images that hold a tag and on the full set.
Two reference outcome counts from real shelf photos come first, to show
how the metrics are computed.
"""

import sys
from pathlib import Path

from pricetag import compute_metrics, run_dataset
from pricetag.synthgen import DEFAULT_MIX, class_counts, generate_dataset

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "dataset"
n = int(sys.argv[2]) if len(sys.argv) > 2 else 120

for name, counts in (("tag images", (664, 0, 13, 2)), ("all images", (664, 15, 27, 2))):
    print(f"reference, {name}: {compute_metrics(*counts)}")

print("class counts:", class_counts(n, DEFAULT_MIX))
manifest = generate_dataset(n, out, seed=11)
report = run_dataset(manifest, out_csv=out / "results.csv", include_timing=False)
print(report.table())

misses = [r for r in report.rows if r.outcome in ("FN", "FP")]
for r in misses[:10]:
    got = r.result.summary() if r.result else r.error
    print(f"  {r.outcome} {r.path.name} [{r.truth.condition}] truth {r.truth.price} got {got} IoU {r.iou:.2f}")
print("per-image results:", out / "results.csv")
