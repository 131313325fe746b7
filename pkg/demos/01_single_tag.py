"""
Reading one price tag, stage by stage
=====================================

Render a synthetic tag, then follow it through the pipeline: adaptive
binarization, the opened and raw branches, digit-sized components, the
clusters each branch proposes, and finally the rectified crop that the
recognizer reads. Intermediate images land in ``demo_out/single``.
"""

import sys
from pathlib import Path

import numpy as np

from pricetag import PipelineConfig, Price, run_single
from pricetag.binarize import NiblackParams, derive_window, niblack
from pricetag.cc import label_components
from pricetag.imgcore import to_gray
from pricetag.morph import StructElem, opening
from pricetag.pnm import write_image
from pricetag.synthgen import TagSpec, render_tag
from pricetag.zonefind import derive_size_filter, find_clusters, size_filter

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "single"
out.mkdir(parents=True, exist_ok=True)

# a type-2 tag: label text, a barcode, and the price near the bottom
img, truth = render_tag(TagSpec(2, Price(12999, 2), 1200, 600), seed=5)
write_image(out / "input.ppm", img)
H, W = img.shape[:2]
print(f"image {W}x{H}, true price {truth.price}, true zone {truth.zone.bounding_rect()}")

# the window follows the expected digit size, not the image size
cfg = PipelineConfig()
est = cfg.tag.digit_estimate(H)
win = derive_window(est)
print(f"expected digit {est.digit_w}x{est.digit_h} px -> Niblack window {win[0]}x{win[1]}")
binary = niblack(to_gray(img), NiblackParams(cfg.niblack_k, *win))
opened = opening(binary, StructElem(cfg.se_side))
write_image(out / "binary.pgm", binary)
write_image(out / "opened.pgm", opened)
print(f"foreground: raw {binary.mean():.1%}, opened {opened.mean():.1%}")

params = derive_size_filter(cfg.tag, W, H)
for name, b in (("opened", opened), ("raw", binary)):
    comps = label_components(b)
    cands = size_filter(comps, params)
    res = find_clusters(cands, cfg.tag, W, H, name, prefiltered=True)
    best = max(res.clusters, key=lambda c: c.score, default=None)
    print(f"{name:>6}: {len(comps)} components, {len(cands)} digit-sized, {len(res.clusters)} clusters", end="")
    if best is not None:
        print(f"; best {len(best.members)} members, dot {best.dot is not None}, score {best.score:.2f}")
    else:
        print()

# the whole thing in one call, with the annotated debug images; the first
# call loads the compiled kernels, so time the second
run_single(img, cfg)
result = run_single(img, cfg, debug_dir=out)
print(f"result: {result.summary()} (branch {result.branch}, skew {result.skew:.2f} deg)")
slow = sorted(result.stage_timings.items(), key=lambda kv: -kv[1])[:4]
print("slowest stages:", ", ".join(f"{k} {v / 1000:.1f} ms" for k, v in slow))
print("debug images:", sorted(p.name for p in out.iterdir()))
