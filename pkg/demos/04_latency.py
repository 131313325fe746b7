"""
Where the time goes
===================

Per-stage latency on full-size 1350x700 tags, single threaded, after a
warm-up run so that compiled kernels are cached.
"""

import warnings

import numba

from pricetag import Price
from pricetag.pipeline import bench_images
from pricetag.synthgen import TagSpec, render_tag

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    numba.set_num_threads(1)

images = [render_tag(TagSpec(t, Price(1999, 2), 1350, 700), seed=t)[0] for t in (1, 2, 4, 5)]
rep = bench_images(images, repetitions=5)
print(rep.table())
print(f"binarization + labeling: {rep.share(['binarize', 'label']):.0%} of the end-to-end median")
