"""Fit a scan's silhouette to a photo segmentation with MVMO-SH and render the overlay.

Run: python3 demos/03_region_registration.py [out_dir]
"""

import os
import sys

from dentreg.mesh import rasterize_silhouette
from dentreg.mvmo import OptimizerConfig
from dentreg.regfit import RegionFitness, score_region_comparison
from dentreg.reporting import overlay_image, save_png
from dentreg.synth import generate_cohort

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
os.makedirs(out, exist_ok=True)

a, b = generate_cohort({"B": 2}, seed=5)
print(f"photo {a.case_id}: occlusion band covers {a.segmentation.occlusion.mean():.0%} of the image")
print(f"true camera fitness: {RegionFitness(a.segmentation, a.mesh, a.intrinsics)(a.camera):.4f}")

# Three seeded runs; the best one is kept.
cfg = OptimizerConfig(generations=300, seed=0)
for scan in (a, b):
    cell = score_region_comparison(a.segmentation, scan.mesh, a.intrinsics, cfg)
    print(f"scan {scan.case_id}: masked DICE error {cell.score:.4f} "
          f"({cell.evaluations} evaluations, runs {cell.extra['runs']})")
    sil = rasterize_silhouette(scan.mesh, cell.params, a.intrinsics)
    img = overlay_image(a.segmentation.roi, sil, a.segmentation.occlusion)
    path = os.path.join(out, f"overlay_{a.case_id}_{scan.case_id}.png")
    save_png(img, path)
    print(f"  wrote {path} (green overlap, red photo contour, blue scan contour)")
