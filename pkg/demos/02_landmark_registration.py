"""Recover an unknown camera from paired 3D/2D landmarks (PnP with unknown focal length).

Run: python3 demos/02_landmark_registration.py
"""

import numpy as np

from dentreg.mesh import pair_landmarks
from dentreg.pnpf import score_landmark_comparison, solve_pnpf
from dentreg.synth import generate_cohort

cases = generate_cohort({"A": 1, "B": 1, "C": 1}, seed=3)
photo = cases[2]  # heavy lip occlusion: some smile-line points are hidden
print(f"photo {photo.case_id}: {photo.landmarks2d.present.sum()}/30 landmarks visible")

pairs = pair_landmarks(photo.landmarks3d, photo.landmarks2d, "set1")
sol = solve_pnpf(pairs[:2], photo.intrinsics)
true = photo.camera.to_array()
print(f"solved with {sol.n_pairs} pairs, RMSE {sol.rmse_px:.2e} px")
print("true   camera:", np.round(true, 2))
print("solved camera:", np.round(sol.params.to_array(), 2))

# The same photo against every scan: the matching scan reprojects best.
print("\nscore of this photo against each scan (set1, px):")
for scan in cases:
    cell = score_landmark_comparison(scan.landmarks3d, photo.landmarks2d, "set1",
                                     photo.intrinsics)
    tag = "  <- same person" if scan.case_id == photo.case_id else ""
    print(f"  {scan.case_id}: {cell.score:8.4f}{tag}")
