"""Likelihood ratios and C_llr from two score populations.

Run: python3 demos/05_likelihood_ratios.py
"""

import numpy as np

from dentreg.lr import LRModel, cllr, likelihood_ratio

rng = np.random.default_rng(0)
same = np.abs(rng.normal(0.01, 0.005, 40))       # errors of true matches
different = np.abs(rng.normal(0.06, 0.02, 1560))  # errors of non-matches

model = LRModel.fit(same, different)
print(f"bandwidths: same {model.bandwidth_h0:.4f}, different {model.bandwidth_h1:.4f}")
for score in (0.005, 0.02, 0.03, 0.05):
    print(f"score {score:.3f}: LR = {likelihood_ratio(model, score):10.3g}")

lr_same = likelihood_ratio(model, same)
lr_diff = likelihood_ratio(model, different)
print(f"C_llr of this system: {cllr(lr_same, lr_diff):.4f}")
print(f"C_llr of an uninformative system (every LR = 1): {cllr([1.0], [1.0]):.1f}")
