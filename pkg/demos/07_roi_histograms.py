"""
From voxel values to histogram features
=======================================

Each subject contributes, per region of interest, the normalized
histogram of its voxel values in [0, 1]. Concatenating p regions with q
bins gives p*q features.
"""
import numpy as np

from armac3.datasets import RoiVoxelDump, roi_histogram_features

rng = np.random.default_rng(0)
p, subjects = 9, ["s01", "s02", "s03"]
values = [[rng.beta(2, 5, size=rng.integers(50, 200)) for _ in range(p)] for _ in subjects]
dump = RoiVoxelDump(subjects, list(range(p)), values)

for q in (20, 10):
    fm = roi_histogram_features(dump, q)
    print(f"q={q}: feature matrix {fm.values.shape}, each region sums to",
          np.unique(fm.values.reshape(len(subjects), p, q).sum(axis=2).round(12)))
