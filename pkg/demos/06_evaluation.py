"""
Label alignment, AUC and paired significance
============================================
"""
import numpy as np

from armac3.metrics import align_labels, apply_mapping, roc_auc, wilcoxon_signed_rank

truth = np.array([0, 0, 0, 1, 1, 1, 2, 2])
clusters = np.array([2, 2, 1, 0, 0, 0, 1, 1])
mapping = align_labels(clusters, truth)
print("mapping:", mapping, "aligned:", apply_mapping(clusters, mapping))

print("AUC of {0.9,0.8,0.4,0.3} vs {1,0,1,0}:", roc_auc([0.9, 0.8, 0.4, 0.3], [1, 0, 1, 0]))

# ten runs where method A beats method B every time
a = np.array([0.78, 0.77, 0.79, 0.76, 0.78, 0.77, 0.78, 0.79, 0.77, 0.78])
b = a - np.linspace(0.01, 0.05, 10)
print("one-sided exact p:", wilcoxon_signed_rank(a, b), "(= 1/1024)")

rng = np.random.default_rng(3)
x, y = rng.normal(0.2, 1, 25), rng.normal(0, 1, 25)
print("n=25 exact:", round(wilcoxon_signed_rank(x, y, method="exact"), 4),
      "normal:", round(wilcoxon_signed_rank(x, y, method="normal"), 4))
