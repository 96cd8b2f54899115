"""
The loss terms on toy inputs
============================

Two disconnected triangles make the modularity and cut terms easy to
check by hand; the contrastive terms have closed forms on tiny inputs.
"""
import itertools
import math

import numpy as np

from armac3.graphbuild import sparsify
from armac3.objectives import collapse_loss, cross_network_loss, cross_view_loss, merit_loss, \
    modularity_loss, struct_loss

A = np.zeros((6, 6))
for block in ((0, 1, 2), (3, 4, 5)):
    for i, j in itertools.combinations(block, 2):
        A[i, j] = A[j, i] = 1.0
g = sparsify(A, 0.0)
S = np.repeat(np.eye(2), 3, axis=0)

print("modularity loss, block partition:", modularity_loss(S, g).item())      # -0.5
print("collapse loss, balanced:", collapse_loss(S).item())                     # 0
print("collapse loss, everything in one cluster:",
      collapse_loss(np.tile([1.0, 0.0], (6, 1))).item(), "=", math.sqrt(2) - 1)
print("min-cut structural loss:", struct_loss(S, g, "mincut").item())          # -1

same = np.ones((2, 3))
print("cross-view, identical embeddings:", cross_view_loss(same, same).item(), "= log 2")
print("cross-network, orthogonal targets:", cross_network_loss(np.eye(2), np.eye(2)).item())

rng = np.random.default_rng(0)
h1, h2, z1, z2 = (rng.standard_normal((5, 4)) for _ in range(4))
l1, l2, l_con = merit_loss(h1, h2, z1, z2, beta=0.5)
m1, m2, m_con = merit_loss(h2, h1, z2, z1, beta=0.5)
print("view swap exchanges L1/L2:", l1.item() == m2.item(), "and keeps L_con:", l_con.item() == m_con.item())
