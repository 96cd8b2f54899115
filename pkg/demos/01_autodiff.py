"""
Reverse-mode gradients on the numpy tape
========================================

Every loss in the package is built from the small op set in ``numcore``.
Here we differentiate a softmax-weighted quadratic and compare against
central differences.
"""
import numpy as np

from armac3 import numcore as nc

rng = np.random.default_rng(0)
x0 = rng.standard_normal((4, 3))
M = rng.standard_normal((4, 4))
M = M + M.T


def f(x):
    S = nc.rowwise_softmax(x)
    return nc.trace_quadratic(S, M)


x = nc.Tensor(x0, requires_grad=True)
with nc.use_tape(nc.Tape()):
    loss = f(x)
    nc.backward(loss)
print("loss:", loss.item())

# central differences, one coordinate at a time
eps = 1e-6
fd = np.zeros_like(x0)
with nc.no_grad():
    for idx in np.ndindex(x0.shape):
        up, dn = x0.copy(), x0.copy()
        up[idx] += eps
        dn[idx] -= eps
        fd[idx] = (f(nc.Tensor(up)).item() - f(nc.Tensor(dn)).item()) / (2 * eps)
print("max |tape - finite diff|:", np.abs(x.grad - fd).max())

# forward ops refuse to produce NaN/Inf
try:
    nc.log(nc.Tensor([0.0]))
except FloatingPointError as exc:
    print("caught:", exc)
