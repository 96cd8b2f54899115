import warnings

import numpy as np
import pytest

from armac3 import numcore as nc
from armac3.datasets import gen_sbm

# the acceptance fixture: 60 subjects, two planted blocks
SBM_ARGS = dict(n=60, K=2, p_in=0.5, p_out=0.05, feature_dim=10, noise_sigma=0.3)


def sbm(seed=7, **kw):
    args = {**SBM_ARGS, **kw}
    return gen_sbm(seed=seed, **args)


def analytic_grads(fn, arrays):
    """Tape gradients of ``fn(*tensors)`` w.r.t. every input array."""
    tensors = [nc.Tensor(a.copy(), requires_grad=True) for a in arrays]
    with nc.use_tape(nc.Tape()):
        loss = fn(*tensors)
        nc.backward(loss)
    return [t.grad for t in tensors]


def numeric_grads(fn, arrays, eps=1e-6):
    """Central differences, one coordinate at a time."""
    out = []
    with nc.no_grad():
        for k, a in enumerate(arrays):
            g = np.zeros_like(a)
            for idx in np.ndindex(a.shape):
                vals = []
                for sign in (1.0, -1.0):
                    pert = [b.copy() for b in arrays]
                    pert[k][idx] += sign * eps
                    vals.append(fn(*[nc.Tensor(p) for p in pert]).item())
                g[idx] = (vals[0] - vals[1]) / (2 * eps)
            out.append(g)
    return out


def relative_error(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale < 1e-8:
        return float(np.linalg.norm(a - b))
    return float(np.linalg.norm(a - b) / scale)


def max_grad_error(fn, arrays, eps=1e-6):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        an = analytic_grads(fn, arrays)
        nu = numeric_grads(fn, arrays, eps)
    return max(relative_error(a, n) for a, n in zip(an, nu))


def random_stochastic(rng, n, k):
    S = rng.random((n, k)) + 1e-3
    return S / S.sum(axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
