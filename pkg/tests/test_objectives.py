import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armac3 import numcore as nc
from armac3.errors import ContractError, NumericError
from armac3.graphbuild import sparsify
from armac3.objectives import (LossBreakdown, collapse_loss, cross_network_loss, cross_view_loss, merit_loss,
                               mincut_loss, modularity_loss, struct_loss, supervised_ce, total_loss)

from conftest import max_grad_error, random_stochastic


def graph_from_dense(A, alpha=0.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return sparsify(np.asarray(A, dtype=float), alpha)


def two_triangles():
    A = np.zeros((6, 6))
    for block in ((0, 1, 2), (3, 4, 5)):
        for i, j in itertools.combinations(block, 2):
            A[i, j] = A[j, i] = 1.0
    return graph_from_dense(A)


HARD = np.repeat(np.eye(2), 3, axis=0)


def random_graph(rng, n):
    W = rng.random((n, n))
    W = np.triu(W * (rng.random((n, n)) < 0.5), 1)
    W = W + W.T
    W[0, 1] = W[1, 0] = 0.9
    return graph_from_dense(W)


# ---------------------------------------------------------------- direct-summation oracles

def _cos(u, v):
    dot = math.fsum(a * b for a, b in zip(u, v))
    nu, nv = math.sqrt(math.fsum(a * a for a in u)), math.sqrt(math.fsum(b * b for b in v))
    return 0.0 if nu == 0 or nv == 0 else dot / (nu * nv)


def oracle_cross_view(a, b, tau=1.0):
    n = len(a)
    terms = []
    for i in range(n):
        pos = math.exp(_cos(a[i], b[i]) / tau)
        neg = math.fsum(math.exp(_cos(a[i], a[j]) / tau) for j in range(n) if j != i)
        terms.append(-math.log(pos / (pos + neg)))
    return math.fsum(terms) / n


def oracle_cross_network(a, z, tau=1.0):
    n = len(a)
    terms = []
    for i in range(n):
        den = math.fsum(math.exp(_cos(a[i], z[j]) / tau) for j in range(n))
        terms.append(-math.log(math.exp(_cos(a[i], z[i]) / tau) / den))
    return math.fsum(terms) / n


def oracle_merit(h1, h2, z1, z2, beta, tau=1.0):
    l1 = beta * oracle_cross_view(h1, h2, tau) + (1 - beta) * oracle_cross_network(h1, z2, tau)
    l2 = beta * oracle_cross_view(h2, h1, tau) + (1 - beta) * oracle_cross_network(h2, z1, tau)
    return l1, l2, (l1 + l2) / 2


# ---------------------------------------------------------------- structural

def test_two_triangles_modularity():
    assert abs(modularity_loss(HARD, two_triangles()).item() - (-0.5)) < 1e-12


def test_uniform_assignment_has_zero_modularity(rng):
    g = random_graph(rng, 9)
    assert abs(modularity_loss(np.full((9, 3), 1 / 3), g).item()) < 1e-12


def test_halved_null_convention_scores_uniform_negative():
    # with the null term divided by 2w, ΣB ≠ 0 and the uniform partition scores −1/(4K)
    g = two_triangles()
    val = modularity_loss(np.full((6, 2), 0.5), g, "halved-null").item()
    assert val == pytest.approx(-1 / 8, abs=1e-12)


@pytest.mark.parametrize("K", [2, 3, 4])
def test_collapse_endpoints(K):
    n = 4 * K
    balanced = np.repeat(np.eye(K), 4, axis=0)
    collapsed = np.zeros((n, K))
    collapsed[:, 0] = 1
    assert abs(collapse_loss(balanced).item()) < 1e-12
    assert abs(collapse_loss(collapsed).item() - (math.sqrt(K) - 1)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(2, 5), st.integers(0, 10_000))
def test_collapse_bounds(n, K, seed):
    S = random_stochastic(np.random.default_rng(seed), n, K)
    v = collapse_loss(S).item()
    assert -1e-12 <= v <= math.sqrt(K) - 1 + 1e-12


def test_mincut_two_triangles():
    cut, ortho = mincut_loss(HARD, two_triangles())
    assert abs(cut.item() + 1) < 1e-12 and abs(ortho.item()) < 1e-12
    assert abs(struct_loss(HARD, two_triangles(), "mincut").item() + 1) < 1e-12


def test_mincut_dense_oracle(rng):
    g = random_graph(rng, 8)
    S = random_stochastic(rng, 8, 3)
    A, D = g.dense(), np.diag(g.degrees)
    StS = S.T @ S
    expected = -np.trace(S.T @ A @ S) / np.trace(S.T @ D @ S) + np.linalg.norm(
        StS / np.linalg.norm(StS) - np.eye(3) / np.sqrt(3))
    assert abs(struct_loss(S, g, "mincut").item() - expected) < 1e-12


def test_mincut_guard_on_isolated_mass():
    A = np.zeros((3, 3))
    A[0, 1] = A[1, 0] = 1
    g = graph_from_dense(A)
    # all assignment mass on the isolated node 2
    S = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(NumericError):
        mincut_loss(S, g)


def test_struct_breakdown_is_sum_of_parts(rng):
    g = random_graph(rng, 7)
    S = random_stochastic(rng, 7, 2)
    br = LossBreakdown()
    total = struct_loss(S, g, "modularity", breakdown=br).item()
    assert total == br.l_mod + br.l_collapse == br.l_struct


def test_component_partition_maximizes_modularity():
    # two cliques of sizes 5 and 7, no edges between; enumerate all 2-partitions
    n, sizes = 12, (5, 7)
    A = np.zeros((n, n))
    A[:5, :5] = 1
    A[5:, 5:] = 1
    np.fill_diagonal(A, 0)
    g = graph_from_dense(A)
    truth = np.repeat([0, 1], sizes)
    best = modularity_loss(np.eye(2)[truth], g).item()
    for bits in range(2 ** (n - 1)):
        labels = np.array([(bits >> i) & 1 for i in range(n)])
        assert modularity_loss(np.eye(2)[labels], g).item() >= best - 1e-12


@pytest.mark.parametrize("mode", ["modularity", "mincut"])
def test_struct_gradients(mode, rng):
    for _ in range(3):
        n = int(rng.integers(4, 10))
        g = random_graph(rng, n)
        logits = rng.standard_normal((n, 3))
        fn = lambda z: struct_loss(nc.rowwise_softmax(z), g, mode)
        assert max_grad_error(fn, [logits]) < 1e-5


# ---------------------------------------------------------------- contrastive

def test_cross_view_closed_forms():
    same = np.ones((2, 3))
    assert abs(cross_view_loss(same, same).item() - math.log(2)) < 1e-12
    one = np.array([[0.3, -1.2]])
    assert cross_view_loss(one, 2 * one).item() == 0.0


def test_cross_network_closed_forms():
    z = np.eye(2)
    assert cross_network_loss(z, z).item() == pytest.approx(-math.log(math.e / (math.e + 1)), abs=1e-12)
    assert cross_network_loss([[1.0, 2.0]], [[-3.0, 0.5]]).item() == 0.0


@pytest.mark.parametrize("tau", [1.0, 0.5])
def test_contrastive_matches_direct_summation(tau, rng):
    for _ in range(10):
        n, h = int(rng.integers(1, 9)), int(rng.integers(1, 6))
        a, b = rng.standard_normal((n, h)), rng.standard_normal((n, h))
        assert abs(cross_view_loss(a, b, tau).item() - oracle_cross_view(a.tolist(), b.tolist(), tau)) < 1e-10
        assert abs(cross_network_loss(a, b, tau).item() - oracle_cross_network(a.tolist(), b.tolist(), tau)) < 1e-10


def test_merit_view_swap_symmetry(rng):
    h1, h2, z1, z2 = (rng.standard_normal((6, 4)) for _ in range(4))
    l1, l2, lc = merit_loss(h1, h2, z1, z2, 0.5)
    m1, m2, mc = merit_loss(h2, h1, z2, z1, 0.5)
    assert l1.item() == m2.item() and l2.item() == m1.item() and lc.item() == mc.item()


def test_merit_beta_one_ignores_teacher(rng):
    h1, h2, z1, z2 = (rng.standard_normal((5, 3)) for _ in range(4))
    a = merit_loss(h1, h2, z1, z2, 1.0)[2].item()
    b = merit_loss(h1, h2, -z2, 3 * z1, 1.0)[2].item()
    assert a == b


def test_merit_beta_zero_single_node():
    x = np.array([[1.0, 2.0]])
    assert merit_loss(x, -x, x, x, 0.0)[2].item() == 0.0


def test_row_rescaling_invariance(rng):
    a, b = rng.standard_normal((5, 3)), rng.standard_normal((5, 3))
    a2 = a.copy()
    a2[2] *= 7.5
    assert cross_view_loss(a, b).item() == pytest.approx(cross_view_loss(a2, b).item(), abs=1e-12)
    assert cross_network_loss(a, b).item() == pytest.approx(cross_network_loss(a2, b).item(), abs=1e-12)


def test_cross_network_stops_teacher_gradient(rng):
    h = nc.Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    z = nc.Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    with nc.use_tape(nc.Tape()):
        nc.backward(cross_network_loss(h, z))
    assert np.all(z.grad == 0) and np.any(h.grad != 0)


def test_contrastive_gradients(rng):
    for _ in range(4):
        n, h = int(rng.integers(2, 8)), int(rng.integers(2, 6))
        arrs = [rng.standard_normal((n, h)) for _ in range(4)]
        fn = lambda h1, h2: merit_loss(h1, h2, arrs[2], arrs[3], 0.4)[2]
        assert max_grad_error(fn, arrs[:2]) < 1e-5


# ---------------------------------------------------------------- supervised and totals

def test_supervised_ce_values():
    labels = np.array([0, 1, 1, 0, 1])
    mask = np.array([True, True, True, True, False])
    assert supervised_ce(np.eye(2)[labels], labels, mask).item() == 0.0
    assert supervised_ce(np.full((5, 2), 0.5), labels, mask).item() == pytest.approx(4 * math.log(2), abs=1e-12)
    logits = np.zeros((5, 2))
    assert supervised_ce(logits, labels, mask, from_logits=True).item() == pytest.approx(4 * math.log(2))


def test_supervised_ce_gradient_only_on_mask(rng):
    labels = rng.integers(0, 3, 8)
    mask = np.zeros(8, dtype=bool)
    mask[[1, 4, 6]] = True
    z = nc.Tensor(rng.standard_normal((8, 3)), requires_grad=True)
    with nc.use_tape(nc.Tape()):
        nc.backward(supervised_ce(nc.rowwise_softmax(z), labels, mask))
    assert np.all(z.grad[~mask] == 0) and np.all(np.any(z.grad[mask] != 0, axis=1))
    fn = lambda z: supervised_ce(nc.rowwise_softmax(z), labels, mask)
    assert max_grad_error(fn, [rng.standard_normal((8, 3))]) < 1e-5


def test_supervised_ce_empty_mask():
    with pytest.raises(ContractError):
        supervised_ce(np.full((3, 2), 0.5), [0, 1, 0], [False] * 3)


def test_total_loss_combinations():
    s, c, u = nc.Tensor(2.0), nc.Tensor(3.0), nc.Tensor(5.0)
    assert total_loss("unsup", {"l_struct": s, "l_con": c}, 0.3).item() == 2.0 + 0.3 * 3.0
    assert total_loss("unsup", {"l_struct": s, "l_con": c}, 0.0).item() == 2.0
    assert total_loss("semi", {"l_struct": s, "l_con": c, "l_sup": u}, 0.3, 1.0).item() == 0.3 * 3.0 + 5.0 + 2.0
    with pytest.raises(ContractError):
        total_loss("semi", {"l_struct": s, "l_con": c}, 0.3)


def test_log_row_blanks_missing_terms():
    br = LossBreakdown(l_struct=0.25, total=1.5)
    row = br.log_row(3, 1e-4)
    assert row[0] == "3" and row[1] == "" and row[-1] == "0.0001"
    assert len(row) == len(LossBreakdown.LOG_COLUMNS)
