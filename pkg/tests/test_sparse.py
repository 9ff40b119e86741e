import csv
import itertools

import numpy as np
import pytest

from semspa.autodiff import Tensor, grad_check, ops
from semspa.sparse import (
    CoordinateIndex,
    KernelOffsets,
    SparseTensor4D,
    build_rulebook,
    coalesce,
    dense_oracle_conv,
    dense_oracle_max_pool,
    gather_dense,
    scatter_dense,
    sparse_conv,
    sparse_max_pool,
)

GRID = (8, 8, 8, 8)


def random_cloud(rng, n_max=20, channels=3, grid=GRID):
    n = int(rng.integers(1, n_max + 1))
    R = np.column_stack([rng.integers(0, g, size=n) for g in grid])
    F = rng.normal(size=(n, channels))
    return coalesce(R, F)


def test_kernel_offsets_counts():
    ko = KernelOffsets((3, 5, 1, 2))
    assert len(ko.offsets) == len(ko) == 30
    assert set(ko.offsets[:, 2]) == {0}
    assert set(ko.offsets[:, 3]) == {-1, 0}
    assert len({tuple(o) for o in ko.offsets}) == 30
    dil = KernelOffsets.temporal(3, dilation=7)
    assert sorted(dil.offsets[:, 3]) == [-7, 0, 7]


def test_coordinate_index_exact_match():
    R = np.array([[0, 0, 0, 0], [1, 2, 3, 4], [7, 0, 1, 1]])
    idx = CoordinateIndex(R)
    q = np.array([[1, 2, 3, 4], [9, 9, 9, 9], [0, 0, 0, 0], [-1, 0, 0, 0], [7, 0, 1, 1]])
    np.testing.assert_array_equal(idx.lookup(q), [1, -1, 0, -1, 2])
    with pytest.raises(ValueError, match="coalesced"):
        CoordinateIndex(np.array([[1, 1, 1, 1], [1, 1, 1, 1]]))


def test_coalesce_no_duplicates_sorts():
    R = np.array([[2, 0, 0, 0], [0, 1, 0, 0], [0, 0, 5, 1]])
    F = np.eye(3)
    st = coalesce(R, F)
    np.testing.assert_array_equal(st.R, [[0, 0, 5, 1], [0, 1, 0, 0], [2, 0, 0, 0]])
    np.testing.assert_array_equal(st.F, F[[2, 1, 0]])


def test_coalesce_merges_duplicates():
    st = coalesce([[1, 1, 1, 1], [1, 1, 1, 1]], [[1.0, 0.0], [0.0, 1.0]])
    assert st.num_points == 1
    np.testing.assert_array_equal(st.F, [[1.0, 1.0]])


@pytest.mark.parametrize("seed", range(5))
def test_coalesce_matches_group_by(seed):
    rng = np.random.default_rng(seed)
    R = rng.integers(0, 3, size=(60, 4))
    F = rng.normal(size=(60, 2))
    expected: dict = {}
    for r, f in zip(map(tuple, R), F):
        expected[r] = expected.get(r, 0.0) + f
    st = coalesce(R, F)
    assert [tuple(r) for r in st.R] == sorted(expected)
    for r, f in zip(map(tuple, st.R), st.F):
        np.testing.assert_allclose(f, expected[r], atol=1e-14)


def test_row_permutation_invariance_bitwise():
    rng = np.random.default_rng(1)
    R = rng.integers(0, 4, size=(40, 4))
    F = rng.integers(-5, 5, size=(40, 3)).astype(float)  # exact sums
    W = rng.normal(size=(81, 3, 2))
    ko = KernelOffsets.cube(3, 3)
    base = sparse_conv(coalesce(R, F), W, ko)
    for _ in range(5):
        perm = rng.permutation(40)
        other = sparse_conv(coalesce(R[perm], F[perm]), W, ko)
        assert other.R.tobytes() == base.R.tobytes()
        assert other.features.tobytes() == base.features.tobytes()


def test_single_point_pointwise_kernel():
    W = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    st = coalesce([[3, 3, 3, 3]], [[1.0, -1.0]])
    out = sparse_conv(st, W, KernelOffsets((1, 1, 1, 1)), bias=np.array([0.5, 0.25]))
    np.testing.assert_array_equal(out.features, [[1 - 3 + 0.5, 2 - 4 + 0.25]])


def test_identity_kernel_reproduces_input():
    rng = np.random.default_rng(2)
    st = random_cloud(rng, channels=4)
    ko = KernelOffsets.cube(3, 3)
    W = np.zeros((len(ko), 4, 4))
    center = int(np.flatnonzero(np.all(ko.offsets == 0, axis=1))[0])
    W[center] = np.eye(4)
    out = sparse_conv(st, W, ko)
    assert out.R.tobytes() == st.R.tobytes()
    np.testing.assert_array_equal(out.features, st.F)


def test_errors():
    st = SparseTensor4D(np.array([[1, 1, 1, 1], [1, 1, 1, 1]]), np.ones((2, 2)))
    with pytest.raises(ValueError, match="coalesced"):
        sparse_conv(st, np.ones((1, 2, 2)), KernelOffsets((1, 1, 1, 1)))
    ok = coalesce([[0, 0, 0, 0]], [[1.0, 1.0]])
    with pytest.raises(ValueError, match="channels"):
        sparse_conv(ok, np.ones((1, 3, 2)), KernelOffsets((1, 1, 1, 1)))


def _check_conv_against_dense(st, k, stride, seed):
    rng = np.random.default_rng(seed)
    ko = KernelOffsets.cube(k, k)
    W = rng.normal(size=(len(ko), st.num_channels, 2))
    b = rng.normal(size=2)
    out = sparse_conv(st, W, ko, bias=b, stride=stride)
    dense = dense_oracle_conv(scatter_dense(st, GRID), W, ko, bias=b, stride=stride)
    expected_R = np.unique(st.R // stride, axis=0)
    np.testing.assert_array_equal(out.R, expected_R)
    return np.abs(out.features - gather_dense(dense, out.R)).max()


def _check_pool_against_dense(st, k, stride):
    ko = KernelOffsets.cube(k, k)
    out = sparse_max_pool(st, ko, stride=stride)
    occ = np.zeros(GRID, dtype=bool)
    occ[tuple(st.R.T)] = True
    pooled, has = dense_oracle_max_pool(scatter_dense(st, GRID), occ, ko, stride=stride)
    candidates = np.unique(st.R // stride, axis=0)
    expected_R = candidates[has[tuple(candidates.T)]]
    np.testing.assert_array_equal(out.R, expected_R)
    return np.abs(out.features - gather_dense(pooled, out.R)).max() if out.num_points else 0.0


@pytest.mark.parametrize("k", [1, 3, 5])
@pytest.mark.parametrize("stride", [1, 2])
def test_sparse_conv_matches_dense_oracle(k, stride):
    rng = np.random.default_rng(100 * k + stride)
    worst = max(_check_conv_against_dense(random_cloud(rng), k, stride, s) for s in range(50))
    assert worst < 1e-12


@pytest.mark.parametrize("k", [1, 3, 5])
@pytest.mark.parametrize("stride", [1, 2])
def test_sparse_max_pool_matches_dense_oracle(k, stride):
    rng = np.random.default_rng(7 * k + stride)
    worst = max(_check_pool_against_dense(random_cloud(rng), k, stride) for _ in range(50))
    assert worst == 0.0


def test_even_kernel_against_dense():
    rng = np.random.default_rng(5)
    st = random_cloud(rng)
    ko = KernelOffsets((2, 2, 2, 1))
    W = rng.normal(size=(len(ko), 3, 2))
    out = sparse_conv(st, W, ko, stride=(2, 2, 2, 1))
    dense = dense_oracle_conv(scatter_dense(st, GRID), W, ko, stride=(2, 2, 2, 1))
    np.testing.assert_allclose(out.features, gather_dense(dense, out.R), atol=1e-12)


def test_pool_examples():
    st = coalesce([[2, 2, 2, 2]], [[1.5, -2.0]])
    out = sparse_max_pool(st, KernelOffsets.cube(3, 3))
    np.testing.assert_array_equal(out.features, st.F)
    two = coalesce([[0, 0, 0, 0], [1, 0, 0, 0]], [[1.0, 5.0], [3.0, 2.0]])
    pooled = sparse_max_pool(two, KernelOffsets((2, 1, 1, 1)), stride=(2, 1, 1, 1))
    np.testing.assert_array_equal(pooled.features, [[3.0, 5.0]])


def test_stride1_preserves_coordinate_set():
    rng = np.random.default_rng(9)
    st = random_cloud(rng)
    out = sparse_conv(st, rng.normal(size=(625, 3, 2)), KernelOffsets.cube(5, 5))
    assert out.R.tobytes() == st.R.tobytes()


@pytest.mark.parametrize("seed", range(3))
def test_linearity_in_features(seed):
    rng = np.random.default_rng(seed)
    st = random_cloud(rng)
    F2 = rng.normal(size=st.F.shape)
    ko = KernelOffsets.cube(3, 3)
    W = rng.normal(size=(len(ko), 3, 4))
    a, b = 0.7, -1.3
    lhs = sparse_conv(st.with_features(a * st.F + b * F2), W, ko).features
    rhs = a * sparse_conv(st, W, ko).features + b * sparse_conv(st.with_features(F2), W, ko).features
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_batches_do_not_mix():
    rng = np.random.default_rng(4)
    a, b = random_cloud(rng), random_cloud(rng)
    ko = KernelOffsets.cube(3, 3)
    W = rng.normal(size=(len(ko), 3, 2))
    joint = sparse_conv(SparseTensor4D.cat([a, b]), W, ko, stride=2)
    sa, sb = sparse_conv(a, W, ko, stride=2), sparse_conv(b, W, ko, stride=2)
    np.testing.assert_array_equal(joint.sample(0).features, sa.features)
    np.testing.assert_array_equal(joint.sample(1).features, sb.features)
    np.testing.assert_array_equal(joint.sample(1).R, sb.R)


def test_rulebook_probe_count_and_pairs():
    st = coalesce([[1, 1, 1, 1], [2, 1, 1, 1], [5, 5, 5, 5]], np.eye(3))
    rb = build_rulebook(st, KernelOffsets.cube(3, 1))
    # each point sees itself; the first two see each other
    assert rb.num_pairs == 5


def test_dense_oracle_properties():
    rng = np.random.default_rng(0)
    ko = KernelOffsets.cube(3, 3)
    W = rng.normal(size=(len(ko), 2, 3))
    imp = np.zeros((5, 5, 5, 5, 2))
    imp[2, 2, 2, 2, 0] = 1.0
    out = dense_oracle_conv(imp, W, ko)
    for k, d in enumerate(ko.offsets):
        np.testing.assert_array_equal(out[tuple(np.array([2, 2, 2, 2]) + d)], W[k, 0])
    assert not dense_oracle_conv(np.zeros((4, 4, 4, 4, 2)), W, ko).any()
    X, Y = rng.normal(size=(2, 4, 4, 4, 4, 2))
    lhs = dense_oracle_conv(2.0 * X - 0.5 * Y, W, ko)
    rhs = 2.0 * dense_oracle_conv(X, W, ko) - 0.5 * dense_oracle_conv(Y, W, ko)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    with pytest.raises(ValueError, match="limit"):
        dense_oracle_conv(np.zeros((17, 16, 16, 16, 1)), np.zeros((1, 1, 1)), KernelOffsets((1, 1, 1, 1)))


def _six_point_cloud(seed):
    rng = np.random.default_rng(seed)
    pts = np.array([[1, 1, 1, 1], [2, 1, 1, 1], [1, 2, 1, 2], [2, 2, 2, 2], [3, 3, 3, 3], [1, 1, 2, 1]])
    return coalesce(pts, rng.normal(size=(6, 3)))


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("stride", [1, 2])
def test_sparse_conv_gradients(seed, stride):
    st = _six_point_cloud(seed)
    rng = np.random.default_rng(seed + 10)
    ko = KernelOffsets.cube(3, 3)
    W = rng.normal(size=(len(ko), 3, 2))
    mix = rng.normal(size=2)

    def wrt_features(F):
        out = sparse_conv(st.with_features(F), W, ko, bias=np.ones(2), stride=stride)
        return ops.sum(ops.power(ops.linear(out.F, mix.reshape(2, 1)), 2.0))

    rep = grad_check(wrt_features, st.F, tol=1e-5)
    assert rep.passed, str(rep)

    def wrt_weight(Wt):
        out = sparse_conv(st, Wt, ko, stride=stride)
        return ops.sum(ops.power(out.F, 2.0))

    rep = grad_check(wrt_weight, W, tol=1e-5)
    assert rep.passed, str(rep)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sparse_max_pool_gradients(seed):
    st = _six_point_cloud(seed)
    rep = grad_check(
        lambda F: ops.sum(ops.power(sparse_max_pool(st.with_features(F), KernelOffsets.cube(3, 3), 2).F, 2.0)),
        st.F,
    )
    assert rep.passed, str(rep)


def test_csv_dump(tmp_path):
    st = coalesce([[1, 2, 3, 4]], [[0.5, -1.0]])
    st.to_csv(tmp_path / "d.csv")
    rows = list(csv.reader(open(tmp_path / "d.csv")))
    assert rows[0] == ["x", "y", "z", "t", "f_0", "f_1"]
    assert rows[1] == ["1", "2", "3", "4", "0.5", "-1.0"]


def test_dense_neighbourhood_brute_force():
    """Rulebook pairs equal the brute-force pair enumeration."""
    rng = np.random.default_rng(3)
    st = random_cloud(rng, n_max=15)
    ko = KernelOffsets((3, 1, 3, 3), (1, 1, 1, 2))
    rb = build_rulebook(st, ko, stride=(2, 1, 1, 1))
    got = {(k, int(o), int(i)) for k, os_, is_ in rb.groups for o, i in zip(os_, is_)}
    want = set()
    s = np.array([2, 1, 1, 1])
    for (o, q), (i, p), (k, d) in itertools.product(enumerate(rb.out_R), enumerate(st.R), enumerate(ko.offsets)):
        if np.array_equal(q * s - d, p):
            want.add((k, o, i))
    assert got == want
