import json

import numpy as np
import pytest

from semspa.autodiff import Tensor, grad_check_params, ops
from semspa.data import SkeletonSequence, SynthSpec, resample_temporal, synth_generate, voxelize
from semspa.sparse import (
    KernelOffsets,
    SparseTensor4D,
    coalesce,
    dense_oracle_conv,
    gather_dense,
    scatter_dense,
    sparse_conv,
)
from semspa.spa import (
    SPA3p1DBlock,
    SPA4DBlock,
    SPABlockConfig,
    SPANet,
    SPANetConfig,
    activation_records,
    dump_activations,
    main_path_parameter_count,
    tiny_spa_config,
)

GRID = (8, 8, 8, 8)


def cloud(rng, n=20, c=3, grid=GRID):
    R = np.column_stack([rng.integers(0, g, size=n) for g in grid])
    return coalesce(R, rng.normal(size=(n, c)))


def cfg4(c_in=3, c_out=4, stride=1, **kw):
    kw.setdefault("k", 3)
    return SPABlockConfig("4d", c_in, c_out, stride=stride, dilations=(1, 2), branches=2, **kw)


def cfg31(c_in=3, c_out=4, stride=1, **kw):
    kw.setdefault("k", 3)
    return SPABlockConfig("3+1d", c_in, c_out, stride=stride, dilations=(1, 2), branches=2, **kw)


def randomize_biases(block, rng):
    for name, p in block.named_parameters():
        if name.endswith("bias"):
            p.data[...] = rng.normal(size=p.shape)


def dense_conv_at(x, conv, R_out):
    d = dense_oracle_conv(scatter_dense(x, GRID), conv.weight.data, conv.offsets, None if conv.bias is None else conv.bias.data, conv.stride)
    return gather_dense(d, R_out)


def test_config_validation():
    with pytest.raises(ValueError, match="variant"):
        SPABlockConfig("2d", 3, 4)
    with pytest.raises(ValueError, match="divisible"):
        SPABlockConfig("4d", 3, 6, branches=4)
    with pytest.raises(ValueError, match="dilations"):
        SPABlockConfig("4d", 3, 8, branches=2, dilations=(1, 2, 3))
    with pytest.raises(ValueError):
        SPA4DBlock(cfg31(), np.random.default_rng(0))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("c_in,c_out,stride", [(4, 4, 1), (3, 4, 1), (3, 4, 2)])
def test_4d_block_matches_dense_oracle(seed, c_in, c_out, stride):
    rng = np.random.default_rng(seed)
    blk = SPA4DBlock(cfg4(c_in, c_out, stride), rng)
    randomize_biases(blk, rng)
    x = cloud(rng, c=c_in)
    y = blk(x)
    branches = [dense_conv_at(x, b, y.R) for b in blk.branches]
    expected = np.maximum(np.concatenate(branches, axis=1), 0)
    expected += x.features if blk.residual is None else dense_conv_at(x, blk.residual, y.R)
    np.testing.assert_allclose(y.features, expected, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("c_in,c_out,stride", [(4, 4, 1), (3, 4, 1), (3, 4, 2)])
def test_3p1d_block_matches_dense_oracle(seed, c_in, c_out, stride):
    rng = np.random.default_rng(seed)
    blk = SPA3p1DBlock(cfg31(c_in, c_out, stride), rng)
    randomize_biases(blk, rng)
    x = cloud(rng, c=c_in)
    y = blk(x)
    h = np.maximum(dense_conv_at(x, blk.spatial, y.R), 0)
    hs = SparseTensor4D(y.R, h, coalesced=True)
    w = c_out // 2
    parts = [dense_conv_at(hs.with_features(h[:, i * w : (i + 1) * w]), t, y.R) for i, t in enumerate(blk.temporal)]
    expected = np.maximum(np.concatenate(parts, axis=1), 0)
    expected += x.features if blk.residual is None else dense_conv_at(x, blk.residual, y.R)
    np.testing.assert_allclose(y.features, expected, atol=1e-12)


def test_4d_mixes_space_and_time_jointly():
    # the second point sees the first only through the joint (1, 0, 0, 1) kernel tap
    x = coalesce([[3, 3, 3, 3], [4, 3, 3, 4]], [[1.0], [0.0]])
    blk = SPA4DBlock(SPABlockConfig("4d", 1, 1, k=3, k_t=3, dilations=(1,), branches=1), np.random.default_rng(0))
    blk.branches[0].weight.data[...] = 0.0
    k = int(np.flatnonzero((blk.branches[0].offsets.offsets == [1, 0, 0, 1]).all(axis=1))[0])
    blk.branches[0].weight.data[k] = 2.0
    y = blk(x)
    np.testing.assert_array_equal(y.features[:, 0], [1.0, 2.0])


def test_3p1d_spatial_mixing_example():
    x = coalesce([[2, 2, 2, 0], [3, 2, 2, 0], [5, 5, 5, 1]], [[1.0], [10.0], [100.0]])
    blk = SPA3p1DBlock(SPABlockConfig("3+1d", 1, 1, k=3, dilations=(1,), branches=1), np.random.default_rng(0))
    blk.spatial.weight.data[...] = 1.0
    h = blk.spatial_stage(x).features[:, 0]
    np.testing.assert_array_equal(h, [11.0, 11.0, 100.0])


def test_temporal_identity_center_is_identity():
    rng = np.random.default_rng(1)
    blk = SPA3p1DBlock(cfg31(c_in=4, c_out=4), rng)
    for t in blk.temporal:
        t.weight.data[...] = 0.0
        t.weight.data[1] = np.eye(2)  # centre tap of k_t = 3
    x = cloud(rng, c=4)
    h = blk.spatial_stage(x)
    y = blk(x)
    np.testing.assert_allclose(y.features, np.maximum(h.features, 0) + x.features, atol=1e-14)


@pytest.mark.parametrize("make", [lambda: cfg4(c_out=4), lambda: cfg31(c_out=4)])
def test_stride_one_preserves_coordinates(make):
    rng = np.random.default_rng(2)
    cfg = make()
    blk = SPA4DBlock(cfg, rng) if cfg.variant == "4d" else SPA3p1DBlock(cfg, rng)
    x = cloud(rng)
    y = blk(x)
    assert y.R.tobytes() == x.R.tobytes()


def test_4d_pointwise_when_kernels_are_one():
    rng = np.random.default_rng(3)
    blk = SPA4DBlock(SPABlockConfig("4d", 3, 4, k=1, k_t=1, dilations=(1, 1), branches=2), rng)
    x = cloud(rng)
    lin = np.concatenate([b.weight.data[0] for b in blk.branches], axis=1)
    expected = np.maximum(x.features @ lin, 0) + x.features @ blk.residual.weight.data[0]
    np.testing.assert_allclose(blk(x).features, expected, atol=1e-14)


@pytest.mark.parametrize("k,k_t,c", [(3, 3, 8), (5, 3, 16), (3, 5, 4)])
def test_parameter_counts(k, k_t, c):
    c4 = SPABlockConfig("4d", c, c, k=k, k_t=k_t)
    c31 = SPABlockConfig("3+1d", c, c, k=k, k_t=k_t)
    b4, b31 = SPA4DBlock(c4, np.random.default_rng(0)), SPA3p1DBlock(c31, np.random.default_rng(0))
    weights4 = sum(b.weight.size for b in b4.branches)
    weights31 = b31.spatial.weight.size + sum(t.weight.size for t in b31.temporal)
    assert weights4 == main_path_parameter_count(c4) == k**3 * k_t * c * c
    assert weights31 == main_path_parameter_count(c31)
    assert weights31 <= (k**3 + k_t) * c * c
    assert weights4 > weights31


@pytest.mark.parametrize("seed", range(5))
def test_spatial_stage_never_mixes_frames(seed):
    rng = np.random.default_rng(seed)
    blk = SPA3p1DBlock(cfg31(c_out=4), rng)
    x = cloud(rng, n=40)
    frame = int(x.R[0, 3])
    full = blk.spatial_stage(x)
    masked = x.with_features(np.where((x.R[:, 3] == frame)[:, None], x.features, 0.0))
    iso = blk.spatial_stage(masked)
    rows = full.R[:, 3] == frame
    assert full.features[rows].tobytes() == iso.features[rows].tobytes()


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("stride", [1, 2])
def test_factorized_4d_composition_equals_3p1d_bitwise(seed, stride):
    rng = np.random.default_rng(seed)
    blk = SPA3p1DBlock(cfg31(c_out=4, stride=stride), rng)
    randomize_biases(blk, rng)
    x = cloud(rng, n=30)
    # 4-D kernels with the factorized layout: (k, k, k, 1) then (1, 1, 1, k_t)
    spatial_offsets = KernelOffsets((3, 3, 3, 1), (1, 1, 1, 1))
    h = sparse_conv(x, blk.spatial.weight, spatial_offsets, blk.spatial.bias, (stride, stride, stride, 1))
    h = h.with_features(ops.relu(h.feature_tensor()))
    outs = []
    for i, (t, d) in enumerate(zip(blk.temporal, (1, 2))):
        part = h.with_features(ops.slice_axis(h.feature_tensor(), 2 * i, 2 * i + 2, axis=1))
        outs.append(sparse_conv(part, t.weight, KernelOffsets((1, 1, 1, 3), (1, 1, 1, d)), t.bias).features)
    manual = np.maximum(np.concatenate(outs, axis=1), 0)
    res = x.features if blk.residual is None else blk.residual(x).features
    manual = manual + res
    assert blk(x).features.tobytes() == manual.tobytes()


def test_empty_input_gives_empty_output():
    empty = SparseTensor4D(np.zeros((0, 4)), np.zeros((0, 3)), coalesced=True)
    for blk in (SPA4DBlock(cfg4(), np.random.default_rng(0)), SPA3p1DBlock(cfg31(), np.random.default_rng(0))):
        y = blk(empty)
        assert y.num_points == 0 and y.num_channels == 4


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("variant", ["4d", "3+1d"])
@pytest.mark.parametrize("stride", [1, 2])
def test_block_gradients(seed, variant, stride):
    rng = np.random.default_rng(seed)
    cfg = (cfg4 if variant == "4d" else cfg31)(c_out=4, stride=stride)
    blk = SPA4DBlock(cfg, rng) if variant == "4d" else SPA3p1DBlock(cfg, rng)
    randomize_biases(blk, rng)
    x = cloud(rng, n=8, grid=(4, 4, 4, 4))
    feats = Tensor(x.features.copy(), requires_grad=True)
    feats.name = "features"
    probe = rng.normal(size=blk(x).features.shape)

    def loss():
        return ops.sum(ops.mul(blk(x.with_features(feats)).feature_tensor(), probe))

    # feature tensor is perturbed in place just like a parameter
    feats.grad = np.zeros_like(feats.data)
    r = grad_check_params(loss, [feats] + blk.parameters(), tol=1e-5)
    assert r.passed, str(r)


def test_block_norm_option_runs():
    rng = np.random.default_rng(0)
    blk = SPA3p1DBlock(cfg31(norm=True), rng)
    y = blk(cloud(rng))
    assert np.isfinite(y.features).all()


# network


@pytest.fixture(scope="module")
def small_set():
    ds = synth_generate(SynthSpec(classes=3, samples_per_class=2, frames=8))
    cfg = SPANetConfig(3, 9, "4d", channels=(4, 8), strides=(2, 2), k=3, dilations=(1, 2), branches=2,
                       space_size=16, temporal_len=8)
    vox = [voxelize(s, cfg.voxel, ds.topology) for s in ds.sequences]
    return ds, cfg, vox


def test_net_probabilities(small_set):
    _, cfg, vox = small_set
    net = SPANet(cfg, np.random.default_rng(0))
    logits = net(vox[0])
    assert logits.shape == (3,)
    assert abs(ops.softmax(logits).data.sum() - 1.0) < 1e-12
    assert net(SparseTensor4D.cat(vox)).shape == (6, 3)


def test_net_batch_matches_single(small_set):
    _, cfg, vox = small_set
    net = SPANet(cfg, np.random.default_rng(0))
    batch = net(SparseTensor4D.cat(vox)).data
    for i, v in enumerate(vox):
        np.testing.assert_allclose(batch[i], net(v).data, atol=1e-12)


def test_net_storage_order_invariance(small_set):
    _, cfg, vox = small_set
    net = SPANet(cfg, np.random.default_rng(1))
    x = SparseTensor4D.cat(vox)
    perm = np.random.default_rng(2).permutation(x.num_points)
    shuffled = SparseTensor4D(x.R[perm], x.features[perm], x.batch[perm])
    assert net(shuffled).data.tobytes() == net(x).data.tobytes()


def test_net_translation_robustness(small_set):
    ds, cfg, _ = small_set
    net = SPANet(cfg, np.random.default_rng(3))
    seq = ds.sequences[1]
    moved = SkeletonSequence(seq.coords + np.array([2.0, -1.0, 0.5]), seq.label, seq.id)
    a = net(voxelize(seq, cfg.voxel)).data
    b = net(voxelize(moved, cfg.voxel)).data
    assert a.tobytes() == b.tobytes()


def test_net_errors(small_set):
    _, cfg, vox = small_set
    net = SPANet(cfg, np.random.default_rng(0))
    with pytest.raises(ValueError, match="empty voxelization"):
        net(SparseTensor4D(np.zeros((0, 4)), np.zeros((0, 9))))
    with pytest.raises(ValueError, match="channels"):
        net(SparseTensor4D(vox[0].R, vox[0].features[:, :3]))
    with pytest.raises(ValueError):
        SPANetConfig(1, 9)
    with pytest.raises(ValueError):
        SPANetConfig(3, 9, channels=(4, 8), strides=(2,))


def test_tiny_config():
    cfg = tiny_spa_config(3, 9, "3+1d")
    assert cfg.channels == (16, 32, 64) and cfg.strides == (2, 2, 2)
    assert (cfg.space_size, cfg.temporal_len) == (32, 16)
    assert SPANetConfig.from_json(cfg.to_json()) == cfg


def test_fc_head_and_loss_gradients(small_set):
    _, cfg, vox = small_set
    net = SPANet(cfg, np.random.default_rng(4))
    x = SparseTensor4D.cat(vox[:3])
    labels = np.array([0, 2, 1])

    def loss():
        return ops.scale(ops.mean(ops.pick(ops.log_softmax(net(x), -1), labels)), -1.0)

    r = grad_check_params(loss, net.fc.parameters() + net.blocks[-1].parameters(), tol=1e-5, max_coords=60)
    assert r.passed, str(r)


# activation dump


def test_activation_records_and_files(small_set, tmp_path):
    _, cfg, vox = small_set
    net = SPANet(cfg, np.random.default_rng(0))
    rows = dump_activations(net, vox[0], tmp_path / "act.csv", tmp_path / "timing.json")
    _, acts = net.forward_with_activations(vox[0])
    assert len(rows) == sum(a.num_points for a in acts)
    got = np.array([r[5] for r in rows])
    want = np.concatenate([np.linalg.norm(a.features, axis=1) for a in acts])
    np.testing.assert_allclose(got, want, rtol=1e-14)
    lines = (tmp_path / "act.csv").read_text().splitlines()
    assert lines[0] == "block,x,y,z,t,l2" and len(lines) == len(rows) + 1
    report = json.loads((tmp_path / "timing.json").read_text())
    assert [b["active_points"] for b in report["blocks"]] == [a.num_points for a in acts]


def test_activation_zero_feature_magnitude():
    st = SparseTensor4D([[0, 0, 0, 0], [1, 0, 0, 0]], [[0.0, 0.0], [3.0, 4.0]], coalesced=True)
    rows = activation_records([st])
    assert rows == [(0, 0, 0, 0, 0, 0.0), (0, 1, 0, 0, 0, 5.0)]


def test_voxel_pipeline_with_resample():
    ds = synth_generate(SynthSpec(classes=2, samples_per_class=1, frames=32))
    cfg = tiny_spa_config(2, 9)
    st = voxelize(resample_temporal(ds.sequences[0], cfg.temporal_len), cfg.voxel, ds.topology)
    assert st.R[:, 3].max() < 16 and st.R[:, :3].max() < 32
