import json
import math

import numpy as np
import pytest

from semspa.autodiff import load_checkpoint
from semspa.harness import (
    ConfigError,
    ExperimentConfig,
    Metrics,
    TrainingDiverged,
    compute_metrics,
    cross_entropy,
    evaluate,
    fuse_score_maps,
    fuse_scores,
    load_config,
    train,
)
from semspa.harness.cli import main
from semspa.harness.gradsuite import CHECKS, run_suite

SMALL_SEM = {"channels": [8], "strides": [1], "heads": 1, "c_e": 4, "branches": 2, "dilations": [1, 2]}


def small_cfg(tmp_path, **over):
    d = {
        "seed": 7,
        "data": {"synth": {"classes": 2, "samples_per_class": 3, "frames": 6}},
        "model": {"sem": SMALL_SEM},
        "frames": 6,
        "optimizer": {"lr": 0.01, "epochs": 2, "batch_size": 4},
        "output_dir": str(tmp_path / "run"),
    }
    d.update(over)
    return ExperimentConfig.from_json(d)


# loss


def test_cross_entropy_examples():
    assert abs(cross_entropy(np.zeros(4), 2).item() - math.log(4)) < 1e-15
    assert cross_entropy(np.array([100.0, 0.0, 0.0]), 0).item() < 1e-6
    with pytest.raises(ValueError, match="out of range"):
        cross_entropy(np.zeros(3), 3)


@pytest.mark.parametrize("seed", range(5))
def test_cross_entropy_matches_direct_evaluation(seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(6, 5)) * 3
    y = rng.integers(0, 5, size=6)
    # log-sum-exp in extended precision as an independent reference
    zl = z.astype(np.longdouble)
    ref = np.mean(np.log(np.exp(zl).sum(axis=1)) - zl[np.arange(6), y])
    assert abs(cross_entropy(z, y).item() - float(ref)) < 1e-12


# fusion


def test_fuse_examples():
    np.testing.assert_allclose(fuse_scores([[0.2, 0.8], [0.4, 0.6]]), [0.3, 0.7], atol=1e-15)
    p = np.array([0.1, 0.7, 0.2])
    assert fuse_scores([p, p]).tobytes() == p.tobytes()
    with pytest.raises(ValueError, match="length"):
        fuse_scores([[0.5, 0.5], [0.2, 0.3, 0.5]])
    with pytest.raises(ValueError, match="probability"):
        fuse_scores([[0.5, 0.6], [0.5, 0.5]])


@pytest.mark.parametrize("seed", range(10))
def test_fuse_symmetric_and_argmax_matches_sum(seed):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
    assert fuse_scores([p, q]).tobytes() == fuse_scores([q, p]).tobytes()
    fused = fuse_scores([p, q])
    assert np.argmax(fused) == np.argmax(p + q)
    assert abs(fused.sum() - 1) < 1e-12


def test_fuse_maps_requires_matching_ids():
    a = {"x": [0.5, 0.5]}
    with pytest.raises(ValueError):
        fuse_score_maps([a, {"y": [0.5, 0.5]}])
    assert fuse_score_maps([a, a]) == a


# metrics


def test_metrics_identities():
    m = compute_metrics(np.array([0, 1, 2, 1]), np.array([0, 1, 2, 1]), 3)
    assert m.accuracy == 1.0
    assert np.array_equal(np.array(m.confusion), np.diag([1, 2, 1]))
    wrong = compute_metrics(np.array([1, 1]), np.array([0, 0]), 2)
    assert wrong.accuracy == 0.0 and wrong.per_class == [0.0, None]
    rng = np.random.default_rng(0)
    y, p = rng.integers(0, 4, 50), rng.integers(0, 4, 50)
    m = compute_metrics(p, y, 4)
    conf = np.array(m.confusion)
    np.testing.assert_array_equal(conf.sum(axis=1), np.bincount(y, minlength=4))
    support = np.bincount(y, minlength=4)
    weighted = sum(a * s for a, s in zip(m.per_class, support) if a is not None) / support.sum()
    assert abs(weighted - m.accuracy) < 1e-15


def test_metrics_roundtrip(tmp_path):
    m = compute_metrics(np.array([0, 1, 1]), np.array([0, 1, 0]), 3)
    m.loss_history = [1.2345678901234567, 0.1]
    m.save(tmp_path / "m.json")
    back = Metrics.load(tmp_path / "m.json")
    assert back == m


# config


def test_config_validation(tmp_path):
    base = {"data": {"synth": {}}, "model": {"sem": {}}}
    with pytest.raises(ConfigError, match="seed"):
        ExperimentConfig.from_json(base)
    with pytest.raises(ConfigError, match="exactly one"):
        ExperimentConfig.from_json({**base, "seed": 0, "model": {"sem": {}, "spa": {}}})
    with pytest.raises(ConfigError, match="data"):
        ExperimentConfig.from_json({**base, "seed": 0, "data": {}})
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_json({**base, "seed": 0, "extra": 1})
    with pytest.raises(ConfigError, match="bone"):
        ExperimentConfig.from_json({**base, "seed": 0, "model": {"spa": {}}, "stream": "bone"})
    p = tmp_path / "c.json"
    p.write_text(json.dumps({**base, "seed": 3, "output_dir": "out"}))
    cfg = load_config(p)
    assert cfg.output_dir == str((tmp_path / "out").resolve())


@pytest.mark.parametrize("name", ["overfit_sem", "overfit_sem_bone", "overfit_spa4d", "overfit_spa3p1d"])
def test_committed_configs_parse(name):
    from pathlib import Path

    cfg = load_config(Path(__file__).parent.parent / "configs" / f"{name}.json")
    assert cfg.optimizer.epochs == 300


# training


def test_zero_lr_leaves_parameters(tmp_path):
    cfg = small_cfg(tmp_path)
    cfg.optimizer.lr = 0.0
    cfg.optimizer.epochs = 0
    init = load_checkpoint(train(cfg).checkpoint)[0]
    cfg.optimizer.epochs = 3
    after = load_checkpoint(train(cfg).checkpoint)[0]
    for k in init:
        assert init[k].tobytes() == after[k].tobytes()


def test_train_is_deterministic_and_eval_repeatable(tmp_path):
    a = train(small_cfg(tmp_path / "a"))
    b = train(small_cfg(tmp_path / "b"))
    assert a.checkpoint.read_bytes() == b.checkpoint.read_bytes()
    m1, s1, _ = evaluate(a.checkpoint)
    m2, s2, _ = evaluate(a.checkpoint)
    assert json.dumps(s1) == json.dumps(s2) and m1 == m2
    assert len(a.metrics.loss_history) == 2


def test_different_seed_changes_init(tmp_path):
    a = train(small_cfg(tmp_path / "a"))
    c = small_cfg(tmp_path / "c")
    c.seed = 8
    assert train(c).checkpoint.read_bytes() != a.checkpoint.read_bytes()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_aborts_with_last_good(tmp_path):
    cfg = small_cfg(tmp_path)
    cfg.optimizer.lr = 1e12
    cfg.optimizer.epochs = 50
    with pytest.raises(TrainingDiverged, match="last good"):
        train(cfg)
    assert (tmp_path / "run" / "last_good.ckpt").exists()


def test_evaluate_class_mismatch(tmp_path):
    from semspa.data import SynthSpec, synth_generate

    res = train(small_cfg(tmp_path))
    with pytest.raises(ValueError, match="classes"):
        evaluate(res.checkpoint, synth_generate(SynthSpec(classes=3, samples_per_class=1, frames=6)))


# gradient suite


def test_gradsuite_covers_every_layer():
    expected = {
        "attention_unified", "attention_single_frame", "attention_cross_frame", "gr_cfsa", "ms_tff",
        "sem_block", "sparse_conv", "sparse_max_pool", "spa_4d_block", "spa_3p1d_block", "fc_head", "cross_entropy",
    }
    assert set(CHECKS) == expected
    res = run_suite(seeds=(5,), names=["gr_cfsa", "cross_entropy"])
    assert all(r.passed for r in res)


# cli


def test_cli_usage_errors(capsys):
    assert main(["flops", "--bogus"]) == 1
    assert main([]) == 1
    assert main(["nope"]) == 1


def test_cli_flops_ordering(capsys):
    assert main(["flops", "--N", "25", "--T", "64", "--Ce", "16"]) == 0
    rows = [line.split() for line in capsys.readouterr().out.splitlines()[1:]]
    assert [r[0] for r in rows] == ["unified", "single_frame", "cross_frame"]
    u, s, c = (int(r[1]) for r in rows)
    assert u > s >= c


def test_cli_end_to_end(tmp_path, capsys):
    cfg = {
        "seed": 1,
        "data": {"path": "data"},
        "model": {"sem": SMALL_SEM},
        "frames": 6,
        "optimizer": {"lr": 0.01, "epochs": 1, "batch_size": 4},
        "output_dir": "run",
    }
    assert main(["synth", "--classes", "2", "--samples", "2", "--frames", "6", "--out", str(tmp_path / "data")]) == 0
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(tmp_path / "c.json")]) == 0
    ckpt = tmp_path / "run" / "checkpoint.ckpt"
    assert main(["eval", "--checkpoint", str(ckpt), "--out", str(tmp_path / "ev")]) == 0
    scores = tmp_path / "ev" / "scores.json"
    assert main(["fuse", str(scores), str(scores), "--out", str(tmp_path / "fused")]) == 0
    a = json.loads((tmp_path / "ev" / "metrics.json").read_text())
    f = json.loads((tmp_path / "fused" / "metrics.json").read_text())
    assert a["accuracy"] == f["accuracy"] and a["confusion"] == f["confusion"]
    assert json.loads((tmp_path / "fused" / "scores.json").read_text()) == json.loads(scores.read_text())
    assert main(["export-attn", "--checkpoint", str(ckpt), "--out", str(tmp_path / "attn.csv"), "--top-k", "5"]) == 0
    assert len((tmp_path / "attn.csv").read_text().splitlines()) == 6
    assert main(["export-act", "--checkpoint", str(ckpt), "--out", str(tmp_path / "act.csv")]) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cli_exit_codes(tmp_path, capsys):
    assert main(["eval", "--checkpoint", str(tmp_path / "missing.ckpt")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"data": {"synth": {}}, "model": {"sem": {}}}))
    assert main(["train", "--config", str(bad)]) == 1
    div = tmp_path / "div.json"
    div.write_text(json.dumps({
        "seed": 0,
        "data": {"synth": {"classes": 2, "samples_per_class": 2, "frames": 6}},
        "model": {"sem": SMALL_SEM},
        "frames": 6,
        "optimizer": {"lr": 1e12, "epochs": 50, "batch_size": 4},
        "output_dir": "out",
    }))
    assert main(["train", "--config", str(div)]) == 3
