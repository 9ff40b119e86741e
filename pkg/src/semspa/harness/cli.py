"""Command-line entry point: ``semspa <subcommand> ...``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..autodiff import NumericalError
from ..data import DataError, SynthSpec, load_canonical, save_canonical, synth_generate
from ..sem import attention_matrix, estimate_flops, write_attention_csv
from ..spa import dump_activations
from .config import ConfigError, load_config
from .fusion import fuse_score_maps
from .metrics import compute_metrics
from .pipeline import prepare
from .train import evaluate, load_model, train, training_dataset, write_eval
from .gradsuite import run_suite

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _cmd_synth(a) -> int:
    ds = synth_generate(SynthSpec(a.classes, a.samples, a.noise, a.seed, a.frames))
    save_canonical(ds, a.out)
    print(f"wrote {len(ds)} samples ({ds.num_classes} classes) to {a.out}")
    return EXIT_OK


def _cmd_train(a) -> int:
    cfg = load_config(a.config)
    if a.output_dir:
        cfg.output_dir = a.output_dir
    res = train(cfg, log=print if a.verbose else None)
    print(f"trained {res.epochs_run} epochs; train accuracy {res.metrics.accuracy:.4f}; checkpoint {res.checkpoint}")
    return EXIT_OK


def _dataset_arg(a):
    return load_canonical(a.data) if a.data else None


def _cmd_eval(a) -> int:
    metrics, scores, labels = evaluate(a.checkpoint, _dataset_arg(a))
    out = Path(a.out) if a.out else Path(a.checkpoint).parent / "eval"
    write_eval(out, metrics, scores, labels)
    print(json.dumps({"accuracy": metrics.accuracy, "per_class": metrics.per_class}))
    return EXIT_OK


def _cmd_fuse(a) -> int:
    maps = [json.loads(Path(p).read_text()) for p in a.scores]
    fused = fuse_score_maps(maps)
    labels_path = Path(a.labels) if a.labels else Path(a.scores[0]).parent / "labels.json"
    if not labels_path.exists():
        raise DataError(f"fuse: labels file {labels_path} not found (pass --labels)")
    labels = json.loads(labels_path.read_text())
    ids = list(fused)
    missing = [i for i in ids if i not in labels]
    if missing:
        raise DataError(f"fuse: no label for sample(s) {missing[:5]}")
    probs = np.array([fused[i] for i in ids])
    y = np.array([labels[i] for i in ids])
    metrics = compute_metrics(probs.argmax(axis=1), y, probs.shape[1])
    if a.out:
        write_eval(a.out, metrics, fused, {i: labels[i] for i in ids})
    print(json.dumps({"accuracy": metrics.accuracy, "per_class": metrics.per_class}))
    return EXIT_OK


def _cmd_flops(a) -> int:
    c_in = a.Cin if a.Cin is not None else a.Ce
    print(f"{'variant':14s} {'MACs':>16s}  (N={a.N}, T={a.T}, C_in={c_in}, C_e={a.Ce}, L={a.L}, heads={a.heads})")
    for v in ("unified", "single_frame", "cross_frame"):
        print(f"{v:14s} {estimate_flops(v, a.N, a.T, c_in, a.Ce, a.L, a.heads):16d}")
    return EXIT_OK


def _cmd_gradcheck(a) -> int:
    results = run_suite(tuple(range(a.seeds)), a.tol, log=print)
    bad = [r for r in results if not r.passed]
    print(f"{len(results) - len(bad)}/{len(results)} checks passed")
    return EXIT_OK if not bad else EXIT_NUMERIC


def _pick_sample(ds, a):
    if a.sample_id is not None:
        for i, s in enumerate(ds.sequences):
            if s.id == a.sample_id:
                return i
        raise DataError(f"no sample with id {a.sample_id!r}")
    if not 0 <= a.sample < len(ds):
        raise DataError(f"sample index {a.sample} out of range [0, {len(ds)})")
    return a.sample


def _export_inputs(a):
    model, meta, mcfg = load_model(a.checkpoint)
    ds = training_dataset(meta) if not a.data else load_canonical(a.data)
    i = _pick_sample(ds, a)
    data = prepare(ds, meta["model_kind"], mcfg, meta["frames"])
    return model, meta, data, i


def _cmd_export_attn(a) -> int:
    model, meta, data, i = _export_inputs(a)
    if meta["model_kind"] != "sem":
        raise ConfigError("export-attn needs a SEM checkpoint")
    w = attention_matrix(model, data.inputs[i], a.block, a.head)
    out = Path(a.out)
    rows = write_attention_csv(out, w, a.top_k)
    np.savetxt(out.with_suffix(".matrix.csv"), w, delimiter=",", fmt="%.17g")
    print(f"wrote {len(rows)} pairs to {out} and the {w.shape[0]}x{w.shape[1]} matrix beside it")
    return EXIT_OK


def _cmd_export_act(a) -> int:
    model, meta, data, i = _export_inputs(a)
    if meta["model_kind"] != "spa":
        raise ConfigError("export-act needs a SPA checkpoint")
    blocks = [int(b) for b in a.blocks.split(",")] if a.blocks else None
    if blocks is not None and any(not 0 <= b < len(model.blocks) for b in blocks):
        raise ConfigError(f"--blocks must lie in [0, {len(model.blocks)})")
    out = Path(a.out)
    rows = dump_activations(model, data.inputs[i], out, out.with_suffix(".timing.json"), blocks)
    print(f"wrote {len(rows)} activation records to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="semspa", description="Skeleton action recognition from semantic and spatial perspectives.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic dataset in canonical format")
    s.add_argument("--classes", type=int, default=3)
    s.add_argument("--samples", type=int, default=20, help="samples per class")
    s.add_argument("--noise", type=float, default=0.02)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--frames", type=int, default=32)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_synth)

    s = sub.add_parser("train", help="run an experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--output-dir")
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(fn=_cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint (default split: its training data)")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", help="canonical dataset directory")
    s.add_argument("--out", help="output directory (default: <checkpoint dir>/eval)")
    s.set_defaults(fn=_cmd_eval)

    s = sub.add_parser("fuse", help="average softmax score files")
    s.add_argument("scores", nargs="+")
    s.add_argument("--labels", help="labels.json (default: beside the first score file)")
    s.add_argument("--out")
    s.set_defaults(fn=_cmd_fuse)

    s = sub.add_parser("flops", help="attention MAC estimates")
    s.add_argument("--N", type=int, default=25)
    s.add_argument("--T", type=int, default=64)
    s.add_argument("--Ce", type=int, default=16)
    s.add_argument("--Cin", type=int)
    s.add_argument("--L", type=int, default=1)
    s.add_argument("--heads", type=int, default=1)
    s.set_defaults(fn=_cmd_flops)

    s = sub.add_parser("gradcheck", help="finite-difference checks of every layer")
    s.add_argument("--seeds", type=int, default=3)
    s.add_argument("--tol", type=float, default=1e-5)
    s.set_defaults(fn=_cmd_gradcheck)

    for name, fn in (("export-attn", _cmd_export_attn), ("export-act", _cmd_export_act)):
        s = sub.add_parser(name)
        s.add_argument("--checkpoint", required=True)
        s.add_argument("--data")
        s.add_argument("--sample", type=int, default=0)
        s.add_argument("--sample-id")
        s.add_argument("--out", required=True)
        if name == "export-attn":
            s.add_argument("--block", type=int, default=0)
            s.add_argument("--head", type=int, default=0)
            s.add_argument("--top-k", type=int, default=50)
        else:
            s.add_argument("--blocks", help="comma-separated block indices (default: all)")
        s.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
