"""``hiercl`` command line: gen, split, train, eval, compare, project.

Every command resolves a :class:`~hiercl.config.RunConfig` from an optional
``--config`` JSON file with explicit flags layered on top. Errors are printed
as one line ``error[<code>]: <message>`` on stderr with exit status 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from hiercl._utils import ensure_parent, write_csv, write_json
from hiercl.analysis import (
    curves_mrr_acc,
    project_subclasses,
    run_comparison,
    write_comparison_csv,
    write_curves_csv,
    write_projection_csv,
)
from hiercl.config import RunConfig
from hiercl.constants import VERSION
from hiercl.data import (
    check_split,
    generate_synthetic,
    load_jsonl,
    load_split,
    save_jsonl,
    save_split,
    split_by_patent,
)
from hiercl.encoder import check_input_dim, layer_summary, load_checkpoint, save_checkpoint
from hiercl.exceptions import HierCLError
from hiercl.models import Method, TrainingLog
from hiercl.retrieval import REPORT_COLUMNS, evaluate, report_rows
from hiercl.sampler import build_eval_split
from hiercl.trainer import train

logger = logging.getLogger("hiercl")

# dest -> path inside RunConfig
_FLAG_PATHS: dict[str, tuple[str, ...]] = {
    "seed": ("seed",),
    "data": ("data",),
    "split": ("split",),
    "checkpoint": ("checkpoint",),
    "out": ("out",),
    "ratios": ("ratios",),
    "ks": ("ks",),
    "seeds": ("seeds",),
    "with_text": ("with_text",),
    "queries_per_patent": ("queries_per_patent",),
    "main_classes": ("synthetic", "main_classes"),
    "subclasses_per_main": ("synthetic", "subclasses_per_main"),
    "patents_per_subclass": ("synthetic", "patents_per_subclass"),
    "images_per_patent": ("synthetic", "images_per_patent"),
    "d_in": ("synthetic", "d_in"),
    "spread_main": ("synthetic", "spread_main"),
    "spread_sub": ("synthetic", "spread_sub"),
    "spread_patent": ("synthetic", "spread_patent"),
    "spread_image": ("synthetic", "spread_image"),
    "loss": ("train", "loss_mode"),
    "use_text": ("train", "use_text"),
    "symmetric": ("train", "symmetric"),
    "lr": ("train", "lr"),
    "weight_decay": ("train", "weight_decay"),
    "tau": ("train", "tau"),
    "lambda_": ("train", "lambda"),
    "batch_size": ("train", "batch_size"),
    "epochs": ("train", "max_epochs"),
    "patience": ("train", "patience"),
    "embed_dim": ("train", "embed_dim"),
    "num_layers": ("train", "num_layers"),
    "hidden_dim": ("train", "hidden_dim"),
    "noise_prob": ("train", "noise_prob"),
    "noise_sigma": ("train", "noise_sigma"),
    "s_p": ("train", "scores", "s_p"),
    "s_s": ("train", "scores", "s_s"),
    "s_m": ("train", "scores", "s_m"),
}


def _number_list(kind: Callable[[str], Any]) -> Callable[[str], list[Any]]:
    def parse(text: str) -> list[Any]:
        try:
            return [kind(part) for part in text.split(",") if part.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got '{text}'")

    return parse


def collect_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Nested RunConfig overrides for every flag given explicitly on the command line."""
    overrides: dict[str, Any] = {}
    for dest, path in _FLAG_PATHS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        node = overrides
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
    return overrides


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_gen(cfg: RunConfig, args: argparse.Namespace) -> int:
    ds = generate_synthetic(cfg.synthetic_spec())
    out = cfg.require("out")
    save_jsonl(ds, out)
    print(
        f"records={len(ds)} patents={len(ds.patent_ids())} "
        f"subclasses={len(ds.subclasses())} main_classes={len(ds.main_classes())} -> {out}"
    )
    return 0


def cmd_split(cfg: RunConfig, args: argparse.Namespace) -> int:
    ds = load_jsonl(cfg.require("data"))
    split = split_by_patent(ds, cfg.ratios, cfg.seed)
    out = cfg.require("out")
    save_split(split, out)
    print(f"train={len(split.train)} val={len(split.val)} test={len(split.test)} -> {out}")
    return 0


def write_training_log(log: TrainingLog, path: str) -> None:
    """One JSON object per epoch: epoch, mean_loss, val_map, best."""
    p = ensure_parent(path)
    lines = [json.dumps(entry.model_dump(), sort_keys=False) for entry in log.epochs]
    p.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _training_log_path(cfg: RunConfig, args: argparse.Namespace) -> str:
    if args.log:
        return str(args.log)
    out = Path(cfg.require("out"))
    return str(out.with_name(out.stem + ".log.jsonl"))


def cmd_train(cfg: RunConfig, args: argparse.Namespace) -> int:
    ds = load_jsonl(cfg.require("data"))
    split = load_split(cfg.require("split"))
    train_cfg = cfg.train_config()
    result = train(ds, split, train_cfg)
    out = cfg.require("out")
    save_checkpoint(result.params, train_cfg, out)
    log_path = _training_log_path(cfg, args)
    write_training_log(result.log, log_path)
    print(
        f"encoder {layer_summary(result.params)}: best epoch {result.log.best_epoch}, "
        f"val mAP {result.log.best_val_map} -> {out} (log {log_path})"
    )
    return 0


def cmd_eval(cfg: RunConfig, args: argparse.Namespace) -> int:
    ds = load_jsonl(cfg.require("data"))
    split = load_split(cfg.require("split"))
    check_split(ds, split)
    params, ckpt_cfg = load_checkpoint(cfg.require("checkpoint"))
    check_input_dim(params, ds.d_in)
    patents = split.val if args.target == "val" else split.test
    qpp = cfg.queries_per_patent or ckpt_cfg.queries_per_patent
    eval_split = build_eval_split(ds, patents, qpp, np.random.default_rng(ckpt_cfg.seed))
    report = evaluate(params, eval_split, ckpt_cfg.scores, cfg.ks)
    out = cfg.require("out")
    write_json(report, out)
    csv_path = args.csv or str(Path(out).with_suffix(".csv"))
    write_csv(report_rows(report), REPORT_COLUMNS, csv_path)
    if args.curves:
        write_curves_csv(curves_mrr_acc(report, args.method), args.curves)
    for row in report_rows(report):
        if row["metric"] == "mAP":
            print(f"{row['level']}: mAP={row['value']!r} ({row['query_count']} queries)")
    return 0


def cmd_compare(cfg: RunConfig, args: argparse.Namespace) -> int:
    ds = load_jsonl(cfg.require("data"))
    split = load_split(cfg.require("split"))
    rows = run_comparison(ds, split, cfg.train_config(), cfg.seeds, cfg.with_text, cfg.ks)
    out = cfg.require("out")
    write_comparison_csv(rows, out)
    print(f"{len(rows)} rows over {len(cfg.seeds)} seeds -> {out}")
    return 0


def cmd_project(cfg: RunConfig, args: argparse.Namespace) -> int:
    ds = load_jsonl(cfg.require("data"))
    params, _ = load_checkpoint(cfg.require("checkpoint"))
    check_input_dim(params, ds.d_in)
    rows = project_subclasses(params, ds, args.subclasses)
    out = cfg.require("out")
    write_projection_csv(rows, out)
    print(f"{len(rows)} points from {len(set(args.subclasses))} subclasses -> {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; explicit flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    return common


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--loss", choices=["cl", "hmcl"])
    g.add_argument("--use-text", action="store_true", default=None)
    g.add_argument("--symmetric", action="store_true", default=None)
    g.add_argument("--lr", type=float)
    g.add_argument("--weight-decay", type=float)
    g.add_argument("--tau", type=float)
    g.add_argument("--lambda", dest="lambda_", type=float)
    g.add_argument("--s-p", type=float)
    g.add_argument("--s-s", type=float)
    g.add_argument("--s-m", type=float)
    g.add_argument("--batch-size", type=int, help="patents per batch (K)")
    g.add_argument("--epochs", type=int)
    g.add_argument("--patience", type=int)
    g.add_argument("--embed-dim", type=int)
    g.add_argument("--num-layers", type=int, choices=[1, 2])
    g.add_argument("--hidden-dim", type=int)
    g.add_argument("--noise-prob", type=float)
    g.add_argument("--noise-sigma", type=float)
    g.add_argument("--queries-per-patent", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiercl",
        description="Hierarchical multi-positive contrastive learning for design retrieval.",
    )
    parser.add_argument("--version", action="version", version=f"hiercl {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    ints = _number_list(int)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--out")
    p.add_argument("--main-classes", type=int)
    p.add_argument("--subclasses-per-main", type=int)
    p.add_argument("--patents-per-subclass", type=int)
    p.add_argument("--images-per-patent", type=int)
    p.add_argument("--d-in", type=int)
    p.add_argument("--spread-main", type=float)
    p.add_argument("--spread-sub", type=float)
    p.add_argument("--spread-patent", type=float)
    p.add_argument("--spread-image", type=float)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("split", parents=[common], help="split patents into train/val/test")
    p.add_argument("--data")
    p.add_argument("--ratios", type=_number_list(float), help="e.g. 0.7225,0.1275,0.15")
    p.add_argument("--out")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", parents=[common], help="train an encoder")
    p.add_argument("--data")
    p.add_argument("--split")
    p.add_argument("--out", help="checkpoint path")
    p.add_argument("--log", help="training log path (default: <out stem>.log.jsonl)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--data")
    p.add_argument("--split")
    p.add_argument("--checkpoint")
    p.add_argument("--ks", type=ints, help="e.g. 1,5,10,20")
    p.add_argument("--target", choices=["test", "val"], default="test")
    p.add_argument("--queries-per-patent", type=int)
    p.add_argument("--out", help="metrics JSON path")
    p.add_argument("--csv", help="metrics CSV path (default: <out>.csv)")
    p.add_argument("--curves", help="also write MRR@K/Acc@K rows to this CSV")
    p.add_argument("--method", default=Method.HMCL.value, help="method label for --curves")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", parents=[common], help="Baseline vs CL vs HMCL over seeds")
    p.add_argument("--data")
    p.add_argument("--split")
    p.add_argument("--seeds", type=ints, help="e.g. 1,2,3,4,5")
    p.add_argument("--ks", type=ints)
    p.add_argument("--with-text", action="store_true", default=None)
    p.add_argument("--out")
    _add_train_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("project", parents=[common], help="PCA projection of subclasses")
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--subclasses", type=ints, required=True, help="e.g. 1402,1403")
    p.add_argument("--out")
    p.set_defaults(func=cmd_project)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = RunConfig.from_file(args.config, collect_overrides(args))
        code: int = args.func(cfg, args)
        return code
    except HierCLError as exc:
        print(f"error[{exc.code}]: {exc.message}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[io_error]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
