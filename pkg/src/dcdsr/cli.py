"""Command-line entry point.

Subcommands: ``split``, ``train``, ``eval``, ``denoise-report``,
``inject-noise`` and ``sweep``. Configuration precedence, lowest first:
built-in defaults, the ``--config`` key = value file, explicit flags.

Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import itertools
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .config import TrainConfig, coerce, from_kv
from .data import (DatasetSplit, inject_interaction_noise, load_edge_lists, load_split, read_kv,
                   save_split, split_train_test)
from .denoise import denoise_interaction, denoise_social, merge_reports, social_enhance
from .encoder import load_embeddings, propagate_interaction
from .errors import ConfigError, DataError, DenoiseCollapseError, NumericalError
from .evaluate import evaluate_all_ranking, real_plus_n
from .graph import InteractionGraph, SocialNetwork
from .trainer import Trainer, save_checkpoint

log = logging.getLogger("dcdsr")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

# flag name -> config field
CONFIG_FLAGS = {
    "seed": "seed", "beta_s": "beta_s", "beta_r": "beta_r", "sigma": "sigma",
    "lambda1": "lambda1", "lambda2": "lambda2", "lambda3": "lambda3", "lambda_reg": "lambda_reg",
    "tau": "tau", "epsilon": "epsilon", "layers": "layers", "dim": "dim", "batch": "batch_size",
    "lr": "lr", "epochs": "max_epochs", "patience": "patience", "ablation": "ablation",
    "perturb": "perturb_mode", "cl_loss": "cl_loss", "val_fraction": "val_fraction",
}

PROTOCOLS = {"all-ranking": "all_ranking", "real-plus-n": "real_plus_n"}


class UsageError(ConfigError):
    pass


# argument wiring

def _add_data(p):
    g = p.add_argument_group("data")
    g.add_argument("--interactions", help="user item edge list")
    g.add_argument("--social", help="user user edge list")
    g.add_argument("--split", help="directory written by `dcdsr split` (instead of raw edge lists)")
    g.add_argument("--ratio", type=float, default=0.8, help="train share of each user's interactions")
    g.add_argument("--split-seed", type=int, default=0)


def _add_config(p):
    g = p.add_argument_group("model and training")
    g.add_argument("--config", help="key = value file; explicit flags override it")
    g.add_argument("--seed", type=int)
    for name in ("beta-s", "beta-r", "sigma", "lambda1", "lambda2", "lambda3", "lambda-reg",
                 "tau", "epsilon", "lr", "val-fraction"):
        g.add_argument(f"--{name}", type=float)
    for name in ("layers", "dim", "batch", "epochs", "patience"):
        g.add_argument(f"--{name}", type=int)
    g.add_argument("--ablation", type=str.lower,
                   help="full, rd, sd, ed, or a '+' joined combination such as sd+ed")
    g.add_argument("--perturb", choices=("cp", "rp"))
    g.add_argument("--cl-loss", choices=("ac", "infonce"))
    g.add_argument("--no-validate", action="store_true",
                   help="train a fixed number of epochs without the validation holdout")
    g.add_argument("--noise-ratio", type=float, default=0.0,
                   help="fabricated share of training interactions to inject before training")
    g.add_argument("--timing", action="store_true", help="record wall-clock seconds in train.log")


def _add_eval(p):
    p.add_argument("--protocol", choices=tuple(PROTOCOLS), default="all-ranking")
    p.add_argument("--k", action="append", help="cutoff(s), comma separated or repeated")
    p.add_argument("--n", type=int, default=100, help="sampled negatives per user for real-plus-n")
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="one JSON record per (protocol, K, metric)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcdsr", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="split raw edge lists into train/test")
    _add_data(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train and write a checkpoint directory")
    _add_data(p)
    _add_config(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score a checkpoint on its test split")
    p.add_argument("--checkpoint", required=True, help="directory written by `dcdsr train`")
    p.add_argument("--out", help="also write the report under this directory")
    _add_eval(p)

    p = sub.add_parser("denoise-report", help="rerun one denoising pass from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="write denoise_report.txt and histogram.csv here")
    for name in ("beta-s", "beta-r", "sigma"):
        p.add_argument(f"--{name}", type=float, help="override the checkpoint's threshold")

    p = sub.add_parser("inject-noise", help="add fabricated training interactions to a split")
    p.add_argument("--split", required=True)
    p.add_argument("--noise-ratio", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="grid search, one training run per cell")
    _add_data(p)
    _add_config(p)
    p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2,...",
                   help="config key and its values; repeat for more axes")
    p.add_argument("--out", required=True)
    _add_eval(p)
    return parser


# helpers

def resolve_config(args) -> TrainConfig:
    values = read_kv(args.config) if getattr(args, "config", None) else {}
    for flag, key in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = value
    if getattr(args, "no_validate", False):
        values["validate"] = False
    return from_kv(values)


def load_data(args) -> DatasetSplit:
    if args.split:
        if args.interactions or args.social:
            raise UsageError("give either --split or --interactions/--social, not both")
        return load_split(args.split)
    if not (args.interactions and args.social):
        raise UsageError("need --split, or both --interactions and --social")
    return split_train_test(load_edge_lists(args.interactions, args.social), args.ratio, args.split_seed)


def parse_ks(raw, default) -> tuple[int, ...]:
    if not raw:
        return default
    try:
        ks = sorted({int(tok) for chunk in raw for tok in chunk.split(",") if tok.strip()})
    except ValueError:
        raise ConfigError(f"--k expects integers, got {raw}") from None
    if not ks or ks[0] < 1:
        raise ConfigError("--k values must be positive")
    return tuple(ks)


@contextmanager
def run_lock(directory: Path):
    """Hold ``directory/.lock`` for the duration of a run."""
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DataError(f"{directory} is in use by another run (remove {lock} if it is stale)") from None
    os.write(fd, f"{os.getpid()}\n".encode())
    os.close(fd)
    try:
        yield
    finally:
        lock.unlink(missing_ok=True)


def write_manifest(directory: Path, config: TrainConfig, args, extra: dict | None = None) -> Path:
    path = directory / "manifest.txt"
    with open(path, "w") as fh:
        fh.write(f"config_hash = {config.config_hash()}\n")
        fh.write(f"out = {directory}\n")
        for key in ("interactions", "social", "split"):
            value = getattr(args, key, None)
            if value is not None:
                fh.write(f"{key} = {Path(value).resolve()}\n")
        for key, value in (extra or {}).items():
            fh.write(f"{key} = {value}\n")
        fh.write(config.to_kv())
    return path


def _train_into(directory: Path, split: DatasetSplit, config: TrainConfig, args, extra=None):
    write_manifest(directory, config, args, extra)
    save_split(split, directory / "split")
    trainer = Trainer(split, config)
    result = trainer.train()
    save_checkpoint(result, directory, config, timing=args.timing)
    return trainer, result


def _report(user_emb, item_emb, split: DatasetSplit, protocol: str, ks, n: int, seed: int):
    if protocol == "real_plus_n":
        return real_plus_n(user_emb, item_emb, split.train, split.test, n=n, ks=ks, seed=seed)
    return evaluate_all_ranking(user_emb, item_emb, split.train, split.test, ks=ks)


def load_checkpoint(directory):
    directory = Path(directory)
    if not (directory / "embeddings.bin").exists():
        raise DataError(f"{directory}: no checkpoint (embeddings.bin missing)")
    split = load_split(directory / "split")
    manifest = read_kv(directory / "manifest.txt")
    fields = set(TrainConfig.__dataclass_fields__)
    config = from_kv({k: v for k, v in manifest.items() if k in fields})
    state = load_embeddings(directory / "embeddings.bin")
    if state.user.shape[0] != split.n_users or state.item.shape[0] != split.n_items:
        raise DataError(f"{directory}: embedding shape does not match the stored split")
    denoised = InteractionGraph(np.loadtxt(directory / "denoised_interactions.txt", dtype=np.int64,
                                           ndmin=2).reshape(-1, 2), split.n_users, split.n_items)
    return split, config, state, denoised


# subcommands

def cmd_split(args) -> int:
    out = Path(args.out)
    with run_lock(out):
        split = load_data(args)
        save_split(split, out)
    print(f"users={split.n_users} items={split.n_items} train={len(split.train)} "
          f"test={len(split.test)} social={len(split.social)}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = resolve_config(args)
    out = Path(args.out)
    with run_lock(out):
        split = load_data(args)
        if args.noise_ratio:
            split = inject_interaction_noise(split, args.noise_ratio, config.seed)
        _, result = _train_into(out, split, config, args, {"noise_ratio": args.noise_ratio})
    print(f"best_epoch={result.best_epoch} val_recall@20={result.best_metric:.6f} out={out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    split, config, state, denoised = load_checkpoint(args.checkpoint)
    prop = propagate_interaction(state, denoised, config.layers)
    protocol = PROTOCOLS[args.protocol]
    ks = parse_ks(args.k, (10, 20) if protocol == "all_ranking" else (3,))
    report = _report(prop.users, prop.items, split, protocol, ks, args.n, args.eval_seed)
    text = report.to_json_lines() if args.json else report.to_tsv()
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / ("metrics.jsonl" if args.json else "metrics.tsv")).write_text(text)
    return EXIT_OK


def cmd_denoise_report(args) -> int:
    split, config, state, denoised = load_checkpoint(args.checkpoint)
    changes = {k: getattr(args, k) for k in ("beta_s", "beta_r", "sigma") if getattr(args, k) is not None}
    thresholds = config.updated(**changes).check().thresholds
    pref = propagate_interaction(state, denoised, config.layers)
    social, _, s_report = denoise_social(SocialNetwork(split.social, split.n_users), pref.users, thresholds)
    _, _, r_report = denoise_interaction(InteractionGraph(split.train, split.n_users, split.n_items),
                                         social_enhance(pref.users, social), pref.items, thresholds,
                                         split.noise_flags)
    report = merge_reports(s_report, r_report)
    sys.stdout.write(report.to_text())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "denoise_report.txt").write_text(report.to_text())
        (out / "histogram.csv").write_text(report.histogram_csv())
    return EXIT_OK


def cmd_inject_noise(args) -> int:
    split = inject_interaction_noise(load_split(args.split), args.noise_ratio, args.seed)
    out = Path(args.out)
    with run_lock(out):
        save_split(split, out)
    print(f"train={len(split.train)} flagged={split.n_noisy} out={out}")
    return EXIT_OK


def parse_grid(items) -> dict:
    grid = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--grid expects KEY=V1,V2,..., got {item!r}")
        key, values = item.split("=", 1)
        key = CONFIG_FLAGS.get(key.strip().replace("-", "_"), key.strip().replace("-", "_"))
        values = [v.strip() for v in values.split(",") if v.strip()]
        if not values:
            raise ConfigError(f"--grid {key} has no values")
        coerce({key: values[0]})
        grid[key] = values
    if not grid:
        raise ConfigError("empty sweep grid; give at least one --grid KEY=V1,V2")
    return grid


def cmd_sweep(args) -> int:
    grid = parse_grid(args.grid)
    base = resolve_config(args)
    cells = [dict(zip(grid, combo)) for combo in itertools.product(*grid.values())]
    configs = [from_kv(cell, base) for cell in cells]
    protocol = PROTOCOLS[args.protocol]
    ks = parse_ks(args.k, (10, 20) if protocol == "all_ranking" else (3,))
    out = Path(args.out)
    with run_lock(out):
        split = load_data(args)
        if args.noise_ratio:
            split = inject_interaction_noise(split, args.noise_ratio, base.seed)
        header = ["cell", *grid] + [f"{m}@{k}" for k in ks for m in ("recall", "ndcg")]
        rows = ["\t".join(header)]
        for idx, (cell, config) in enumerate(zip(cells, configs)):
            directory = out / f"cell_{idx:03d}"
            directory.mkdir(parents=True, exist_ok=True)
            trainer, result = _train_into(directory, split, config, args,
                                          {"noise_ratio": args.noise_ratio, "cell": idx})
            users, items = trainer.recommendation_embeddings(result.interaction, result.state)
            report = _report(users, items, split, protocol, ks, args.n, args.eval_seed)
            metrics = [f"{table[k]:.6f}" for k in ks for table in (report.recall, report.ndcg)]
            rows.append("\t".join([str(idx), *cell.values(), *metrics]))
            log.info("cell %d %s done", idx, cell)
        table = "\n".join(rows) + "\n"
        (out / "sweep.tsv").write_text(table)
    sys.stdout.write(table)
    return EXIT_OK


COMMANDS = {
    "split": cmd_split, "train": cmd_train, "eval": cmd_eval, "denoise-report": cmd_denoise_report,
    "inject-noise": cmd_inject_noise, "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"dcdsr: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, DenoiseCollapseError) as err:
        print(f"dcdsr: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as err:
        print(f"dcdsr: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, KeyError) as err:
        print(f"dcdsr: data error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
