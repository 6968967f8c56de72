"""Command-line pipeline: mine -> mask -> pretrain -> finetune -> eval.

Every command resolves its configuration in three layers (built-in
defaults, then --config file, then explicit flags), writes the resolved
result into its output directory, and keeps its artifacts there. Exit
codes: 0 success, 1 usage, 2 data problems, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import dump_config, load_config_file, resolve
from .corpus import (LabeledExample, Vocab, build_vocab, load_classification_tsv,
                     load_conll, read_corpus)
from .checkpoint import load_checkpoint, params_from_arrays, save_checkpoint
from .encoder import PRESETS, EncoderConfig, forward
from .errors import DataError, SentikitError, UsageError
from .figures import (save_attention_figure, save_dev_curves, save_lexicon_figure,
                      save_loss_curves, save_mask_stats_figure)
from .finetune import (FinetuneConfig, cv_splits, evaluate_classifier, evaluate_orl,
                       finetune_classifier, finetune_orl, parse_grid, run_three_seeds)
from .masker import MaskConfig, load_masked_corpus, mask_corpus
from .miner import Knowledge, MinerConfig, SeedSet, mine_lexicon, save_pairs
from .objectives import JointConfig
from .postag import Tagger
from .pretrain import PretrainConfig, run_pretrain

SHARED = {"config": "", "seed": 0, "out_dir": "out", "threads": 1}

DEFAULTS = {
    "mine": {**SHARED, "corpus": "", "seeds": "", "window": 10, "smoothing": 0.1,
             "min_word_freq": 5, "pair_window": 3, "min_pair_freq": 2,
             "max_words": 0, "pos_filter": True, "top_k": 15},
    "mask": {**SHARED, "corpus": "", "lexicon": "", "pairs": "", "mode": "hybrid",
             "budget_rate": 0.1, "max_pairs": 2, "pair_window": 3,
             "mask_prob": 0.8, "random_prob": 0.1, "min_freq": 1, "max_size": 0},
    "pretrain": {**SHARED, "masked": "", "vocab": "", "preset": "toy",
                 "layers": 0, "hidden": 0, "heads": 0, "ffn": 0,
                 "max_seq_len": 0, "dropout": -1.0, "objectives": "sw,wp,ap",
                 "ap_variant": "ap", "ap_mode": "sent_vector", "bce": "full",
                 "epochs": 3, "batch_size": 32, "lr": 5e-5, "grad_clip": 1.0,
                 "log_every": 20},
    "finetune": {**SHARED, "task": "sentence", "train": "", "dev": "", "init": "",
                 "vocab": "", "epochs": 10, "batch_size": 16, "lr": 3e-5,
                 "grad_clip": 1.0, "seeds": "", "grid": "", "cv": False,
                 "folds": 4},
    "eval": {**SHARED, "model": "", "data": "", "batch_size": 64,
             "dump_attention": 0},
    "selftest": {**SHARED},
    "demo": {**SHARED, "sentences": 1500, "epochs": 3, "lr": 2e-3,
             "batch_size": 32, "ft_epochs": 6, "ft_lr": 1e-3},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_shared(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    p.add_argument("--threads", type=int, help="worker threads for evaluation")


def build_parser() -> _Parser:
    p = _Parser(prog="sentikit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"sentikit {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command")

    m = sub.add_parser("mine", help="mine a sentiment lexicon and aspect pairs")
    m.add_argument("--corpus", help="unlabeled text, one sentence per line")
    m.add_argument("--seeds", help="seed word TSV (default: packaged 46-word list)")
    m.add_argument("--window", type=int, help="co-occurrence window")
    m.add_argument("--smoothing", type=float, help="PMI interpolation weight")
    m.add_argument("--min-word-freq", dest="min_word_freq", type=int)
    m.add_argument("--pair-window", dest="pair_window", type=int)
    m.add_argument("--min-pair-freq", dest="min_pair_freq", type=int)
    m.add_argument("--max-words", dest="max_words", type=int,
                   help="cap mined (non-seed) lexicon size; 0 = no cap")
    m.add_argument("--no-pos-filter", dest="pos_filter", action="store_false",
                   default=None, help="mine candidates of every word class")
    m.add_argument("--top-k", dest="top_k", type=int, help="words per side in the figure")
    _add_shared(m)

    k = sub.add_parser("mask", help="detect sentiment and write a masked corpus")
    k.add_argument("--corpus", help="unlabeled text, one sentence per line")
    k.add_argument("--lexicon", help="lexicon.tsv from the mine command")
    k.add_argument("--pairs", help="pairs.tsv from the mine command")
    k.add_argument("--mode", choices=("hybrid", "words", "random"))
    k.add_argument("--budget-rate", dest="budget_rate", type=float)
    k.add_argument("--max-pairs", dest="max_pairs", type=int)
    k.add_argument("--pair-window", dest="pair_window", type=int)
    k.add_argument("--mask-prob", dest="mask_prob", type=float)
    k.add_argument("--random-prob", dest="random_prob", type=float)
    k.add_argument("--min-freq", dest="min_freq", type=int, help="vocab frequency floor")
    k.add_argument("--max-size", dest="max_size", type=int, help="vocab cap; 0 = none")
    _add_shared(k)

    t = sub.add_parser("pretrain", help="train the encoder on a masked corpus")
    t.add_argument("--masked", help="masked.jsonl from the mask command")
    t.add_argument("--vocab", help="vocab.tsv from the mask command")
    t.add_argument("--preset", choices=sorted(PRESETS))
    t.add_argument("--layers", type=int, help="override preset layer count")
    t.add_argument("--hidden", type=int, help="override preset hidden size")
    t.add_argument("--heads", type=int, help="override preset head count")
    t.add_argument("--ffn", type=int, help="override preset feed-forward size")
    t.add_argument("--max-seq-len", dest="max_seq_len", type=int)
    t.add_argument("--dropout", type=float)
    t.add_argument("--objectives", help="comma list from {sw,wp,ap}")
    t.add_argument("--ap-variant", dest="ap_variant", choices=("ap", "ap_i"))
    t.add_argument("--ap-mode", dest="ap_mode", choices=("sent_vector", "pair_vector"))
    t.add_argument("--bce", choices=("full", "positive_only"))
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--grad-clip", dest="grad_clip", type=float)
    t.add_argument("--log-every", dest="log_every", type=int)
    _add_shared(t)

    f = sub.add_parser("finetune", help="train a task head from a checkpoint")
    f.add_argument("--task", choices=("sentence", "aspect", "orl"))
    f.add_argument("--train", help="task training file")
    f.add_argument("--dev", help="task development file")
    f.add_argument("--init", help="pre-trained checkpoint; omit for random init")
    f.add_argument("--vocab", help="vocab.tsv (only needed without --init)")
    f.add_argument("--epochs", type=int)
    f.add_argument("--batch-size", dest="batch_size", type=int)
    f.add_argument("--lr", type=float)
    f.add_argument("--grad-clip", dest="grad_clip", type=float)
    f.add_argument("--seeds", help="3 comma-separated seeds: median-of-3 protocol")
    f.add_argument("--grid", help="hyperparameter grid file (key=v1,v2 lines)")
    f.add_argument("--cv", action="store_true", default=None,
                   help="cross-validate over documents instead of using --dev")
    f.add_argument("--folds", type=int, help="fold count for --cv")
    _add_shared(f)

    e = sub.add_parser("eval", help="score a fine-tuned model on a dataset")
    e.add_argument("--model", help="checkpoint from the finetune command")
    e.add_argument("--data", help="evaluation file matching the model's task")
    e.add_argument("--batch-size", dest="batch_size", type=int)
    e.add_argument("--dump-attention", dest="dump_attention", type=int,
                   help="write [CLS] attention figures for the first N examples")
    _add_shared(e)

    s = sub.add_parser("selftest", help="run built-in oracle checks")
    _add_shared(s)

    d = sub.add_parser("demo", help="end-to-end pipeline on generated data")
    d.add_argument("--sentences", type=int, help="synthetic corpus size")
    d.add_argument("--epochs", type=int, help="pre-training epochs")
    d.add_argument("--lr", type=float, help="pre-training learning rate")
    d.add_argument("--batch-size", dest="batch_size", type=int)
    d.add_argument("--ft-epochs", dest="ft_epochs", type=int)
    d.add_argument("--ft-lr", dest="ft_lr", type=float)
    _add_shared(d)

    return p


def _resolve(command: str, args: argparse.Namespace) -> dict:
    cli = {k: v for k, v in vars(args).items()
           if k not in ("command",) and v is not None}
    file_cfg = None
    if cli.get("config"):
        file_cfg = load_config_file(cli["config"])
    return resolve(DEFAULTS[command], file_cfg, cli)


def _require(cfg, key, hint):
    if not cfg[key]:
        raise UsageError(f"--{key.replace('_', '-')} is required; {hint}")
    return cfg[key]


def _need_file(path, producer):
    if not os.path.exists(path):
        raise DataError(f"{path} not found; produce it with `sentikit {producer}`")
    return path


def _must_exist(path):
    if not os.path.exists(path):
        raise DataError(f"file not found: {path}")
    return path


# ---------------------------------------------------------------------------
# commands

def cmd_mine(cfg) -> int:
    corpus = _require(cfg, "corpus", "one sentence per line")
    sentences = read_corpus(corpus)
    seeds = SeedSet.load(cfg["seeds"] or None)
    mcfg = MinerConfig(window=cfg["window"], smoothing=cfg["smoothing"],
                       min_word_freq=cfg["min_word_freq"],
                       pair_window=cfg["pair_window"],
                       min_pair_freq=cfg["min_pair_freq"],
                       pos_filter=cfg["pos_filter"],
                       max_words=cfg["max_words"] or None)
    result = mine_lexicon(sentences, seeds, mcfg)
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    dump_config(cfg, out)
    lex_path = os.path.join(out, "lexicon.tsv")
    result.lexicon.save(lex_path)
    pairs_path = os.path.join(out, "pairs.tsv")
    save_pairs(result.pairs, pairs_path)
    fig = save_lexicon_figure(os.path.join(out, "lexicon.png"),
                              result.lexicon, cfg["top_k"])

    entries = list(result.lexicon.entries.values())
    n_pos = sum(1 for e in entries if e.polarity > 0)
    report_path = os.path.join(out, "report.txt")
    with open(report_path, "w", encoding="utf-8") as f:
        f.write(f"sentences\t{len(sentences)}\n")
        f.write(f"tokens\t{result.stats.n_tokens}\n")
        f.write(f"cooccurrence_events\t{result.stats.n_events}\n")
        f.write(f"candidates\t{result.n_candidates}\n")
        f.write(f"lexicon_entries\t{len(entries)}\n")
        f.write(f"positive_entries\t{n_pos}\n")
        f.write(f"negative_entries\t{len(entries) - n_pos}\n")
        f.write(f"seed_overrides\t{result.n_seed_overrides}\n")
        f.write(f"pairs\t{len(result.pairs)}\n")
    for path in (lex_path, pairs_path, report_path, fig):
        print("wrote", path)
    print(f"lexicon: {len(entries)} entries ({n_pos} positive), "
          f"{len(result.pairs)} aspect-sentiment pairs")
    return 0


def cmd_mask(cfg) -> int:
    corpus = _require(cfg, "corpus", "one sentence per line")
    lex = _need_file(_require(cfg, "lexicon", "from the mine command"), "mine")
    prs = _need_file(_require(cfg, "pairs", "from the mine command"), "mine")
    sentences = read_corpus(corpus)
    knowledge = Knowledge.load(lex, prs)
    vocab = build_vocab(sentences, min_freq=cfg["min_freq"],
                        max_size=cfg["max_size"] or None)
    mcfg = MaskConfig(budget_rate=cfg["budget_rate"], max_pairs=cfg["max_pairs"],
                      mode=cfg["mode"], mask_prob=cfg["mask_prob"],
                      random_prob=cfg["random_prob"], pair_window=cfg["pair_window"])
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    dump_config(cfg, out)
    vocab_path = os.path.join(out, "vocab.tsv")
    vocab.save(vocab_path)
    masked_path = os.path.join(out, "masked.jsonl")
    stats = mask_corpus(sentences, knowledge, cfg["seed"], masked_path,
                        mcfg, vocab=vocab)
    fig = save_mask_stats_figure(os.path.join(out, "mask_stats.png"), stats)
    report_path = os.path.join(out, "mask_report.txt")
    branch_total = stats.branch_mask + stats.branch_random + stats.branch_keep
    with open(report_path, "w", encoding="utf-8") as f:
        f.write(f"sentences\t{stats.sentences}\n")
        f.write(f"tokens\t{stats.tokens}\n")
        f.write(f"budget_total\t{stats.budget_total}\n")
        f.write(f"pairs_detected\t{stats.pairs_detected}\n")
        f.write(f"pairs_masked\t{stats.pairs_masked}\n")
        f.write(f"sentiment_words_detected\t{stats.words_detected}\n")
        f.write(f"sentiment_tokens_masked\t{stats.step2_positions}\n")
        f.write(f"common_tokens_masked\t{stats.step3_positions}\n")
        for name in ("branch_mask", "branch_random", "branch_keep"):
            share = getattr(stats, name) / branch_total if branch_total else 0.0
            f.write(f"{name}\t{getattr(stats, name)}\t{share:.4f}\n")
    for path in (vocab_path, masked_path, report_path, fig):
        print("wrote", path)
    print(f"masked {stats.sentences} sentences: {stats.pairs_masked} pairs, "
          f"{stats.step2_positions} sentiment tokens, {stats.step3_positions} common tokens")
    return 0


def _parse_objectives(spec: str) -> list:
    parts = [p.strip() for p in spec.split(",") if p.strip()]
    bad = [p for p in parts if p not in ("sw", "wp", "ap")]
    if bad or not parts:
        raise UsageError(f"--objectives must list sw, wp, ap; got {spec!r}")
    return parts


def _encoder_config(cfg, vocab_size: int) -> EncoderConfig:
    base = dict(PRESETS[cfg["preset"]])
    if cfg["layers"]:
        base["n_layers"] = cfg["layers"]
    if cfg["hidden"]:
        base["hidden_dim"] = cfg["hidden"]
    if cfg["heads"]:
        base["n_heads"] = cfg["heads"]
    if cfg["ffn"]:
        base["ffn_dim"] = cfg["ffn"]
    if cfg["max_seq_len"]:
        base["max_seq_len"] = cfg["max_seq_len"]
    if cfg["dropout"] >= 0:
        base["dropout_rate"] = cfg["dropout"]
    return EncoderConfig(vocab_size=vocab_size, ap_mode=cfg["ap_mode"], **base)


def cmd_pretrain(cfg) -> int:
    masked = _need_file(_require(cfg, "masked", "from the mask command"), "mask")
    vocab_path = _need_file(_require(cfg, "vocab", "from the mask command"), "mask")
    vocab = Vocab.load(vocab_path)
    examples = load_masked_corpus(masked)
    if not examples:
        raise DataError(f"{masked} holds no masked examples")

    objs = _parse_objectives(cfg["objectives"])
    has_wp = any(ex.wp_targets for ex in examples)
    has_ap = any(ex.ap_targets for ex in examples)
    if "wp" in objs and not has_wp:
        raise UsageError("objective wp needs polarity targets; re-run "
                         "`sentikit mask` with --mode hybrid or words")
    if "ap" in objs and not has_ap:
        raise UsageError("objective ap needs pair targets; re-run "
                         "`sentikit mask` with --mode hybrid")
    joint = JointConfig(include_sw="sw" in objs, include_wp="wp" in objs,
                        include_ap="ap" in objs,
                        ap_variant=cfg["ap_variant"], ap_mode=cfg["ap_mode"],
                        bce=cfg["bce"])
    enc = _encoder_config(cfg, len(vocab))
    pcfg = PretrainConfig(epochs=cfg["epochs"], batch_size=cfg["batch_size"],
                          lr=cfg["lr"], grad_clip=cfg["grad_clip"],
                          log_every=cfg["log_every"], seed=cfg["seed"])
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    dump_config(cfg, out)
    result = run_pretrain(enc, joint, examples, pcfg, out_dir=out)
    ckpt_path = os.path.join(out, "checkpoint.ckpt")
    extra = {"stage": "pretrain", "vocab": list(vocab.itos),
             "objectives": ",".join(objs), "ap_variant": cfg["ap_variant"],
             "bce": cfg["bce"]}
    save_checkpoint(ckpt_path, enc.to_dict(), result.params, extra=extra)
    fig = save_loss_curves(os.path.join(out, "loss_curves.png"), result.log_rows)
    for path in (ckpt_path, os.path.join(out, "train_log.tsv"), fig):
        print("wrote", path)
    last = result.log_rows[-1]
    print(f"pre-trained {pcfg.epochs} epochs, {result.steps} steps; "
          f"final losses sw={last[1]:.4f} wp={last[2]:.4f} ap={last[3]:.4f}")
    return 0


def _load_init(cfg):
    """(encoder config, params or None, vocab) from --init / --vocab."""
    if cfg["init"]:
        _need_file(cfg["init"], "pretrain")
        conf, arrays, _opt, extra = load_checkpoint(cfg["init"])
        if "vocab" not in extra:
            raise DataError(f"{cfg['init']} carries no vocabulary; "
                            "was it written by `sentikit pretrain`?")
        vocab = Vocab(extra["vocab"])
        enc = EncoderConfig(**conf)
        params = params_from_arrays(arrays)
        return enc, params, vocab
    vocab_path = cfg["vocab"]
    if not vocab_path:
        raise UsageError("--vocab is required when fine-tuning without --init")
    vocab = Vocab.load(_need_file(vocab_path, "mask"))
    enc = EncoderConfig(vocab_size=len(vocab), **PRESETS["toy"])
    return enc, None, vocab


def _load_task_data(task: str, path):
    if task == "orl":
        result = load_conll(path)
        if result.repaired_tags:
            print(f"note: repaired {result.repaired_tags} orphan I- tags in {path}")
        return result.sentences
    rows = load_classification_tsv(path)
    if task == "aspect":
        missing = sum(1 for r in rows if r.aspect is None)
        if missing:
            raise DataError(f"{path}: {missing} rows lack an aspect column")
    else:
        with_aspect = sum(1 for r in rows if r.aspect is not None)
        if with_aspect:
            raise DataError(f"{path}: {with_aspect} rows carry an aspect column; "
                            "use --task aspect")
    return rows


def _parse_seed_list(spec: str):
    try:
        seeds = [int(s) for s in spec.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--seeds must be integers, got {spec!r}") from None
    if len(seeds) != 3:
        raise UsageError("--seeds takes exactly 3 comma-separated values")
    return seeds


def cmd_finetune(cfg) -> int:
    train_path = _require(cfg, "train", "task training file")
    enc, init_params_, vocab = _load_init(cfg)
    train_rows = _load_task_data(cfg["task"], _must_exist(train_path))
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    dump_config(cfg, out)

    if cfg["cv"]:
        if cfg["task"] != "orl":
            raise UsageError("--cv applies to the orl task (document-level folds)")
        return _finetune_cv(cfg, enc, init_params_, vocab, train_rows, out)

    dev_rows = _load_task_data(cfg["task"], _must_exist(
        _require(cfg, "dev", "task development file")))

    points = [{}]
    if cfg["grid"]:
        with open(_must_exist(cfg["grid"]), encoding="utf-8") as f:
            points = parse_grid(f.read())
        allowed = {"lr", "batch_size", "epochs"}
        for pt in points:
            bad = set(pt) - allowed
            if bad:
                raise UsageError(f"grid keys {sorted(bad)} not tunable; "
                                 f"allowed: {sorted(allowed)}")

    def one_run(point, seed):
        fcfg = FinetuneConfig(task=cfg["task"],
                              epochs=point.get("epochs", cfg["epochs"]),
                              batch_size=point.get("batch_size", cfg["batch_size"]),
                              lr=point.get("lr", cfg["lr"]),
                              grad_clip=cfg["grad_clip"], seed=seed)
        if cfg["task"] == "orl":
            return finetune_orl(init_params_, enc, train_rows, dev_rows, vocab,
                                fcfg, out_dir=out)
        return finetune_classifier(init_params_, enc, train_rows, dev_rows, vocab,
                                   fcfg, out_dir=out)

    all_points = []
    best = None
    for point in points:
        if cfg["seeds"]:
            seeds = _parse_seed_list(cfg["seeds"])
            runs, chosen = run_three_seeds(lambda s: one_run(point, s), seeds)
        else:
            runs = [one_run(point, cfg["seed"])]
            chosen = runs[0]
        entry = {"point": point,
                 "runs": [{"seed": r.seed, "dev_score": r.dev_score} for r in runs],
                 "selected_seed": chosen.seed, "selected_dev": chosen.dev_score}
        all_points.append((entry, runs, chosen))
        if best is None or chosen.dev_score > best[2].dev_score:
            best = (entry, runs, chosen)

    entry, runs, chosen = best
    results = {"task": cfg["task"], "points": [e for e, _, _ in all_points],
               "best_point": entry["point"], "best_seed": chosen.seed,
               "best_dev": chosen.dev_score}
    results_path = os.path.join(out, "results.json")
    with open(results_path, "w", encoding="utf-8") as f:
        json.dump(results, f, indent=2, sort_keys=True)
        f.write("\n")

    extra = {"stage": "finetune", "task": cfg["task"], "vocab": list(vocab.itos),
             "seed": chosen.seed}
    if chosen.label_map is not None:
        extra["label_map"] = chosen.label_map
    if chosen.tagset is not None:
        extra["tagset"] = chosen.tagset
    ckpt_path = os.path.join(out, "model.ckpt")
    save_checkpoint(ckpt_path, enc.to_dict(), chosen.params, extra=extra)

    report_path = os.path.join(out, "report.tsv")
    with open(report_path, "w", encoding="utf-8") as f:
        f.write("metric\tvalue\n")
        f.write(f"dev_score\t{chosen.dev_score:.6f}\n")
        for r in runs:
            f.write(f"dev_score_seed{r.seed}\t{r.dev_score:.6f}\n")
    fig = save_dev_curves(os.path.join(out, "dev_curve.png"),
                          {r.seed: r.history for r in runs})
    for path in (ckpt_path, results_path, report_path, fig):
        print("wrote", path)
    print(f"{cfg['task']} dev score {chosen.dev_score:.4f} (seed {chosen.seed})")
    return 0


def _finetune_cv(cfg, enc, init_params_, vocab, rows, out) -> int:
    folds = cv_splits(rows, cfg["folds"])
    fold_scores = []
    for k, (train_rows, held_rows) in enumerate(folds):
        fcfg = FinetuneConfig(task="orl", epochs=cfg["epochs"],
                              batch_size=cfg["batch_size"], lr=cfg["lr"],
                              grad_clip=cfg["grad_clip"], seed=cfg["seed"])
        res = finetune_orl(init_params_, enc, train_rows, held_rows, vocab,
                           fcfg, out_dir=out)
        rep = evaluate_orl(res.params, enc, held_rows, vocab, res.tagset)
        fold_scores.append({"fold": k, "train": len(train_rows), "held": len(held_rows),
                            "binary_f1": rep["micro"]["binary"].f1,
                            "prop_f1": rep["micro"]["prop"].f1})
        print(f"fold {k}: binary_f1 {fold_scores[-1]['binary_f1']:.4f} "
              f"prop_f1 {fold_scores[-1]['prop_f1']:.4f}")
    mean_b = sum(s["binary_f1"] for s in fold_scores) / len(fold_scores)
    mean_p = sum(s["prop_f1"] for s in fold_scores) / len(fold_scores)
    results = {"task": "orl", "cv_folds": cfg["folds"], "folds": fold_scores,
               "mean_binary_f1": mean_b, "mean_prop_f1": mean_p}
    results_path = os.path.join(out, "results.json")
    with open(results_path, "w", encoding="utf-8") as f:
        json.dump(results, f, indent=2, sort_keys=True)
        f.write("\n")
    report_path = os.path.join(out, "report.tsv")
    with open(report_path, "w", encoding="utf-8") as f:
        f.write("metric\tvalue\n")
        f.write(f"mean_binary_f1\t{mean_b:.6f}\n")
        f.write(f"mean_prop_f1\t{mean_p:.6f}\n")
    print("wrote", results_path)
    print("wrote", report_path)
    print(f"{cfg['folds']}-fold orl: binary_f1 {mean_b:.4f}, prop_f1 {mean_p:.4f}")
    return 0


def cmd_eval(cfg) -> int:
    model = _need_file(_require(cfg, "model", "from the finetune command"), "finetune")
    data_path = _require(cfg, "data", "evaluation file")
    conf, arrays, _opt, extra = load_checkpoint(model)
    if extra.get("stage") != "finetune":
        raise UsageError(f"{model} is not a fine-tuned model; run `sentikit finetune`")
    task = extra["task"]
    vocab = Vocab(extra["vocab"])
    enc = EncoderConfig(**conf)
    params = params_from_arrays(arrays)
    rows = _load_task_data(task, _must_exist(data_path))
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    dump_config(cfg, out)

    report_path = os.path.join(out, "eval.tsv")
    results: dict = {"task": task, "examples": len(rows)}
    if task == "orl":
        rep = evaluate_orl(params, enc, rows, vocab, extra["tagset"],
                           batch_size=cfg["batch_size"])
        with open(report_path, "w", encoding="utf-8") as f:
            f.write("role\tmetric\tprecision\trecall\tf1\n")
            for role, metrics in sorted(rep.items()):
                for kind in ("binary", "prop"):
                    m = metrics[kind]
                    f.write(f"{role}\t{kind}\t{m.precision:.6f}\t{m.recall:.6f}\t{m.f1:.6f}\n")
        results["micro_binary_f1"] = rep["micro"]["binary"].f1
        results["micro_prop_f1"] = rep["micro"]["prop"].f1
        print(f"orl micro binary_f1 {results['micro_binary_f1']:.4f} "
              f"prop_f1 {results['micro_prop_f1']:.4f}")
    else:
        label_map = extra["label_map"]
        acc = _parallel_accuracy(params, enc, rows, vocab, label_map,
                                 cfg["batch_size"], cfg["threads"])
        with open(report_path, "w", encoding="utf-8") as f:
            f.write("metric\tvalue\n")
            f.write(f"accuracy\t{acc:.6f}\n")
        results["accuracy"] = acc
        print(f"{task} accuracy {acc:.4f} on {len(rows)} examples")

    results_path = os.path.join(out, "results.json")
    with open(results_path, "w", encoding="utf-8") as f:
        json.dump(results, f, indent=2, sort_keys=True)
        f.write("\n")
    print("wrote", report_path)
    print("wrote", results_path)

    if cfg["dump_attention"]:
        _dump_attention(params, enc, rows[: cfg["dump_attention"]], vocab, out)
    return 0


def _parallel_accuracy(params, enc, rows, vocab, label_map, batch_size, threads):
    if threads <= 1 or len(rows) < 2 * batch_size:
        return evaluate_classifier(params, enc, rows, vocab, label_map, batch_size)
    chunks = [rows[i::threads] for i in range(threads)]
    chunks = [c for c in chunks if c]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        accs = list(pool.map(
            lambda c: evaluate_classifier(params, enc, c, vocab, label_map, batch_size),
            chunks))
    return sum(a * len(c) for a, c in zip(accs, chunks)) / len(rows)


def _dump_attention(params, enc, rows, vocab, out):
    from .finetune import _encode_row
    for i, row in enumerate(rows):
        ids = _encode_row(row, vocab, enc.max_seq_len)
        result = forward(params, enc, np.asarray([ids]), retain_attention=True)
        weights = np.stack([a for a in result.attentions])  # (L, B, h, T, T) -> squeeze B
        weights = weights[:, 0]
        tokens = vocab.decode(ids)
        path = os.path.join(out, f"attention_{i:03d}.png")
        save_attention_figure(path, weights, tokens)
        print("wrote", path)


def cmd_selftest(cfg) -> int:
    from .selftest import run_selftest
    print("running oracle checks:")
    rows = run_selftest(verbose=True)
    failures = [r for r in rows if not r[1]]
    if failures:
        print(f"{len(failures)} of {len(rows)} checks failed")
        return 2
    print(f"all {len(rows)} checks passed")
    return 0


def cmd_demo(cfg) -> int:
    from .synthetic import (SyntheticConfig, generate_classification, generate_corpus,
                            write_classification, write_corpus)
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    dump_config(cfg, out)
    seed = cfg["seed"]

    data_dir = os.path.join(out, "data")
    os.makedirs(data_dir, exist_ok=True)
    corpus_path = os.path.join(data_dir, "corpus.txt")
    write_corpus(generate_corpus(cfg["sentences"], seed=seed + 11,
                                 cfg=SyntheticConfig()), corpus_path)
    train, dev = generate_classification(500, 100, seed=seed + 5)
    train_path = os.path.join(data_dir, "train.tsv")
    dev_path = os.path.join(data_dir, "dev.tsv")
    write_classification(train, train_path)
    write_classification(dev, dev_path)
    print(f"generated {cfg['sentences']} sentences + 500/100 labeled examples")

    mine_dir = os.path.join(out, "mine")
    cmd_mine(resolve(DEFAULTS["mine"], None,
                     {"corpus": corpus_path, "out_dir": mine_dir, "seed": seed}))
    mask_dir = os.path.join(out, "mask")
    cmd_mask(resolve(DEFAULTS["mask"], None,
                     {"corpus": corpus_path, "out_dir": mask_dir, "seed": seed,
                      "lexicon": os.path.join(mine_dir, "lexicon.tsv"),
                      "pairs": os.path.join(mine_dir, "pairs.tsv")}))
    pre_dir = os.path.join(out, "pretrain")
    cmd_pretrain(resolve(DEFAULTS["pretrain"], None,
                         {"masked": os.path.join(mask_dir, "masked.jsonl"),
                          "vocab": os.path.join(mask_dir, "vocab.tsv"),
                          "out_dir": pre_dir, "seed": seed,
                          "max_seq_len": 64, "epochs": cfg["epochs"],
                          "batch_size": cfg["batch_size"], "lr": cfg["lr"]}))
    ft_dir = os.path.join(out, "finetune")
    cmd_finetune(resolve(DEFAULTS["finetune"], None,
                         {"task": "sentence", "train": train_path, "dev": dev_path,
                          "init": os.path.join(pre_dir, "checkpoint.ckpt"),
                          "out_dir": ft_dir, "seed": seed, "seeds": "0,1,2",
                          "epochs": cfg["ft_epochs"], "lr": cfg["ft_lr"]}))
    eval_dir = os.path.join(out, "eval")
    cmd_eval(resolve(DEFAULTS["eval"], None,
                     {"model": os.path.join(ft_dir, "model.ckpt"),
                      "data": dev_path, "out_dir": eval_dir, "seed": seed,
                      "dump_attention": 2}))
    print(f"demo artifacts under {out}/")
    return 0


COMMANDS = {"mine": cmd_mine, "mask": cmd_mask, "pretrain": cmd_pretrain,
            "finetune": cmd_finetune, "eval": cmd_eval, "selftest": cmd_selftest,
            "demo": cmd_demo}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help()
            return 1
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = _resolve(args.command, args)
        return COMMANDS[args.command](cfg)
    except SentikitError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
