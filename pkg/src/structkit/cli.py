"""Command-line surface.

Subcommands: gen-corpus, extract, corrupt, train, eval-gen, eval-aux,
decode, gradcheck, parse. Config files are flat key=value text, overridable
by flags; the STRUCTKIT_SEED environment variable is a last-resort seed
(precedence: flag > config file > env > default 0).
"""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from structkit.corruption import (
    CorruptionConfig, corpus_stats, example_seed, make_dae_example,
)
from structkit.data import (
    DatasetRecord, analyze, encoder_input_from, extract_json, generate_corpus,
    read_jsonl, target_labels_from, vocabulary_for, write_jsonl,
)
from structkit.errors import StructkitError
from structkit.evaluation import evaluate_auxiliary, evaluate_generation
from structkit.frontend.lexer import lex
from structkit.frontend.parser import parse as parse_lexemes
from structkit.frontend.tokenizer import EOS, detokenize, tokenize_text
from structkit.model.checkpoint import load_checkpoint, save_checkpoint
from structkit.model.config import ModelConfig
from structkit.model.inputs import EncoderInput, TargetLabels
from structkit.model.seq2seq import Model
from structkit.numkit import finite_diff_check
from structkit.training import RunConfig, Trainer, prepare_examples

_CORRUPTION_KEYS = {f.name: f.type for f in
                    dataclasses.fields(CorruptionConfig)}


def load_config_file(path: str) -> dict[str, str]:
    """Flat key=value lines; '#' comments and blank lines ignored."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _coerce(value: str, example) -> object:
    if isinstance(example, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(example, int):
        return int(value)
    if isinstance(example, float):
        return float(value)
    if isinstance(example, tuple):
        parts = [float(p) for p in value.split(",")]
        return tuple(parts)
    return value


def build_run_config(config_path: str | None,
                     overrides: list[str],
                     seed_flag: int | None) -> RunConfig:
    """Precedence: --set/flags > config file > STRUCTKIT_SEED > defaults."""
    cfg = RunConfig()
    corruption = CorruptionConfig()
    env_seed = os.environ.get("STRUCTKIT_SEED")
    if env_seed is not None:
        cfg.seed = int(env_seed)

    def apply(key: str, value: str) -> None:
        if key.startswith("corruption_"):
            sub = key[len("corruption_"):]
            if not hasattr(corruption, sub):
                raise ValueError(f"unknown corruption config key {sub!r}")
            setattr(corruption, sub,
                    _coerce(value, getattr(corruption, sub)))
        elif hasattr(cfg, key) and key != "corruption":
            setattr(cfg, key, _coerce(value, getattr(cfg, key)))
        else:
            raise ValueError(f"unknown config key {key!r}")

    if config_path:
        for key, value in load_config_file(config_path).items():
            apply(key, value)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        apply(key.strip(), value.strip())
    if seed_flag is not None:
        cfg.seed = seed_flag
    cfg.corruption = corruption
    return cfg


def resolve_seed(flag_value: int | None) -> int:
    if flag_value is not None:
        return flag_value
    env_seed = os.environ.get("STRUCTKIT_SEED")
    if env_seed is not None:
        return int(env_seed)
    return 0


def _read_source(args) -> str:
    if args.source is not None:
        return args.source
    with open(args.file, "r", encoding="utf-8") as fh:
        return fh.read()


def _encoder_input_for(source: str, mode: str, vocab, cfg: ModelConfig):
    if mode == "text2code":
        ids = np.array([t.id for t in tokenize_text(source, vocab)],
                       dtype=np.int64)
        return EncoderInput.text_mode(ids)
    ex = analyze(source, vocab, cfg.h_max)
    return encoder_input_from(ex)


# --------------------------------------------------------------------------
# Subcommand handlers.

def cmd_gen_corpus(args) -> int:
    records = generate_corpus(
        args.n, resolve_seed(args.seed), args.task, max_depth=args.max_depth,
        max_stmts=args.max_stmts, target_tokens=args.target_tokens,
        max_leaves=args.max_leaves, max_vars=args.max_vars)
    write_jsonl(args.out, records)
    print(f"wrote {len(records)} {args.task} records to {args.out}")
    return 0


def cmd_extract(args) -> int:
    records = read_jsonl(args.data)
    vocab = vocabulary_for(records)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for rec in records:
            text = rec.source if args.side == "source" else rec.target
            ex = analyze(text, vocab, args.h_max)
            out.write(json.dumps(extract_json(ex)) + "\n")
    finally:
        if args.out:
            out.close()
    return 0


def cmd_corrupt(args) -> int:
    records = read_jsonl(args.data)
    cfg = CorruptionConfig(token_corrupt_rate=args.rate,
                           span_mean=args.span_mean,
                           structure_drop_rate=args.structure_rate,
                           seed=resolve_seed(args.seed))
    sources = [rec.target for rec in records]
    vocab = vocabulary_for(records)
    if args.stats:
        stats = corpus_stats(sources, cfg, vocab, h_max=args.h_max)
        print(json.dumps(stats, indent=2))
        return 0
    for index, source in enumerate(sources):
        rng = np.random.default_rng(example_seed(cfg.seed, index))
        dae = make_dae_example(source, cfg, rng, vocab, h_max=args.h_max)
        enc = dae.encoder_input
        print(json.dumps({
            "index": index,
            "n_affected": dae.stats.n_affected,
            "n_tokens": dae.stats.n_tokens,
            "corrupted_length": enc.n_code,
            "surviving_leaves": enc.n_leaves,
            "surviving_vars": enc.n_vars,
        }))
    return 0


def cmd_train(args) -> int:
    cfg = build_run_config(args.config, args.set, args.seed)
    if args.steps is not None:
        cfg.steps = args.steps
    records = read_jsonl(args.data)
    trainer = Trainer(cfg, records)
    os.makedirs(args.out_dir, exist_ok=True)
    checkpoint_path = os.path.join(args.out_dir, "checkpoint.json")
    metrics_path = os.path.join(args.out_dir, "metrics.csv")

    val_examples = None
    if args.val_data:
        val_records = read_jsonl(args.val_data)
        val_examples = prepare_examples(val_records, trainer.vocab, cfg)
    best_exact = -1.0
    interval = args.checkpoint_interval or cfg.steps
    done = 0
    while done < cfg.steps:
        chunk = min(interval, cfg.steps - done)
        trainer.run(chunk)
        done += chunk
        if val_examples is not None:
            gen = evaluate_generation(trainer.model, val_examples,
                                      trainer.vocab, beam=1)
            if gen["exact_match"] > best_exact:
                best_exact = gen["exact_match"]
                save_checkpoint(checkpoint_path, trainer.model, trainer.vocab)
            print(f"step {trainer.step_count}: val exact "
                  f"{gen['exact_match']:.4f} (best {best_exact:.4f})")
        else:
            save_checkpoint(checkpoint_path, trainer.model, trainer.vocab)
    trainer.save_metrics(metrics_path)
    last = trainer.metrics[-1]
    print(f"finished {trainer.step_count} steps: lm {last[1]:.4f} "
          f"app {last[2]:.4f} dfp {last[3]:.4f} total {last[4]:.4f}")
    print(f"checkpoint: {checkpoint_path}")
    print(f"metrics: {metrics_path}")
    return 0


def _load_eval_examples(args, model, vocab):
    records = read_jsonl(args.data)
    cfg = RunConfig(**{k: v for k, v in model.cfg.to_dict().items()
                       if k in {f.name for f in
                                dataclasses.fields(RunConfig)}})
    return prepare_examples(records, vocab, cfg)


def cmd_eval_gen(args) -> int:
    model, vocab = load_checkpoint(args.checkpoint)
    examples = _load_eval_examples(args, model, vocab)
    metrics = evaluate_generation(model, examples, vocab, beam=args.beam,
                                  max_len=args.max_len)
    print(json.dumps(metrics, indent=2))
    return 0


def cmd_eval_aux(args) -> int:
    model, vocab = load_checkpoint(args.checkpoint)
    examples = _load_eval_examples(args, model, vocab)
    metrics = evaluate_auxiliary(model, examples)
    print(json.dumps(metrics, indent=2))
    return 0


def cmd_decode(args) -> int:
    model, vocab = load_checkpoint(args.checkpoint)
    source = _read_source(args)
    enc = _encoder_input_for(source, args.mode, vocab, model.cfg)
    ids, truncated = model.generate(enc, max_len=args.max_len,
                                    beam=args.beam)
    text = detokenize(vocab.text_of(i) for i in ids)
    print(text)
    if truncated:
        print("warning: generation hit --max-len before <eos>",
              file=sys.stderr)
    if args.emit_structure:
        # Post-hoc teacher-forced pass over the generated sequence; the
        # auxiliary heads stay inactive during generation itself.
        seq = np.array(list(ids) + [EOS], dtype=np.int64)
        labels = TargetLabels(token_ids=seq,
                              leaf_type_paths=[None] * len(seq),
                              y=np.zeros((len(seq), len(seq)), dtype=bool))
        hidden = model.decoder_hidden(enc, labels)
        app_types = model.app.predict_types(hidden)
        probs = model.dfp.probabilities(hidden)
        edges = [[int(i), int(j), round(float(probs[i, j]), 4)]
                 for i, j in zip(*np.nonzero(probs >= 0.5))]
        print(json.dumps({
            "tokens": [vocab.text_of(i) for i in seq],
            "app_path_types": app_types,
            "dfp_edges": edges,
        }, indent=2))
    return 0


GRADCHECK_SOURCE = ("x = 1 ; y = x + 2 ; "
                    "if ( y < 3 ) { x = y ; } return x ;")


def cmd_gradcheck(args) -> int:
    records = [DatasetRecord(GRADCHECK_SOURCE, GRADCHECK_SOURCE, "translate")]
    vocab = vocabulary_for(records)
    cfg = ModelConfig(vocab_size=len(vocab), d_model=args.d_model,
                      n_enc_layers=args.layers, n_dec_layers=args.layers,
                      n_heads=args.heads, d_dfp=4, d_app=8,
                      alpha_app=args.alpha_app, alpha_dfp=args.alpha_dfp)
    ex = analyze(GRADCHECK_SOURCE, vocab, cfg.h_max)
    enc = encoder_input_from(ex)
    labels = target_labels_from(ex)
    model = Model(cfg, seed=resolve_seed(args.seed))

    def loss_and_grad():
        model.zero_grad()
        losses, cache = model.forward_loss(enc, labels)
        model.backward(cache)
        return losses.total

    report = finite_diff_check(loss_and_grad, model.params,
                               tolerance=args.tolerance,
                               raise_on_failure=False)
    failed = 0
    for name in sorted(report):
        err = report[name]
        status = "ok" if err < args.tolerance else "FAIL"
        failed += status == "FAIL"
        print(f"{name:24s} {err:.3e} {status}")
    print(f"max relative error {max(report.values()):.3e} over "
          f"{len(report)} parameter groups (tolerance {args.tolerance:g})")
    return 1 if failed else 0


def cmd_parse(args) -> int:
    source = _read_source(args)
    try:
        ast = parse_lexemes(lex(source))
    except StructkitError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    print(f"ok: {len(ast.nodes)} nodes, {len(ast.leaves)} leaves")
    if args.dump_ast:
        print(ast.dump())
    return 0


# --------------------------------------------------------------------------
# Argument parsing.

def _add_source_args(sub) -> None:
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--source", help="program text on the command line")
    group.add_argument("--file", help="read program text from a file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="structkit",
        description="Structure-aware seq2seq over MiniLang programs.")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("gen-corpus", help="generate a seeded corpus")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--task", choices=("identity", "rename", "spec2code"),
                     default="identity")
    sub.add_argument("--out", required=True)
    sub.add_argument("--max-depth", type=int, default=2)
    sub.add_argument("--max-stmts", type=int, default=4)
    sub.add_argument("--target-tokens", type=int, default=None)
    sub.add_argument("--max-leaves", type=int, default=None)
    sub.add_argument("--max-vars", type=int, default=None)
    sub.set_defaults(func=cmd_gen_corpus)

    sub = subs.add_parser("extract", help="dump structure JSON per example")
    sub.add_argument("--data", required=True)
    sub.add_argument("--out", default=None)
    sub.add_argument("--side", choices=("source", "target"),
                     default="target")
    sub.add_argument("--h-max", type=int, default=12)
    sub.set_defaults(func=cmd_extract)

    sub = subs.add_parser("corrupt", help="denoising corruption over targets")
    sub.add_argument("--data", required=True)
    sub.add_argument("--stats", action="store_true",
                     help="print corpus corruption statistics as JSON")
    sub.add_argument("--rate", type=float, default=0.35)
    sub.add_argument("--span-mean", type=float, default=12.0)
    sub.add_argument("--structure-rate", type=float, default=0.35)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--h-max", type=int, default=12)
    sub.set_defaults(func=cmd_corrupt)

    sub = subs.add_parser("train", help="train on a JSONL corpus")
    sub.add_argument("--data", required=True)
    sub.add_argument("--out-dir", required=True)
    sub.add_argument("--config", default=None,
                     help="flat key=value config file")
    sub.add_argument("--set", action="append", default=[],
                     metavar="KEY=VALUE",
                     help="override a config key (repeatable)")
    sub.add_argument("--steps", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--val-data", default=None,
                     help="held-out JSONL; keep the best-exact-match "
                          "checkpoint")
    sub.add_argument("--checkpoint-interval", type=int, default=None)
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("eval-gen", help="generation metrics")
    sub.add_argument("--checkpoint", required=True)
    sub.add_argument("--data", required=True)
    sub.add_argument("--beam", type=int, default=1)
    sub.add_argument("--max-len", type=int, default=192)
    sub.set_defaults(func=cmd_eval_gen)

    sub = subs.add_parser("eval-aux", help="teacher-forced APP/DFP metrics")
    sub.add_argument("--checkpoint", required=True)
    sub.add_argument("--data", required=True)
    sub.set_defaults(func=cmd_eval_aux)

    sub = subs.add_parser("decode", help="decode one source")
    sub.add_argument("--checkpoint", required=True)
    _add_source_args(sub)
    sub.add_argument("--mode", choices=("translate", "text2code"),
                     default="translate")
    sub.add_argument("--beam", type=int, default=1)
    sub.add_argument("--max-len", type=int, default=192)
    sub.add_argument("--emit-structure", action="store_true")
    sub.set_defaults(func=cmd_decode)

    sub = subs.add_parser("gradcheck",
                          help="finite-difference gradient check")
    sub.add_argument("--d-model", type=int, default=16)
    sub.add_argument("--layers", type=int, default=1)
    sub.add_argument("--heads", type=int, default=2)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--tolerance", type=float, default=1e-4)
    sub.add_argument("--alpha-app", type=float, default=0.1)
    sub.add_argument("--alpha-dfp", type=float, default=0.1)
    sub.set_defaults(func=cmd_gradcheck)

    sub = subs.add_parser("parse", help="parse MiniLang source")
    _add_source_args(sub)
    sub.add_argument("--dump-ast", action="store_true")
    sub.set_defaults(func=cmd_parse)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StructkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
