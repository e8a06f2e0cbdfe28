"""Command-line entry point: train, eval, chat, trace, synth, params."""

import argparse
import os

from . import corpus, evaluation, training
from .chat import run_chat
from .config import DEFAULT_EMOTIONS, load_config
from .model import build_model, param_report


def _load_labels(n_emotions):
    return DEFAULT_EMOTIONS[:n_emotions]


def _load_run(checkpoint):
    trainer = training.load_checkpoint(checkpoint)
    vocab_path = os.path.join(trainer.cfg.out_dir, "vocab.txt")
    vocab = corpus.Vocab.load(vocab_path)
    labels = _load_labels(trainer.cfg.model.n_emotions)
    return trainer.model, vocab, labels, trainer.cfg


def cmd_train(args):
    cfg = load_config(args.config)
    labels = _load_labels(cfg.model.n_emotions)
    samples = corpus.load_dataset(cfg.data, split="train", labels=labels)
    n_val = max(1, int(len(samples) * cfg.val_fraction))
    train_samples, val_samples = samples[:-n_val], samples[-n_val:]
    trainer, metrics_path, best_path = training.fit(
        cfg, train_samples, val_samples, resume=args.resume,
        log_every=args.log_every)
    val = training.evaluate(trainer.model, val_samples,
                            corpus.Vocab.load(
                                os.path.join(cfg.out_dir, "vocab.txt")),
                            cfg)
    print(f"done: {trainer.step} steps  val top1={val['top1']:.3f} "
          f"ppl={val['ppl']:.2f}")
    print(f"metrics: {metrics_path}\nbest checkpoint: {best_path}")


def cmd_eval(args):
    model, vocab, labels, cfg = _load_run(args.checkpoint)
    samples = corpus.load_dataset(args.data, split="test", labels=labels)
    val = training.evaluate(model, samples, vocab, cfg)
    traces = []
    hyps, refs = [], []
    for s in samples:
        tr = evaluation.trace_sample(model, s, vocab, cfg.model.max_decode_len)
        if tr.p:
            traces.append((tr.p, s.emotion))
        hyps.append(tr.response.split())
        refs.append(corpus.tokenize(s.target))
    print(f"samples: {val['n']}  perplexity: {val['ppl']:.2f}")
    if traces:
        for k in (1, 3, 5):
            if k <= cfg.model.n_emotions:
                acc = evaluation.topk_accuracy(traces, k)
                print(f"emotion top-{k} accuracy: {acc:.3f}")
    print(f"BLEU: {evaluation.corpus_bleu(hyps, refs):.2f}")


def cmd_chat(args):
    model, vocab, labels, cfg = _load_run(args.checkpoint)
    run_chat(model, vocab, labels, max_len=cfg.model.max_decode_len)


def cmd_trace(args):
    model, vocab, labels, cfg = _load_run(args.checkpoint)
    samples = corpus.load_dataset(args.data, split="test", labels=labels)
    os.makedirs(args.out_dir, exist_ok=True)
    for i, s in enumerate(samples):
        tr = evaluation.trace_sample(model, s, vocab, cfg.model.max_decode_len)
        evaluation.export_trace(tr, os.path.join(args.out_dir,
                                                 f"trace_{i:05d}.txt"), labels)
    print(f"wrote {len(samples)} trace(s) to {args.out_dir}")


def cmd_synth(args):
    labels = _load_labels(args.emotions)
    samples = corpus.gen_synthetic(args.emotions, args.samples, args.seed,
                                   labels=labels)
    corpus.save_dataset(samples, args.out, labels=labels)
    print(f"wrote {len(samples)} synthetic sample(s) to {args.out}")


def cmd_params(args):
    cfg = load_config(args.config)
    if cfg.model.vocab_size <= 0:
        cfg.model.vocab_size = args.vocab_size
    for kind in ("trs", "multi_trs", "moel"):
        print(param_report(build_model(kind, cfg.model)))


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="listenmix",
        description="Emotion-gated mixture-of-listeners dialogue model")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("config")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--log-every", type=int, default=100)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="metrics on a dataset")
    p.add_argument("checkpoint")
    p.add_argument("data")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("chat", help="interactive REPL")
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("trace", help="export emotion-distribution traces")
    p.add_argument("checkpoint")
    p.add_argument("data")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("out")
    p.add_argument("--emotions", type=int, default=4)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("params", help="parameter-count breakdown per model kind")
    p.add_argument("config")
    p.add_argument("--vocab-size", type=int, default=24000,
                   help="assumed vocabulary size when none is configured")
    p.set_defaults(func=cmd_params)

    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
