"""Training loop: warmup learning-rate schedule, oracle annealing,
checkpointing, deterministic seeding, and the fit driver."""

import json
import math
import os
import random

import torch

from .corpus import build_vocab, collate, encode_sample
from .model import build_model


def epsilon_oracle(t, gamma, t_thd):
    """Oracle-replacement probability at step t: gamma + (1 - gamma) e^{-t/t_thd}.
    Decays from 1 at t=0 toward the floor gamma."""
    if t < 0:
        raise ValueError("step must be nonnegative")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if t_thd <= 0:
        raise ValueError("t_thd must be positive")
    return gamma + (1.0 - gamma) * math.exp(-t / t_thd)


def lr_schedule(step, d_model, warmup, factor=1.0):
    """Warmup-then-decay rate: d_model^-0.5 * min(step^-0.5, step * warmup^-1.5),
    scaled by factor. Steps are 1-based."""
    if step < 1:
        raise ValueError("schedule starts at step 1")
    return factor * d_model ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


class Trainer:
    """Owns the model, optimizer, step counter, and the oracle RNG."""

    def __init__(self, cfg, model=None):
        self.cfg = cfg
        torch.manual_seed(cfg.seed)
        self.model = model if model is not None else build_model(cfg.kind,
                                                                 cfg.model)
        self.optimizer = torch.optim.Adam(
            self.model.parameters(), lr=0.0,
            betas=(cfg.adam_beta1, cfg.adam_beta2), eps=cfg.adam_eps)
        self.step = 0
        self.oracle_rng = random.Random(cfg.seed + 1)
        self.best_metric = None  # (top1_accuracy, -l2)

    @property
    def eps_oracle(self):
        return epsilon_oracle(self.step, self.cfg.model.anneal_rate,
                              self.cfg.model.anneal_threshold)

    def train_step(self, batch):
        """One forward/backward/update. Returns the step's metrics record."""
        cfg = self.cfg
        self.model.train()
        eps = self.eps_oracle if self.model.kind == "moel" else 0.0
        out = self.model(batch, oracle_eps=eps, oracle_rng=self.oracle_rng)
        loss, l1, l2 = self.model.losses(out, batch)
        if not torch.isfinite(loss):
            raise RuntimeError(
                f"non-finite loss at step {self.step}; "
                f"emotions={batch.emotions.tolist()} "
                f"ctx_ids[0]={batch.ctx_ids[0].tolist()}")
        lr = lr_schedule(self.step + 1, cfg.model.d_model, cfg.warmup,
                         cfg.lr_factor)
        for group in self.optimizer.param_groups:
            group["lr"] = lr
        self.optimizer.zero_grad()
        loss.backward()
        grad_norm = torch.nn.utils.clip_grad_norm_(self.model.parameters(),
                                                   cfg.grad_clip)
        self.optimizer.step()
        record = {"step": self.step, "L": loss.item(), "L1": l1.item(),
                  "L2": l2.item(), "grad_norm": grad_norm.item(),
                  "eps_oracle": eps, "lr": lr}
        self.step += 1
        return record

    def state_dict(self):
        return {
            "kind": self.model.kind,
            "config": self.cfg,
            "model": self.model.state_dict(),
            "optimizer": self.optimizer.state_dict(),
            "step": self.step,
            "oracle_rng": self.oracle_rng.getstate(),
            "torch_rng": torch.get_rng_state(),
            "best_metric": self.best_metric,
        }

    def load_state_dict(self, state):
        self.model.load_state_dict(state["model"])
        self.optimizer.load_state_dict(state["optimizer"])
        self.step = state["step"]
        self.oracle_rng.setstate(state["oracle_rng"])
        torch.set_rng_state(state["torch_rng"])
        self.best_metric = state["best_metric"]


def save_checkpoint(path, trainer):
    torch.save(trainer.state_dict(), path)


def load_checkpoint(path):
    """Rebuild a Trainer (model, optimizer, rng state) from a checkpoint."""
    state = torch.load(path, weights_only=False)
    trainer = Trainer(state["config"])
    trainer.load_state_dict(state)
    return trainer


def batches(samples, vocab, cfg, epoch):
    """Deterministic per-epoch shuffle and collation."""
    order = list(range(len(samples)))
    random.Random(cfg.seed * 1000003 + epoch).shuffle(order)
    for start in range(0, len(order), cfg.batch_size):
        chunk = [samples[i] for i in order[start:start + cfg.batch_size]]
        yield collate([encode_sample(s, vocab, cfg.model.max_ctx,
                                     cfg.model.max_resp) for s in chunk])


@torch.no_grad()
def evaluate(model, samples, vocab, cfg):
    """Validation metrics at batch size 1: gate/classifier top-1 emotion
    accuracy and generation loss (with perplexity)."""
    model.eval()
    correct, total = 0, 0
    l2_sum, tok_sum = 0.0, 0
    for s in samples:
        batch = collate([encode_sample(s, vocab, cfg.model.max_ctx,
                                       cfg.model.max_resp)])
        out = model(batch)
        if out.p is not None:
            correct += int(out.p[0].argmax().item() == s.emotion)
        total += 1
        _, _, l2 = model.losses(out, batch)
        n = batch.resp_mask.sum().item()
        l2_sum += l2.item() * n
        tok_sum += n
    mean_l2 = l2_sum / max(tok_sum, 1)
    return {"top1": correct / total if total else 0.0,
            "l2": mean_l2, "ppl": math.exp(min(mean_l2, 50.0)),
            "n": total}


def fit(cfg, train_samples, val_samples, resume=None, log_every=0):
    """Train for cfg.train_steps, validating each epoch and keeping the best
    checkpoint (highest top-1 accuracy, ties broken by lower generation
    loss). Returns (trainer, metrics_path, best_path)."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    vocab_path = os.path.join(cfg.out_dir, "vocab.txt")

    if resume is not None:
        trainer = load_checkpoint(resume)
        cfg = trainer.cfg
        from .corpus import Vocab
        vocab = Vocab.load(os.path.join(cfg.out_dir, "vocab.txt"))
    else:
        vocab = build_vocab(train_samples, cfg.min_freq)
        cfg.model.vocab_size = len(vocab)
        trainer = Trainer(cfg)
        if cfg.pretrained_vectors:
            trainer.model.embeddings.load_pretrained(cfg.pretrained_vectors,
                                                     vocab)
        vocab.save(vocab_path)

    metrics_path = os.path.join(cfg.out_dir, "metrics.jsonl")
    best_path = os.path.join(cfg.out_dir, "best.pt")
    last_path = os.path.join(cfg.out_dir, "last.pt")
    mode = "a" if resume is not None else "w"

    steps_per_epoch = max(1, math.ceil(len(train_samples) / cfg.batch_size))
    epoch = trainer.step // steps_per_epoch
    with open(metrics_path, mode, encoding="utf-8") as log:
        while trainer.step < cfg.train_steps:
            for batch in batches(train_samples, vocab, cfg, epoch):
                record = trainer.train_step(batch)
                log.write(json.dumps(record) + "\n")
                if log_every and record["step"] % log_every == 0:
                    print(f"step {record['step']}  L={record['L']:.4f} "
                          f"L1={record['L1']:.4f} L2={record['L2']:.4f}")
                if trainer.step >= cfg.train_steps:
                    break
            epoch += 1
            val = evaluate(trainer.model, val_samples, vocab, cfg)
            metric = (val["top1"], -val["l2"])
            if trainer.best_metric is None or metric > trainer.best_metric:
                trainer.best_metric = metric
                save_checkpoint(best_path, trainer)
            save_checkpoint(last_path, trainer)
    if not os.path.exists(best_path):
        save_checkpoint(best_path, trainer)
    return trainer, metrics_path, best_path
