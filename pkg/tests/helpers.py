"""Shared test utilities: tiny configs, batch construction, and the
central-finite-difference gradient oracle."""

import random

import torch

from listenmix import corpus
from listenmix.config import ModelConfig


def tiny_config(**overrides):
    base = dict(n_emotions=3, d_model=8, n_heads=2, head_dim=4, enc_layers=1,
                trs_dec_layers=1, conv_filters=6, conv_width=3, vocab_size=20,
                max_ctx=8, max_resp=6, max_decode_len=6)
    base.update(overrides)
    return ModelConfig(**base).validate()


def random_batch(cfg, batch_size=4, ctx_len=6, resp_len=5, seed=0,
                 device=None):
    """Well-formed random batch: QRY-prefixed contexts, SOS/EOS responses."""
    rng = random.Random(seed)
    encoded = []
    for _ in range(batch_size):
        n_ctx = rng.randint(2, ctx_len - 1)
        n_resp = rng.randint(1, resp_len - 1)
        ctx = [corpus.QRY] + [rng.randrange(5, cfg.vocab_size)
                              for _ in range(n_ctx)]
        states = [corpus.STATE_QRY] + [rng.choice([corpus.STATE_SPK,
                                                   corpus.STATE_LIS])
                                       for _ in range(n_ctx)]
        resp = [rng.randrange(5, cfg.vocab_size) for _ in range(n_resp)]
        encoded.append(corpus.EncodedSample(
            ctx_ids=ctx, ctx_state_ids=states,
            resp_in=[corpus.SOS] + resp, resp_out=resp + [corpus.EOS],
            emotion=rng.randrange(cfg.n_emotions)))
    return corpus.collate(encoded, device=device)


def fd_gradient_check(loss_fn, params, n_samples=40, h=1e-4, seed=0):
    """Compare autograd gradients with central finite differences on
    randomly sampled parameter entries. Returns the worst relative error.

    loss_fn must recompute the scalar loss from the current parameter
    values; parameters must be float64.
    """
    params = [p for p in params if p.requires_grad]
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params)

    flat = [(p, g.reshape(-1), p.data.reshape(-1))
            for p, g in zip(params, grads)]
    total = sum(v.numel() for _, _, v in flat)
    rng = random.Random(seed)
    picks = rng.sample(range(total), min(n_samples, total))

    worst = 0.0
    for flat_idx in picks:
        offset = flat_idx
        for _, g, v in flat:
            if offset < v.numel():
                break
            offset -= v.numel()
        original = v[offset].item()
        with torch.no_grad():
            v[offset] = original + h
        loss_plus = loss_fn().item()
        with torch.no_grad():
            v[offset] = original - h
        loss_minus = loss_fn().item()
        with torch.no_grad():
            v[offset] = original
        fd = (loss_plus - loss_minus) / (2 * h)
        an = g[offset].item()
        err = abs(fd - an) / max(abs(fd), abs(an), 1e-6)
        worst = max(worst, err)
    return worst
