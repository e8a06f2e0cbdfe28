"""Final fusion decoder over the mixed listener output, the vocabulary
projection, and the training losses."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import DecoderLayer
from .listeners import PROB_FLOOR


class MetaListener(nn.Module):
    """One decoder block whose causal self-attention runs over the fused
    listener representation (which plays the role of the response stream),
    with cross-attention into the encoder output."""

    def __init__(self, config):
        super().__init__()
        self.block = DecoderLayer(config.d_model, config.n_heads,
                                  config.head_dim, config.conv_filters,
                                  config.conv_width, config.dropout)

    def forward(self, H, ctx_mask, v_mixed):
        return self.block(v_mixed, H, ctx_mask)


class OutputProjection(nn.Module):
    """Affine map to vocabulary logits, untied from the embedding table."""

    def __init__(self, d_model, vocab_size):
        super().__init__()
        self.linear = nn.Linear(d_model, vocab_size)
        nn.init.xavier_uniform_(self.linear.weight)
        nn.init.zeros_(self.linear.bias)

    def logits(self, o):
        return self.linear(o)

    def forward(self, o):
        """Per-position distribution over the vocabulary."""
        return F.softmax(self.linear(o), dim=-1)


def generation_loss(dist, resp_out, resp_mask):
    """Token-level negative log likelihood of the reference response, summed
    over unmasked positions and divided by the unmasked token count."""
    n_tokens = resp_mask.sum()
    if n_tokens == 0:
        raise ValueError("generation loss over an all-masked batch")
    gold = dist.gather(2, resp_out.unsqueeze(-1)).squeeze(-1)
    nll = -torch.log(gold.clamp_min(PROB_FLOOR))
    return (nll * resp_mask.to(nll.dtype)).sum() / n_tokens


def total_loss(l1, l2, alpha, beta):
    if alpha < 0 or beta < 0:
        raise ValueError("loss weights must be nonnegative")
    return alpha * l1 + beta * l2
