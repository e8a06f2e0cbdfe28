"""Context encoder: transformer over the query-token-prefixed dialogue,
whose position-0 output doubles as the emotion/gating query."""

from dataclasses import dataclass

import torch
import torch.nn as nn

from .blocks import EncoderLayer
from .corpus import QRY


@dataclass
class EncoderOutput:
    H: torch.Tensor  # B x L_c x d_model
    q: torch.Tensor  # B x d_model, row 0 of H


class EmotionTracker(nn.Module):
    """Stack of encoder layers over the embedded context."""

    def __init__(self, config):
        super().__init__()
        self.layers = nn.ModuleList([
            EncoderLayer(config.d_model, config.n_heads, config.head_dim,
                         config.conv_filters, config.conv_width,
                         config.dropout)
            for _ in range(config.enc_layers)
        ])

    def forward(self, ctx_emb, ctx_mask, ctx_ids=None):
        if ctx_ids is not None and not (ctx_ids[:, 0] == QRY).all():
            raise ValueError("every context row must start with the query token")
        h = ctx_emb
        for layer in self.layers:
            h = layer(h, ctx_mask)
        return EncoderOutput(H=h, q=h[:, 0])

    def attention_weights(self):
        """Per-layer self-attention weights from the most recent forward."""
        return [layer.self_attn.last_weights for layer in self.layers]
