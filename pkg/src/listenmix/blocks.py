"""Transformer building blocks shared by the encoder and all decoder
listeners: multi-head attention and the convolutional feed-forward sublayer."""

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


class MultiHeadAttention(nn.Module):
    """Multi-head scaled dot-product attention.

    Per-head projections map d_model -> head_dim; the concatenated
    n_heads * head_dim output is projected back to d_model (head_dim is a
    free hyperparameter, not tied to d_model / n_heads).
    """

    def __init__(self, d_model, n_heads, head_dim, dropout=0.0):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = head_dim
        inner = n_heads * head_dim
        self.q_proj = nn.Linear(d_model, inner)
        self.k_proj = nn.Linear(d_model, inner)
        self.v_proj = nn.Linear(d_model, inner)
        self.out_proj = nn.Linear(inner, d_model)
        self.dropout = nn.Dropout(dropout)
        for lin in (self.q_proj, self.k_proj, self.v_proj, self.out_proj):
            nn.init.xavier_uniform_(lin.weight)
            nn.init.zeros_(lin.bias)
        self.last_weights = None

    def _split(self, x):
        b, l, _ = x.shape
        return x.view(b, l, self.n_heads, self.head_dim).transpose(1, 2)

    def forward(self, query, key, value, mask=None):
        """mask: bool tensor broadcastable to B x Lq x Lk, True = may attend.
        Masked logits are set to -inf before the softmax."""
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(key))
        v = self._split(self.v_proj(value))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if mask is not None:
            if mask.dim() == 2:  # shared Lq x Lk mask (e.g. causal)
                mask = mask.unsqueeze(0)
            scores = scores.masked_fill(~mask.unsqueeze(1), float("-inf"))
        weights = F.softmax(scores, dim=-1)
        # Rows with every key masked softmax to NaN; those rows are never
        # read downstream, but keep them finite.
        weights = torch.nan_to_num(weights, nan=0.0)
        self.last_weights = weights.detach()
        out = self.dropout(weights) @ v
        b, _, lq, _ = out.shape
        out = out.transpose(1, 2).reshape(b, lq, self.n_heads * self.head_dim)
        return self.out_proj(out)


class ConvFeedForward(nn.Module):
    """Feed-forward sublayer realized as a width-w 1-D convolution stack:
    conv(d_model -> filters) -> ReLU -> conv(filters -> d_model).

    With causal=True both convolutions pad on the left only, so position t
    never reads positions > t.
    """

    def __init__(self, d_model, filters, width, causal=False):
        super().__init__()
        self.width = width
        self.causal = causal
        self.conv1 = nn.Conv1d(d_model, filters, width)
        self.conv2 = nn.Conv1d(filters, d_model, width)
        for conv in (self.conv1, self.conv2):
            nn.init.xavier_uniform_(conv.weight)
            nn.init.zeros_(conv.bias)

    def _pad(self, x):
        if self.causal:
            return F.pad(x, (self.width - 1, 0))
        left = (self.width - 1) // 2
        return F.pad(x, (left, self.width - 1 - left))

    def forward(self, x, pad_mask=None):
        """pad_mask (B x L bool, True = real): padded positions are zeroed
        at the input and between the convolutions, so they behave exactly
        like the zero padding beyond the sequence edge."""
        if pad_mask is not None:
            x = x * pad_mask.unsqueeze(-1).to(x.dtype)
        h = x.transpose(1, 2)
        h = F.relu(self.conv1(self._pad(h)))
        if pad_mask is not None:
            h = h * pad_mask.unsqueeze(1).to(h.dtype)
        h = self.conv2(self._pad(h))
        return h.transpose(1, 2)


def causal_mask(length, device=None):
    """L x L boolean lower-triangular mask (True = may attend)."""
    return torch.ones(length, length, dtype=torch.bool,
                      device=device).tril_()


class EncoderLayer(nn.Module):
    """Self-attention + conv feed-forward with residuals and post-layernorm.

    Padded positions are zeroed before the convolution so that appending
    extra padding never perturbs real positions.
    """

    def __init__(self, d_model, n_heads, head_dim, filters, width,
                 dropout=0.0):
        super().__init__()
        self.self_attn = MultiHeadAttention(d_model, n_heads, head_dim,
                                            dropout)
        self.norm1 = nn.LayerNorm(d_model)
        self.ffn = ConvFeedForward(d_model, filters, width, causal=False)
        self.norm2 = nn.LayerNorm(d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, pad_mask):
        attn_mask = pad_mask.unsqueeze(1)  # B x 1 x L, broadcast over queries
        x = self.norm1(x + self.dropout(self.self_attn(x, x, x, attn_mask)))
        return self.norm2(x + self.dropout(self.ffn(x, pad_mask)))


class DecoderLayer(nn.Module):
    """One listener block: causal self-attention over the response stream,
    cross-attention into the encoder output, and a causal conv feed-forward."""

    def __init__(self, d_model, n_heads, head_dim, filters, width,
                 dropout=0.0):
        super().__init__()
        self.self_attn = MultiHeadAttention(d_model, n_heads, head_dim,
                                            dropout)
        self.norm1 = nn.LayerNorm(d_model)
        self.cross_attn = MultiHeadAttention(d_model, n_heads, head_dim,
                                             dropout)
        self.norm2 = nn.LayerNorm(d_model)
        self.ffn = ConvFeedForward(d_model, filters, width, causal=True)
        self.norm3 = nn.LayerNorm(d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, memory, memory_mask):
        l = x.shape[1]
        x = self.norm1(x + self.dropout(self.self_attn(
            x, x, x, causal_mask(l, device=x.device))))
        x = self.norm2(x + self.dropout(self.cross_attn(
            x, memory, memory, memory_mask.unsqueeze(1))))
        return self.norm3(x + self.dropout(self.ffn(x)))
