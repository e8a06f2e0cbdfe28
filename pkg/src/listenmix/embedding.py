"""Token embeddings: word + sinusoidal position (+ dialogue state on the
context side)."""

import math

import torch
import torch.nn as nn

from .config import ConfigError
from .corpus import PAD


def positional_encoding(length, dim, dtype=torch.float32, device=None):
    """Sinusoidal position table: entry (pos, 2i) = sin(pos / 10000^(2i/dim)),
    entry (pos, 2i+1) = cos of the same argument."""
    if dim % 2 != 0:
        raise ConfigError("positional encoding dimension must be even")
    pos = torch.arange(length, dtype=dtype, device=device).unsqueeze(1)
    i = torch.arange(dim // 2, dtype=dtype, device=device)
    angle = pos / torch.pow(torch.tensor(10000.0, dtype=dtype, device=device),
                            2 * i / dim)
    table = torch.zeros(length, dim, dtype=dtype, device=device)
    table[:, 0::2] = torch.sin(angle)
    table[:, 1::2] = torch.cos(angle)
    return table


N_DIALOGUE_STATES = 3


class EmbeddingTables(nn.Module):
    """Word table shared by context and response sides, plus the 3-row
    dialogue-state table. The PAD word row stays zero and receives no
    gradient."""

    def __init__(self, vocab_size, d_model, scale_embedding=False,
                 word_dropout=0.0):
        super().__init__()
        self.d_model = d_model
        self.scale = math.sqrt(d_model) if scale_embedding else 1.0
        self.word_dropout = word_dropout
        self.word = nn.Embedding(vocab_size, d_model, padding_idx=PAD)
        self.dialogue_state = nn.Embedding(N_DIALOGUE_STATES, d_model)
        nn.init.normal_(self.word.weight, std=0.02)
        nn.init.normal_(self.dialogue_state.weight, std=0.02)
        with torch.no_grad():
            self.word.weight[PAD].zero_()

    def _positions(self, length, like):
        return positional_encoding(length, self.d_model,
                                   dtype=like.dtype, device=like.device)

    def context(self, ctx_ids, ctx_state_ids):
        """E^W + E^P + E^D, summed positionwise. During training, whole-token
        word dropout zeroes the word component of random context positions
        (position and state terms are kept)."""
        w = self.word(ctx_ids) * self.scale
        if self.training and self.word_dropout > 0.0:
            keep = (torch.rand(ctx_ids.shape, device=w.device)
                    >= self.word_dropout)
            w = w * keep.unsqueeze(-1).to(w.dtype)
        return (w + self._positions(ctx_ids.shape[1], w)
                + self.dialogue_state(ctx_state_ids))

    def response(self, resp_ids):
        """E^W + E^P; the response side is single-role, so no state term."""
        w = self.word(resp_ids) * self.scale
        return w + self._positions(resp_ids.shape[1], w)

    @torch.no_grad()
    def load_pretrained(self, path, vocab):
        """Initialize word rows from a text file of ``token v1 .. vd`` lines.
        Tokens absent from the file keep their random init."""
        found = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.rstrip().split(" ")
                if len(parts) != self.d_model + 1:
                    continue
                idx = vocab.token_to_id.get(parts[0])
                if idx is not None and idx != PAD:
                    self.word.weight[idx] = torch.tensor(
                        [float(v) for v in parts[1:]],
                        dtype=self.word.weight.dtype)
                    found += 1
        return found
