"""The listener bank: a shared decoder block plus one decoder block per
emotion, key-vector gating over them, the emotion loss, and the annealed
oracle substitution used early in training."""

import torch
import torch.nn as nn

from .blocks import DecoderLayer

PROB_FLOOR = 1e-12


def gate(q, keys):
    """Row-wise softmax of q . keys^T (one key per emotion listener),
    computed with max-subtraction. Returns a B x n probability matrix."""
    if not torch.isfinite(q).all():
        raise ValueError("non-finite entries in gating query")
    logits = q @ keys.t()
    logits = logits - logits.max(dim=-1, keepdim=True).values
    exp = torch.exp(logits)
    return exp / exp.sum(dim=-1, keepdim=True)


def combine(v_shared, v_emotion, p):
    """Weighted fusion: shared output with fixed coefficient 1 plus the
    p-weighted sum of the emotion listener outputs, accumulated in listener
    index order for reproducibility."""
    if len(v_emotion) != p.shape[1]:
        raise ValueError("one probability per emotion listener required")
    out = v_shared
    for i, v in enumerate(v_emotion):
        out = out + p[:, i].view(-1, 1, 1) * v
    return out


def emotion_loss(p, emotions):
    """Mean over the batch of -log p at the gold label (computed on the
    pre-oracle distribution)."""
    gold = p.gather(1, emotions.view(-1, 1)).squeeze(1)
    return -torch.log(gold.clamp_min(PROB_FLOOR)).mean()


def apply_oracle(p, emotions, eps, rng):
    """With probability eps, independently per batch row, replace the gate
    distribution by the gold one-hot. Replacements are constants: no
    gradient flows back through them. rng is a random.Random instance."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("oracle probability must lie in [0, 1]")
    if eps == 0.0:
        return p
    replace = torch.tensor([rng.random() < eps for _ in range(p.shape[0])],
                           device=p.device)
    onehot = torch.zeros_like(p)
    onehot.scatter_(1, emotions.view(-1, 1), 1.0)
    return torch.where(replace.view(-1, 1), onehot.detach(), p)


class ListenerBank(nn.Module):
    """n+1 independently parameterized decoder blocks (index 0 shared) and
    the n learned key vectors addressed by the encoder query."""

    def __init__(self, config):
        super().__init__()
        self.n = config.n_emotions
        self.decoders = nn.ModuleList([
            DecoderLayer(config.d_model, config.n_heads, config.head_dim,
                         config.conv_filters, config.conv_width,
                         config.dropout)
            for _ in range(self.n + 1)
        ])
        self.keys = nn.Parameter(torch.empty(self.n, config.d_model))
        nn.init.xavier_uniform_(self.keys)

    def gate(self, q):
        return gate(q, self.keys)

    def listener_forward(self, i, H, ctx_mask, resp_embedded):
        if not 0 <= i <= self.n:
            raise IndexError(f"listener index {i} out of range [0, {self.n}]")
        return self.decoders[i](resp_embedded, H, ctx_mask)

    def forward(self, H, ctx_mask, resp_embedded, p):
        """Run every listener and fuse with the given gate distribution."""
        outputs = [dec(resp_embedded, H, ctx_mask) for dec in self.decoders]
        return combine(outputs[0], outputs[1:], p)
