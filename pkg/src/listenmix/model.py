"""Full models: the gated mixture-of-listeners architecture and the two
baseline configurations (plain seq2seq and multitask seq2seq), built from
the same blocks, plus parameter counting."""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import DecoderLayer
from .embedding import EmbeddingTables
from .encoder import EmotionTracker
from .listeners import ListenerBank, apply_oracle, emotion_loss
from .meta import MetaListener, OutputProjection, generation_loss, total_loss


@dataclass
class ModelOutput:
    dist: torch.Tensor          # B x L_r x |V| token distributions
    p: torch.Tensor | None      # B x n pre-oracle gate/classifier distribution
    p_used: torch.Tensor | None  # distribution actually used for fusion


class _SequenceModel(nn.Module):
    """Shared skeleton: embeddings + context encoder + output projection."""

    def __init__(self, config):
        super().__init__()
        if config.vocab_size <= 0:
            raise ValueError("config.vocab_size must be set before building")
        self.config = config
        self.embeddings = EmbeddingTables(config.vocab_size, config.d_model,
                                          config.scale_embedding,
                                          config.word_dropout)
        self.tracker = EmotionTracker(config)
        self.projection = OutputProjection(config.d_model, config.vocab_size)

    def encode_context(self, ctx_ids, ctx_state_ids, ctx_mask):
        emb = self.embeddings.context(ctx_ids, ctx_state_ids)
        return self.tracker(emb, ctx_mask, ctx_ids=ctx_ids)

    def losses(self, out, batch):
        l2 = generation_loss(out.dist, batch.resp_out, batch.resp_mask)
        if out.p is None:
            l1 = torch.zeros((), dtype=l2.dtype, device=l2.device)
        else:
            l1 = emotion_loss(out.p, batch.emotions)
        l = total_loss(l1, l2, self.config.alpha, self.config.beta) \
            if out.p is not None else l2
        return l, l1, l2


class MixtureModel(_SequenceModel):
    """Encoder + shared/per-emotion listener bank + meta decoder."""

    kind = "moel"

    def __init__(self, config):
        super().__init__(config)
        self.bank = ListenerBank(config)
        self.meta = MetaListener(config)

    def decode(self, enc, ctx_mask, resp_in, p):
        resp_emb = self.embeddings.response(resp_in)
        v_mixed = self.bank(enc.H, ctx_mask, resp_emb, p)
        o = self.meta(enc.H, ctx_mask, v_mixed)
        return self.projection(o)

    def forward(self, batch, oracle_eps=0.0, oracle_rng=None, forced_p=None):
        """Full pass. forced_p overrides the gate (hard-routing analysis);
        oracle_eps > 0 enables per-row gold substitution during training."""
        enc = self.encode_context(batch.ctx_ids, batch.ctx_state_ids,
                                  batch.ctx_mask)
        p = self.bank.gate(enc.q)
        if forced_p is not None:
            p_used = forced_p
        elif oracle_eps > 0.0:
            p_used = apply_oracle(p, batch.emotions, oracle_eps, oracle_rng)
        else:
            p_used = p
        dist = self.decode(enc, batch.ctx_mask, batch.resp_in, p_used)
        return ModelOutput(dist=dist, p=p, p_used=p_used)


class Seq2SeqModel(_SequenceModel):
    """Plain transformer encoder-decoder trained on generation loss only."""

    kind = "trs"

    def __init__(self, config):
        super().__init__(config)
        self.decoder = nn.ModuleList([
            DecoderLayer(config.d_model, config.n_heads, config.head_dim,
                         config.conv_filters, config.conv_width,
                         config.dropout)
            for _ in range(config.trs_dec_layers)
        ])

    def decode(self, enc, ctx_mask, resp_in, p=None):
        x = self.embeddings.response(resp_in)
        for block in self.decoder:
            x = block(x, enc.H, ctx_mask)
        return self.projection(x)

    def forward(self, batch, oracle_eps=0.0, oracle_rng=None, forced_p=None):
        enc = self.encode_context(batch.ctx_ids, batch.ctx_state_ids,
                                  batch.ctx_mask)
        dist = self.decode(enc, batch.ctx_mask, batch.resp_in)
        return ModelOutput(dist=dist, p=None, p_used=None)


class MultitaskModel(Seq2SeqModel):
    """Seq2seq plus a linear emotion classifier on the encoder query,
    trained jointly on classification and generation losses."""

    kind = "multi_trs"

    def __init__(self, config):
        super().__init__(config)
        self.classifier = nn.Linear(config.d_model, config.n_emotions)
        nn.init.xavier_uniform_(self.classifier.weight)
        nn.init.zeros_(self.classifier.bias)

    def forward(self, batch, oracle_eps=0.0, oracle_rng=None, forced_p=None):
        enc = self.encode_context(batch.ctx_ids, batch.ctx_state_ids,
                                  batch.ctx_mask)
        p = F.softmax(self.classifier(enc.q), dim=-1)
        dist = self.decode(enc, batch.ctx_mask, batch.resp_in)
        return ModelOutput(dist=dist, p=p, p_used=None)


_KINDS = {cls.kind: cls for cls in (Seq2SeqModel, MultitaskModel, MixtureModel)}


def build_model(kind, config):
    try:
        cls = _KINDS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; "
                         f"expected one of {sorted(_KINDS)}") from None
    return cls(config.validate())


def count_params(model):
    """Number of trainable scalar parameters."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def param_breakdown(model):
    """Per-top-level-component trainable parameter counts."""
    counts = {}
    for name, child in model.named_children():
        counts[name] = sum(p.numel() for p in child.parameters()
                           if p.requires_grad)
    for name, p in model.named_parameters(recurse=False):
        if p.requires_grad:
            counts[name] = p.numel()
    return counts


def param_report(model):
    lines = [f"{model.kind}  total={count_params(model):,}"]
    for name, count in param_breakdown(model).items():
        lines.append(f"  {name:<12} {count:>12,}")
    return "\n".join(lines)
