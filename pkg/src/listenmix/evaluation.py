"""Decoding and analysis: greedy generation, emotion top-k accuracy,
corpus BLEU, listener forcing, and emotion-distribution trace export."""

import math
from collections import Counter
from dataclasses import dataclass, field

import torch

from .corpus import EOS, SOS, collate, encode_sample


@dataclass
class AttentionTrace:
    """One analyzed context: the generated response, the emotion
    distribution that produced it, and optional attention maps."""

    context: str
    response: str
    p: list
    attention: list = field(default_factory=list)


def _context_text(sample):
    return " | ".join(f"{role.value}: {utt}" for role, utt in sample.turns)


@torch.no_grad()
def _decode_ids(model, sample, vocab, max_len, forced_p=None):
    """Greedy loop shared by plain decoding and listener forcing.
    Returns (token ids, pre-override gate distribution or None)."""
    cfg = model.config
    enc_batch = collate([encode_sample(sample, vocab, cfg.max_ctx,
                                       cfg.max_resp)])
    model.eval()
    enc = model.encode_context(enc_batch.ctx_ids, enc_batch.ctx_state_ids,
                               enc_batch.ctx_mask)
    p = model.bank.gate(enc.q) if hasattr(model, "bank") else None
    if forced_p is not None:
        p_used = forced_p.to(enc.H.dtype)
    else:
        p_used = p

    generated = []
    resp_in = torch.tensor([[SOS]], dtype=torch.long)
    for _ in range(max_len):
        dist = model.decode(enc, enc_batch.ctx_mask, resp_in, p_used)
        nxt = int(dist[0, -1].argmax().item())
        if nxt == EOS:
            break
        generated.append(nxt)
        resp_in = torch.cat(
            [resp_in, torch.tensor([[nxt]], dtype=torch.long)], dim=1)
    return generated, p


def greedy_decode(model, sample, vocab, max_len=30):
    """Deterministic argmax decoding from SOS until EOS or max_len."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    ids, _ = _decode_ids(model, sample, vocab, max_len)
    return vocab.decode(ids)


def force_listener(model, sample, vocab, target, max_len=30):
    """Decode with the gate overridden: target is either a listener index
    (one-hot routing) or a full mixture vector summing to 1. The shared
    listener keeps its fixed weight. Returns (tokens, AttentionTrace)."""
    n = model.config.n_emotions
    if isinstance(target, int):
        if not 0 <= target < n:
            raise IndexError(f"listener index {target} out of range")
        forced = torch.zeros(1, n)
        forced[0, target] = 1.0
    else:
        forced = torch.as_tensor(target, dtype=torch.float32).view(1, -1)
        if forced.shape[1] != n:
            raise ValueError("mixture vector length must equal n_emotions")
        if abs(float(forced.sum()) - 1.0) > 1e-5 or (forced < 0).any():
            raise ValueError("mixture vector must be a distribution")
    ids, _ = _decode_ids(model, sample, vocab, max_len, forced_p=forced)
    tokens = vocab.decode(ids)
    trace = AttentionTrace(context=_context_text(sample),
                           response=" ".join(tokens),
                           p=[float(v) for v in forced[0]])
    return tokens, trace


def trace_sample(model, sample, vocab, max_len=30, collect_attention=False):
    """Greedy decode plus the model's own emotion distribution."""
    ids, p = _decode_ids(model, sample, vocab, max_len)
    attention = []
    if collect_attention:
        attention = [w.squeeze(0).tolist()
                     for w in model.tracker.attention_weights()]
    return AttentionTrace(context=_context_text(sample),
                          response=" ".join(vocab.decode(ids)),
                          p=[float(v) for v in p[0]] if p is not None else [],
                          attention=attention)


def topk_accuracy(traces, k):
    """Fraction of (p, gold) pairs whose gold label sits among the k largest
    probabilities; ties broken in favor of the lower index."""
    items = list(traces)
    if not items:
        raise ValueError("topk_accuracy over an empty sequence")
    hits = 0
    for p, gold in items:
        if k > len(p):
            raise ValueError("k exceeds the number of emotions")
        # stable sort on (-prob, index) implements the tie rule
        order = sorted(range(len(p)), key=lambda i: (-p[i], i))
        hits += int(gold in order[:k])
    return hits / len(items)


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses, references, max_n=4):
    """Corpus-level BLEU-4 in [0, 100]: geometric mean of modified n-gram
    precisions with brevity penalty. Precisions for n >= 2 use add-one
    smoothing (1 is added to both the clipped match count and the total),
    so identical corpora score exactly 100."""
    if not hypotheses:
        raise ValueError("empty hypothesis set")
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis/reference counts differ")
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len, ref_len = 0, 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            hyp_counts = _ngrams(hyp, n)
            ref_counts = _ngrams(ref, n)
            matches[n - 1] += sum(min(c, ref_counts[g])
                                  for g, c in hyp_counts.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    log_precisions = []
    for n in range(1, max_n + 1):
        smooth = 1 if n >= 2 else 0
        num, den = matches[n - 1] + smooth, totals[n - 1] + smooth
        if num == 0 or den == 0:
            return 0.0
        log_precisions.append(math.log(num / den))
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / max(hyp_len, 1))
    return 100.0 * bp * math.exp(sum(log_precisions) / max_n)


def export_trace(trace, path, labels):
    """Write one trace as structured text: context, response, then one
    'emotion, probability' line per listener in label order."""
    if trace.p and len(trace.p) != len(labels):
        raise ValueError("trace distribution length does not match labels")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"context: {trace.context}\n")
        fh.write(f"response: {trace.response}\n")
        for name, prob in zip(labels, trace.p):
            fh.write(f"{name}, {prob:.8f}\n")


def parse_trace(path):
    """Round-trip reader for exported traces."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    context = lines[0].removeprefix("context: ")
    response = lines[1].removeprefix("response: ")
    p = []
    for line in lines[2:]:
        _, _, prob = line.rpartition(", ")
        p.append(float(prob))
    return AttentionTrace(context=context, response=response, p=p)
