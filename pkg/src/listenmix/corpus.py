"""Dialogue corpus handling: loading, vocabulary, encoding, batching,
and a deterministic synthetic corpus generator."""

import json
import logging
import os
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import torch

from .config import DEFAULT_EMOTIONS

logger = logging.getLogger(__name__)


class SchemaError(ValueError):
    pass


class Role(Enum):
    SPEAKER = "speaker"
    LISTENER = "listener"


# Reserved vocabulary entries. QRY is the classification query token
# prepended to every flattened context.
PAD, UNK, SOS, EOS, QRY = 0, 1, 2, 3, 4
RESERVED_TOKENS = ["<pad>", "<unk>", "<sos>", "<eos>", "<qry>"]

# Dialogue-state ids: speaker tokens, listener tokens, and the query slot.
STATE_SPK, STATE_LIS, STATE_QRY = 0, 1, 2

# Incremented whenever encode_sample has to drop tokens.
TRUNCATION_COUNTER = Counter()


def tokenize(text):
    return text.lower().split()


@dataclass
class DialogueSample:
    """One training example: context turns, conversation emotion, and the
    listener utterance to generate."""

    turns: list            # list of (Role, utterance string)
    emotion: int
    target: str

    def validate(self, n_emotions):
        if not self.turns:
            raise SchemaError("sample has no context turns")
        if self.turns[0][0] is not Role.SPEAKER:
            raise SchemaError("first context turn must be the speaker")
        if not (0 <= self.emotion < n_emotions):
            raise SchemaError(f"emotion label {self.emotion} out of range")
        if not self.target.strip():
            raise SchemaError("empty target utterance")
        return self


class Vocab:
    """Token <-> id mapping with fixed reserved ids."""

    def __init__(self, tokens=()):
        self.id_to_token = list(RESERVED_TOKENS)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        for tok in tokens:
            self.add(tok)

    def add(self, token):
        if token not in self.token_to_id:
            self.token_to_id[token] = len(self.id_to_token)
            self.id_to_token.append(token)

    def __len__(self):
        return len(self.id_to_token)

    def encode(self, tokens):
        return [self.token_to_id.get(t, UNK) for t in tokens]

    def decode(self, ids):
        return [self.id_to_token[i] for i in ids]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self.id_to_token:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        if tokens[: len(RESERVED_TOKENS)] != RESERVED_TOKENS:
            raise SchemaError(f"vocab file {path} lacks the reserved prefix")
        return cls(tokens[len(RESERVED_TOKENS):])


def build_vocab(samples, min_freq=1):
    """Vocabulary over all context and target tokens with frequency >= min_freq."""
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    freq = Counter()
    for s in samples:
        for _, utt in s.turns:
            freq.update(tokenize(utt))
        freq.update(tokenize(s.target))
    vocab = Vocab()
    for tok in sorted(freq):
        if freq[tok] >= min_freq:
            vocab.add(tok)
    return vocab


def load_dataset(path, split=None, labels=None):
    """Load dialogue samples from a JSON-lines file.

    Each record carries conv_id, turn_index, role, utterance, emotion_label.
    If ``path`` is a directory, ``<split>.jsonl`` inside it is read. Every
    context prefix that ends in a listener turn becomes one sample whose
    target is that listener utterance. Conversations without any listener
    turn are skipped with a warning.
    """
    labels = list(labels) if labels is not None else DEFAULT_EMOTIONS
    label_to_id = {name: i for i, name in enumerate(labels)}
    if os.path.isdir(path):
        path = os.path.join(path, f"{split}.jsonl")
    if not os.path.exists(path):
        raise FileNotFoundError(path)

    conversations = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                conv_id = rec["conv_id"]
                turn_index = int(rec["turn_index"])
                role = Role(rec["role"])
                utterance = rec["utterance"]
                label = rec["emotion_label"]
            except (KeyError, ValueError, TypeError) as exc:
                raise SchemaError(f"{path}:{lineno}: malformed record ({exc})")
            if label not in label_to_id:
                raise SchemaError(
                    f"{path}:{lineno}: unknown emotion label {label!r}")
            conversations.setdefault(conv_id, []).append(
                (turn_index, role, utterance, label_to_id[label]))

    samples = []
    skipped = 0
    for conv_id in conversations:
        turns = sorted(conversations[conv_id], key=lambda t: t[0])
        emotion = turns[0][3]
        flat = [(role, utt) for _, role, utt, _ in turns]
        had_listener = False
        for i, (role, utt) in enumerate(flat):
            if role is Role.LISTENER and i > 0:
                had_listener = True
                samples.append(DialogueSample(
                    turns=list(flat[:i]), emotion=emotion, target=utt))
        if not had_listener:
            skipped += 1
    if skipped:
        logger.warning("skipped %d conversation(s) without a listener turn",
                       skipped)
    return samples


@dataclass
class EncodedSample:
    ctx_ids: list
    ctx_state_ids: list
    resp_in: list
    resp_out: list
    emotion: int


def encode_sample(sample, vocab, max_ctx, max_resp):
    """Flatten context turns behind a leading QRY token and id-encode both
    sides. Over-long contexts lose their oldest tokens; over-long responses
    are cut on the right."""
    if max_ctx < 2:
        raise ValueError("max_ctx must be >= 2")
    ctx_ids, state_ids = [], []
    for role, utt in sample.turns:
        toks = tokenize(utt)
        state = STATE_SPK if role is Role.SPEAKER else STATE_LIS
        ctx_ids.extend(vocab.encode(toks))
        state_ids.extend([state] * len(toks))
    if len(ctx_ids) > max_ctx - 1:
        TRUNCATION_COUNTER["ctx"] += 1
        ctx_ids = ctx_ids[-(max_ctx - 1):]
        state_ids = state_ids[-(max_ctx - 1):]
    ctx_ids = [QRY] + ctx_ids
    state_ids = [STATE_QRY] + state_ids

    resp = vocab.encode(tokenize(sample.target))
    if len(resp) > max_resp - 1:
        TRUNCATION_COUNTER["resp"] += 1
        resp = resp[: max_resp - 1]
    return EncodedSample(
        ctx_ids=ctx_ids,
        ctx_state_ids=state_ids,
        resp_in=[SOS] + resp,
        resp_out=resp + [EOS],
        emotion=sample.emotion,
    )


@dataclass
class Batch:
    ctx_ids: torch.Tensor        # B x L_c
    ctx_state_ids: torch.Tensor  # B x L_c
    ctx_mask: torch.Tensor       # B x L_c bool, True = real token
    resp_in: torch.Tensor        # B x L_r
    resp_out: torch.Tensor       # B x L_r
    resp_mask: torch.Tensor      # B x L_r bool
    emotions: torch.Tensor       # B

    def __len__(self):
        return self.ctx_ids.shape[0]


def collate(encoded, device=None):
    """Right-pad encoded samples into one Batch."""
    if not encoded:
        raise ValueError("cannot collate an empty batch")
    lc = max(len(e.ctx_ids) for e in encoded)
    lr = max(len(e.resp_in) for e in encoded)

    def pad_rows(rows, length, fill=PAD):
        return torch.tensor([row + [fill] * (length - len(row)) for row in rows],
                            dtype=torch.long, device=device)

    ctx_ids = pad_rows([e.ctx_ids for e in encoded], lc)
    state_ids = pad_rows([e.ctx_state_ids for e in encoded], lc, fill=STATE_SPK)
    resp_in = pad_rows([e.resp_in for e in encoded], lr)
    resp_out = pad_rows([e.resp_out for e in encoded], lr)
    ctx_mask = torch.zeros(len(encoded), lc, dtype=torch.bool, device=device)
    resp_mask = torch.zeros(len(encoded), lr, dtype=torch.bool, device=device)
    for i, e in enumerate(encoded):
        ctx_mask[i, : len(e.ctx_ids)] = True
        resp_mask[i, : len(e.resp_out)] = True
    emotions = torch.tensor([e.emotion for e in encoded], dtype=torch.long,
                            device=device)
    return Batch(ctx_ids, state_ids, ctx_mask, resp_in, resp_out, resp_mask,
                 emotions)


def make_batch(samples, vocab, max_ctx, max_resp, device=None):
    return collate([encode_sample(s, vocab, max_ctx, max_resp)
                    for s in samples], device=device)


_FILLER = ["i", "am", "so", "it", "was", "really", "very", "today",
           "then", "again", "that", "much"]
_ACKS = ["i see", "tell me more", "go on", "oh really"]


def style_marker(label):
    """The response token that betrays which listener style produced it."""
    return f"style_{label}"


def synthetic_labels(n_emotions):
    return DEFAULT_EMOTIONS[:n_emotions]


def gen_synthetic(n_emotions, n_samples, seed, labels=None):
    """Deterministic toy corpus: speaker wording is drawn from an
    emotion-specific template vocabulary and each target response opens with
    that emotion's style marker, so the label is inferable from the context
    and the response style is inferable from the label."""
    if n_emotions < 2:
        raise ValueError("n_emotions must be >= 2")
    labels = list(labels) if labels is not None else synthetic_labels(n_emotions)
    if len(labels) < n_emotions:
        raise ValueError("not enough label names for n_emotions")
    rng = random.Random(seed)
    emo_words = {k: [f"{labels[k]}w{j}" for j in range(6)]
                 for k in range(n_emotions)}

    samples = []
    for _ in range(n_samples):
        k = rng.randrange(n_emotions)

        def speaker_utt():
            words = rng.sample(emo_words[k], rng.randint(2, 4))
            words += rng.sample(_FILLER, rng.randint(1, 3))
            rng.shuffle(words)
            return " ".join(words)

        turns = [(Role.SPEAKER, speaker_utt())]
        if rng.random() < 0.3:
            turns.append((Role.LISTENER, rng.choice(_ACKS)))
            turns.append((Role.SPEAKER, speaker_utt()))
        target = " ".join([style_marker(labels[k])]
                          + rng.sample(_FILLER, rng.randint(1, 2)))
        samples.append(DialogueSample(turns=turns, emotion=k, target=target))
    return samples


def save_dataset(samples, path, labels=None):
    """Write samples back out in the line-delimited record schema.

    Each sample becomes one synthetic conversation: its context turns
    followed by the target as the final listener turn.
    """
    labels = list(labels) if labels is not None else DEFAULT_EMOTIONS
    with open(path, "w", encoding="utf-8") as fh:
        for i, s in enumerate(samples):
            turns = list(s.turns) + [(Role.LISTENER, s.target)]
            for j, (role, utt) in enumerate(turns):
                rec = {"conv_id": f"c{i}", "turn_index": j,
                       "role": role.value, "utterance": utt,
                       "emotion_label": labels[s.emotion]}
                fh.write(json.dumps(rec) + "\n")
