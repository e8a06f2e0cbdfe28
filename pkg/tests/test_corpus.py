import json
import logging

import pytest
from hypothesis import given, strategies as st

from listenmix import corpus
from listenmix.corpus import (EOS, PAD, QRY, SOS, STATE_LIS, STATE_QRY,
                              STATE_SPK, DialogueSample, Role, SchemaError,
                              Vocab, build_vocab, collate, encode_sample,
                              gen_synthetic, load_dataset, save_dataset,
                              style_marker, synthetic_labels, tokenize)

LABELS = ["happy", "sad", "angry", "calm"]


def write_conv(path, turns, label="happy", conv_id="c0"):
    with open(path, "a", encoding="utf-8") as fh:
        for i, (role, utt) in enumerate(turns):
            fh.write(json.dumps({"conv_id": conv_id, "turn_index": i,
                                 "role": role, "utterance": utt,
                                 "emotion_label": label}) + "\n")


class TestLoadDataset:
    def test_four_turn_conversation_yields_two_samples(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_conv(path, [("speaker", "a"), ("listener", "b"),
                          ("speaker", "c"), ("listener", "d")])
        samples = load_dataset(path, labels=LABELS)
        assert len(samples) == 2
        assert [len(s.turns) for s in samples] == [1, 3]
        assert samples[0].target == "b"
        assert samples[1].target == "d"
        assert all(s.emotion == 0 for s in samples)

    def test_empty_file(self, tmp_path, caplog):
        path = tmp_path / "d.jsonl"
        path.write_text("")
        with caplog.at_level(logging.WARNING):
            assert load_dataset(path, labels=LABELS) == []
        assert not caplog.records

    def test_unknown_emotion_label(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_conv(path, [("speaker", "a"), ("listener", "b")],
                   label="furious")
        with pytest.raises(SchemaError, match="furious"):
            load_dataset(path, labels=LABELS)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "nope.jsonl", labels=LABELS)

    def test_no_listener_conversation_skipped(self, tmp_path, caplog):
        path = tmp_path / "d.jsonl"
        write_conv(path, [("speaker", "a"), ("speaker", "b")], conv_id="c0")
        write_conv(path, [("speaker", "a"), ("listener", "b")], conv_id="c1")
        with caplog.at_level(logging.WARNING):
            samples = load_dataset(path, labels=LABELS)
        assert len(samples) == 1
        assert any("skipped 1" in r.getMessage() for r in caplog.records)

    def test_directory_with_split(self, tmp_path):
        write_conv(tmp_path / "train.jsonl",
                   [("speaker", "a"), ("listener", "b")])
        assert len(load_dataset(tmp_path, split="train", labels=LABELS)) == 1


class TestVocab:
    def test_min_freq_filters(self):
        samples = [DialogueSample([(Role.SPEAKER, "a a b")], 0, "a")]
        vocab = build_vocab(samples, min_freq=2)
        assert "a" in vocab.token_to_id
        assert "b" not in vocab.token_to_id

    def test_empty_corpus_reserved_only(self):
        assert len(build_vocab([], min_freq=1)) == 5

    def test_min_freq_one_counts_distinct(self):
        samples = [DialogueSample([(Role.SPEAKER, "x y z")], 0, "w v")]
        assert len(build_vocab(samples, min_freq=1)) == 5 + 5

    def test_save_load_roundtrip(self, tmp_path):
        vocab = build_vocab(
            [DialogueSample([(Role.SPEAKER, "hello there")], 0, "hi")], 1)
        vocab.save(tmp_path / "v.txt")
        loaded = Vocab.load(tmp_path / "v.txt")
        assert loaded.id_to_token == vocab.id_to_token
        assert loaded.token_to_id == vocab.token_to_id

    @given(st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=12))
    def test_encode_decode_roundtrip(self, tokens):
        vocab = Vocab(sorted(set("abcdefg")))
        assert vocab.decode(vocab.encode(tokens)) == tokens


class TestEncodeSample:
    def make_vocab(self):
        return Vocab(["hi", "hello", "ok"])

    def test_basic_layout(self):
        vocab = self.make_vocab()
        s = DialogueSample([(Role.SPEAKER, "hi"), (Role.LISTENER, "hello")],
                           0, "ok")
        e = encode_sample(s, vocab, max_ctx=8, max_resp=8)
        hi, hello, ok = (vocab.token_to_id[t] for t in ("hi", "hello", "ok"))
        assert e.ctx_ids == [QRY, hi, hello]
        assert e.ctx_state_ids == [STATE_QRY, STATE_SPK, STATE_LIS]
        assert e.resp_in == [SOS, ok]
        assert e.resp_out == [ok, EOS]

    def test_left_truncation_keeps_qry(self):
        vocab = self.make_vocab()
        s = DialogueSample([(Role.SPEAKER, "hi " * 10)], 0, "ok")
        e = encode_sample(s, vocab, max_ctx=4, max_resp=8)
        assert len(e.ctx_ids) == 4
        assert e.ctx_ids[0] == QRY
        assert all(i == vocab.token_to_id["hi"] for i in e.ctx_ids[1:])

    def test_unknown_token_maps_to_unk(self):
        vocab = self.make_vocab()
        s = DialogueSample([(Role.SPEAKER, "zebra")], 0, "ok")
        e = encode_sample(s, vocab, max_ctx=8, max_resp=8)
        assert e.ctx_ids[1] == corpus.UNK

    def test_response_right_truncation(self):
        vocab = self.make_vocab()
        s = DialogueSample([(Role.SPEAKER, "hi")], 0, "ok " * 10)
        e = encode_sample(s, vocab, max_ctx=8, max_resp=4)
        assert len(e.resp_in) == 4 and len(e.resp_out) == 4
        assert e.resp_in[0] == SOS


class TestCollate:
    def encoded(self, seed=0):
        samples = gen_synthetic(3, 6, seed)
        vocab = build_vocab(samples)
        return [encode_sample(s, vocab, 16, 8) for s in samples]

    def test_mask_marks_non_pad_prefix(self):
        batch = collate(self.encoded())
        for row in range(len(batch)):
            n = int(batch.ctx_mask[row].sum())
            assert batch.ctx_mask[row, :n].all()
            assert not batch.ctx_mask[row, n:].any()
            assert (batch.ctx_ids[row, n:] == PAD).all()
        assert batch.ctx_mask[:, 0].all()   # QRY never masked
        assert (batch.ctx_ids[:, 0] == QRY).all()

    def test_permutation_equivariance(self):
        enc = self.encoded()
        perm = [2, 0, 4, 1, 5, 3]
        a = collate(enc)
        b = collate([enc[i] for i in perm])
        for i, j in enumerate(perm):
            assert (b.ctx_ids[i] == a.ctx_ids[j]).all()
            assert (b.resp_out[i] == a.resp_out[j]).all()
            assert b.emotions[i] == a.emotions[j]

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            collate([])


class TestSynthetic:
    def test_deterministic_under_seed(self):
        assert gen_synthetic(4, 100, 7) == gen_synthetic(4, 100, 7)

    def test_different_seed_differs(self):
        assert gen_synthetic(4, 100, 7) != gen_synthetic(4, 100, 8)

    def test_style_marker_by_construction(self):
        labels = synthetic_labels(4)
        for s in gen_synthetic(4, 100, 7):
            assert style_marker(labels[s.emotion]) in tokenize(s.target)

    def test_n_emotions_floor(self):
        with pytest.raises(ValueError):
            gen_synthetic(1, 10, 0)

    def test_save_load_roundtrip(self, tmp_path):
        labels = synthetic_labels(4)
        samples = gen_synthetic(4, 30, 7)
        save_dataset(samples, tmp_path / "d.jsonl", labels=labels)
        loaded = load_dataset(tmp_path / "d.jsonl", labels=labels)
        # multi-turn samples also contribute mid-conversation samples
        assert len(loaded) >= len(samples)
        by_target = {(tuple(t for _, t in s.turns), s.target) for s in loaded}
        for s in samples:
            assert (tuple(t for _, t in s.turns), s.target) in by_target
