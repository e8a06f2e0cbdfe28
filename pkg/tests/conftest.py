import time

import pytest
import torch

from listenmix import corpus, training
from listenmix.config import ModelConfig, TrainConfig
from listenmix.corpus import synthetic_labels

torch.set_num_threads(1)

# one verdict line per acceptance criterion, echoed after the test run so
# they survive output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

SYNTH_EMOTIONS = 4
SYNTH_SAMPLES = 2000
SYNTH_SEED = 7


def synth_train_config(out_dir):
    """Small-model training recipe used by the end-to-end synthetic tests."""
    model = ModelConfig(
        n_emotions=SYNTH_EMOTIONS, d_model=64, n_heads=2, head_dim=16,
        enc_layers=1, conv_filters=64, conv_width=3, max_ctx=32, max_resp=8,
        max_decode_len=8, dropout=0.2, word_dropout=0.4)
    return TrainConfig(model=model, kind="moel", seed=0, batch_size=16,
                       train_steps=1500, warmup=300, lr_factor=0.5,
                       out_dir=str(out_dir))


@pytest.fixture(scope="session")
def synth_run(tmp_path_factory):
    """Train the mixture model once on the synthetic corpus; shared by the
    end-to-end acceptance tests."""
    out_dir = tmp_path_factory.mktemp("synth_run")
    samples = corpus.gen_synthetic(SYNTH_EMOTIONS, SYNTH_SAMPLES, SYNTH_SEED)
    n_val = len(samples) // 10
    train_samples, val_samples = samples[:-n_val], samples[-n_val:]
    cfg = synth_train_config(out_dir)
    start = time.monotonic()
    trainer, metrics_path, best_path = training.fit(cfg, train_samples,
                                                    val_samples)
    duration = time.monotonic() - start
    vocab = corpus.Vocab.load(str(out_dir / "vocab.txt"))
    return {
        "trainer": trainer,
        "model": trainer.model,
        "cfg": cfg,
        "vocab": vocab,
        "labels": synthetic_labels(SYNTH_EMOTIONS),
        "train_samples": train_samples,
        "val_samples": val_samples,
        "metrics_path": metrics_path,
        "best_path": best_path,
        "duration": duration,
    }
