"""Emotion-tracking transformer dialogue model that softly routes decoding
through a bank of per-emotion listener decoders fused by a meta listener."""

from .config import DEFAULT_EMOTIONS, ModelConfig, TrainConfig, load_config
from .corpus import (DialogueSample, Role, Vocab, build_vocab, gen_synthetic,
                     load_dataset)
from .model import build_model, count_params
from .training import Trainer, epsilon_oracle, fit, lr_schedule

__all__ = [
    "DEFAULT_EMOTIONS", "ModelConfig", "TrainConfig", "load_config",
    "DialogueSample", "Role", "Vocab", "build_vocab", "gen_synthetic",
    "load_dataset", "build_model", "count_params", "Trainer",
    "epsilon_oracle", "fit", "lr_schedule",
]
