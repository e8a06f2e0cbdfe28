"""Model/training configuration and the flat key=value config file format."""

import dataclasses
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


# Default label set: 32 evenly distributed emotion categories common in
# open-domain emotion-labeled dialogue corpora.
DEFAULT_EMOTIONS = [
    "surprised", "excited", "angry", "proud", "sad", "annoyed", "grateful",
    "lonely", "afraid", "terrified", "guilty", "impressed", "disgusted",
    "hopeful", "confident", "furious", "anxious", "anticipating", "joyful",
    "nostalgic", "disappointed", "prepared", "jealous", "content",
    "devastated", "embarrassed", "caring", "sentimental", "trusting",
    "ashamed", "apprehensive", "faithful",
]

MODEL_KINDS = ("trs", "multi_trs", "moel")


@dataclass
class ModelConfig:
    """All architecture dimensions and loss/annealing scalars."""

    n_emotions: int = 32
    d_model: int = 300
    n_heads: int = 2
    head_dim: int = 40
    enc_layers: int = 2
    trs_dec_layers: int = 2        # decoder depth of the plain seq2seq baseline
    conv_filters: int = 50
    conv_width: int = 3
    alpha: float = 1.0             # emotion-loss weight
    beta: float = 1.0              # generation-loss weight
    anneal_rate: float = 1e-3      # floor of the oracle-replacement probability
    anneal_threshold: float = 1e4  # time constant of the oracle decay
    max_ctx: int = 128
    max_resp: int = 32
    max_decode_len: int = 30
    vocab_size: int = 0            # filled in after the vocabulary is built
    scale_embedding: bool = False  # multiply word embeddings by sqrt(d_model)
    dropout: float = 0.0           # attention/sublayer dropout (training only)
    word_dropout: float = 0.0      # context-side whole-token dropout

    def validate(self):
        for name in ("n_emotions", "d_model", "n_heads", "head_dim",
                     "enc_layers", "trs_dec_layers", "conv_filters",
                     "conv_width", "max_ctx", "max_resp", "max_decode_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.n_emotions < 2:
            raise ConfigError("n_emotions must be >= 2")
        if self.d_model % 2 != 0:
            raise ConfigError("d_model must be even (sinusoidal encoding)")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("loss weights must be nonnegative")
        if not 0 < self.anneal_rate < 1:
            raise ConfigError("anneal_rate must lie in (0, 1)")
        if self.anneal_threshold <= 0:
            raise ConfigError("anneal_threshold must be positive")
        if self.max_ctx < 2:
            raise ConfigError("max_ctx must be >= 2")
        if not 0 <= self.dropout < 1 or not 0 <= self.word_dropout < 1:
            raise ConfigError("dropout rates must lie in [0, 1)")
        return self


@dataclass
class TrainConfig:
    """Optimization settings plus the model they apply to."""

    model: ModelConfig = field(default_factory=ModelConfig)
    kind: str = "moel"
    seed: int = 0
    batch_size: int = 16
    train_steps: int = 20000
    warmup: int = 8000
    lr_factor: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.98
    adam_eps: float = 1e-9
    grad_clip: float = 1.0
    min_freq: int = 1
    val_fraction: float = 0.1
    data: str = ""
    out_dir: str = "runs/default"
    pretrained_vectors: str = ""

    def validate(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; "
                              f"expected one of {MODEL_KINDS}")
        if self.batch_size <= 0 or self.train_steps <= 0 or self.warmup <= 0:
            raise ConfigError("batch_size, train_steps and warmup must be positive")
        if self.min_freq < 1:
            raise ConfigError("min_freq must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must lie in (0, 1)")
        self.model.validate()
        return self


def _coerce(value, target_type):
    if target_type is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {value!r}")
    return target_type(value)


def parse_config(text):
    """Parse a flat ``key = value`` config file into a TrainConfig.

    Lines starting with ``#`` and blank lines are ignored. Model keys and
    training keys share one flat namespace.
    """
    model_fields = {f.name: f for f in dataclasses.fields(ModelConfig)}
    train_fields = {f.name: f for f in dataclasses.fields(TrainConfig)
                    if f.name != "model"}
    cfg = TrainConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in model_fields:
            setattr(cfg.model, key, _coerce(value, type(getattr(cfg.model, key))))
        elif key in train_fields:
            setattr(cfg, key, _coerce(value, type(getattr(cfg, key))))
        else:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
    return cfg.validate()


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(cfg):
    """Inverse of parse_config: render a TrainConfig as key=value lines."""
    lines = []
    for f in dataclasses.fields(TrainConfig):
        if f.name == "model":
            continue
        lines.append(f"{f.name} = {getattr(cfg, f.name)}")
    for f in dataclasses.fields(ModelConfig):
        lines.append(f"{f.name} = {getattr(cfg.model, f.name)}")
    return "\n".join(lines) + "\n"
