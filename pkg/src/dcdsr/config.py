"""Training configuration and its flat ``key = value`` serialization."""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields, replace

from .denoise import DenoiseThresholds
from .errors import ConfigError
from .losses import AC_INFONCE, INFONCE, LossWeights
from .perturb import COLLABORATIVE, RANDOM

ABLATIONS = ("full", "rd", "sd", "ed")

# short spellings accepted on the command line and in config files
ALIASES = {
    "perturb_mode": {"cp": COLLABORATIVE, "rp": RANDOM},
    "cl_loss": {"ac": AC_INFONCE, "ac-infonce": AC_INFONCE},
    "ablation": {"none": "full"},
}


@dataclass(frozen=True)
class TrainConfig:
    # structure-level denoising
    beta_s: float = 0.8
    beta_r: float = 0.4
    sigma: float = 20.0
    # loss
    lambda1: float = 0.1
    lambda2: float = 0.1
    lambda3: float = 0.1
    lambda_reg: float = 1e-4
    tau: float = 0.2
    epsilon: float = 0.1
    # model and optimizer
    layers: int = 2
    dim: int = 50
    batch_size: int = 2048
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # schedule
    max_epochs: int = 500
    patience: int = 10
    validate: bool = True
    val_fraction: float = 0.05
    seed: int = 0
    # variants
    ablation: str = "full"
    perturb_mode: str = COLLABORATIVE
    cl_loss: str = AC_INFONCE

    @property
    def thresholds(self) -> DenoiseThresholds:
        return DenoiseThresholds(self.beta_s, self.beta_r, self.sigma)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda1, self.lambda2, self.lambda3, self.lambda_reg, self.tau)

    @property
    def ablation_parts(self) -> set[str]:
        """Ablations in effect; ``"sd+ed"`` combines two, ``"full"`` means none."""
        parts = {p.strip() for p in self.ablation.split("+") if p.strip()}
        return (parts - {"full"}) or parts

    @property
    def denoise_social(self) -> bool:
        return "sd" not in self.ablation_parts

    @property
    def denoise_interactions(self) -> bool:
        return not self.ablation_parts & {"sd", "rd"}

    @property
    def use_contrastive(self) -> bool:
        return "ed" not in self.ablation_parts

    def check(self) -> "TrainConfig":
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.dim < 1:
            raise ConfigError("embedding dim must be positive")
        if self.layers < 0:
            raise ConfigError("layer count must be non-negative")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.max_epochs < 0 or self.patience < 1:
            raise ConfigError("max_epochs must be >= 0 and patience >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie in [0, 1)")
        if not self.ablation_parts or not self.ablation_parts <= set(ABLATIONS):
            raise ConfigError(f"ablation must be one of {ABLATIONS} or a '+' joined combination, "
                              f"got {self.ablation!r}")
        if self.perturb_mode not in (COLLABORATIVE, RANDOM):
            raise ConfigError(f"unknown perturbation mode {self.perturb_mode!r}")
        if self.cl_loss not in (AC_INFONCE, INFONCE):
            raise ConfigError(f"unknown contrastive loss {self.cl_loss!r}")
        self.weights  # validates tau and lambdas
        return self

    def to_kv(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_kv().encode()).hexdigest()[:12]

    def updated(self, **changes) -> "TrainConfig":
        return replace(self, **coerce(changes))


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def coerce(values: dict) -> dict:
    """Convert string values to the field types of :class:`TrainConfig`."""
    types = {f.name: f.type for f in fields(TrainConfig)}
    out = {}
    for key, value in values.items():
        key = key.replace("-", "_")
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, str):
            kind = types[key]
            try:
                if kind == "bool":
                    value = _parse_bool(value)
                elif kind == "int":
                    value = int(value)
                elif kind == "float":
                    value = float(value)
                else:
                    value = value.strip().lower()
            except ValueError:
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        if key in ALIASES:
            value = ALIASES[key].get(value, value)
        out[key] = value
    return out


def from_kv(values: dict, base: TrainConfig | None = None) -> TrainConfig:
    return replace(base or TrainConfig(), **coerce(values)).check()
