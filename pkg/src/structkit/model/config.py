"""Model hyperparameters."""

from dataclasses import dataclass, fields


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    n_heads: int = 4
    d_ff: int = 0          # 0 means 4 * d_model
    h_max: int = 12
    n_node_types: int = 13
    phi_buckets: int = 32
    phi_max_distance: int = 128
    d_dfp: int = 8
    d_app: int = 32
    alpha_app: float = 0.1
    alpha_dfp: float = 0.1
    dfp_pos_weight: float = 1.0
    max_code_tokens: int = 256
    max_leaves: int = 64
    max_vars: int = 32
    init_std: float = 0.02

    def __post_init__(self):
        if self.d_ff == 0:
            self.d_ff = 4 * self.d_model
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.d_dfp + self.d_app > self.d_model:
            raise ValueError("d_dfp + d_app must not exceed d_model")
        if self.h_max < 2:
            raise ValueError("h_max must be at least 2")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})
