"""Structure-aware Transformer encoder-decoder with auxiliary heads."""

from structkit.model.config import ModelConfig
from structkit.model.inputs import EncoderInput, TargetLabels
from structkit.model.seq2seq import LossBreakdown, Model

__all__ = ["ModelConfig", "EncoderInput", "TargetLabels", "LossBreakdown", "Model"]
