"""Versioned JSON checkpoints: config, vocabulary, and all parameters.

Floats are serialized with repr (shortest round-trip), so save -> load -> save
is bitwise stable and loaded models reproduce metrics exactly.
"""

import json

import numpy as np

from structkit.frontend.tokenizer import Vocabulary
from structkit.model.config import ModelConfig
from structkit.model.seq2seq import Model

FORMAT_VERSION = 1


def save_checkpoint(path: str, model: Model, vocab: Vocabulary) -> None:
    payload = {
        "version": FORMAT_VERSION,
        "config": model.cfg.to_dict(),
        "vocab": vocab.to_json(),
        "params": {
            p.name: {"shape": list(p.value.shape),
                     "data": p.value.ravel().tolist()}
            for p in model.params
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path: str) -> tuple[Model, Vocabulary]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    cfg = ModelConfig.from_dict(payload["config"])
    model = Model(cfg, seed=0)
    vocab = Vocabulary.from_json(payload["vocab"])
    saved = payload["params"]
    for p in model.params:
        if p.name not in saved:
            raise ValueError(f"checkpoint missing parameter {p.name!r}")
        entry = saved[p.name]
        shape = tuple(entry["shape"])
        if shape != p.value.shape:
            raise ValueError(
                f"shape mismatch for {p.name!r}: "
                f"checkpoint {shape}, model {p.value.shape}")
        p.value[...] = np.asarray(entry["data"], dtype=np.float64).reshape(shape)
    return model, vocab
