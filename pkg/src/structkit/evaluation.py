"""Evaluation metrics: generation quality and auxiliary-head probes.

Average precision pools scored ordered pairs across the whole corpus and
ranks them by (-score, pair index), so ties break toward earlier pairs and
the computation is deterministic.
"""

import numpy as np

from structkit.frontend.lexer import lex
from structkit.frontend.parser import parse
from structkit.frontend.tokenizer import Vocabulary, detokenize
from structkit.model.inputs import EncoderInput, TargetLabels
from structkit.model.seq2seq import Model


def average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    """AP over (score, label) pairs; labels boolean; NaN-free inputs."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=bool).reshape(-1)
    n_pos = int(labels.sum())
    if n_pos == 0:
        return 0.0
    order = np.lexsort((np.arange(len(scores)), -scores))
    hits = labels[order].astype(np.float64)
    precision_at = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float((precision_at * hits).sum() / n_pos)


def evaluate_auxiliary(model: Model,
                       examples: list[tuple[EncoderInput, TargetLabels]]):
    """Teacher-forced APP accuracy and pooled DFP average precision."""
    app_correct = 0
    app_total = 0
    dfp_scores: list[np.ndarray] = []
    dfp_labels: list[np.ndarray] = []
    for enc, labels in examples:
        hidden = model.decoder_hidden(enc, labels)
        correct, total = model.app.predict(hidden, labels.leaf_type_paths)
        app_correct += correct
        app_total += total
        probs = model.dfp.probabilities(hidden)
        dfp_scores.append(probs.reshape(-1))
        dfp_labels.append(labels.y.reshape(-1))
    scores = np.concatenate(dfp_scores) if dfp_scores else np.zeros(0)
    truth = (np.concatenate(dfp_labels) if dfp_labels
             else np.zeros(0, dtype=bool))
    prevalence = float(truth.mean()) if len(truth) else 0.0
    return {
        "app_accuracy": app_correct / app_total if app_total else 0.0,
        "app_terms": app_total,
        "dfp_ap": average_precision(scores, truth),
        "dfp_pairs": int(len(truth)),
        "dfp_prevalence": prevalence,
    }


def token_accuracy(model: Model,
                   examples: list[tuple[EncoderInput, TargetLabels]]):
    """Teacher-forced argmax accuracy pooled over target positions, plus the
    fraction of examples with every position correct (sequence accuracy).

    Greedy exact match implies a fully correct teacher-forced sequence, so
    exact match <= sequence accuracy; the pooled positional accuracy carries
    no such bound when lengths differ.
    """
    correct = 0
    total = 0
    full = 0
    for enc, labels in examples:
        hidden = model.decoder_hidden(enc, labels)
        logits = hidden @ model.lm.w.value.T
        pred = np.argmax(logits, axis=1)
        hits = int((pred == labels.token_ids).sum())
        correct += hits
        total += len(labels.token_ids)
        full += int(hits == len(labels.token_ids))
    n = len(examples)
    return (correct / total if total else 0.0, full / n if n else 0.0)


def parses_cleanly(source: str) -> bool:
    try:
        parse(lex(source))
    except Exception:
        return False
    return True


def evaluate_generation(model: Model,
                        examples: list[tuple[EncoderInput, TargetLabels]],
                        vocab: Vocabulary, beam: int = 1,
                        max_len: int = 192):
    """Greedy/beam decoding metrics against reference target ids."""
    exact = 0
    parsed = 0
    truncated_count = 0
    for enc, labels in examples:
        ids, truncated = model.generate(enc, max_len=max_len, beam=beam)
        truncated_count += int(truncated)
        reference = [int(t) for t in labels.token_ids[:-1]]
        if ids == reference:
            exact += 1
        if parses_cleanly(detokenize(vocab.text_of(i) for i in ids)):
            parsed += 1
    n = len(examples)
    tok_acc, seq_acc = token_accuracy(model, examples)
    return {
        "exact_match": exact / n if n else 0.0,
        "parse_rate": parsed / n if n else 0.0,
        "token_accuracy": tok_acc,
        "sequence_accuracy": seq_acc,
        "truncated": truncated_count,
        "n_examples": n,
    }
