"""Sentence classifiers and evaluation.

Three interchangeable backends produce one Prediction per sentence:

* DictionaryBackend: deterministic keyword rule over the lexicon.
* NbModel: multinomial naive Bayes over lowercase unigrams, trained natively.
* RemoteBackend: JSON client for an external model served over HTTP, so a
  fine-tuned large model can be plugged in without touching the pipeline.

Evaluation reports accuracy, macro precision/recall, and F-beta scores for a
configurable set of betas, plus per-class rates and the confusion matrix.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import requests

from .annotation import LABEL_CLASSES
from .corpus import Sentence
from .lexicon import Lexicon, match_sentence

log = logging.getLogger(__name__)

# Lexicon technology categories -> label classes.
CATEGORY_TO_LABEL = {
    "AI": "AI",
    "BD": "BIG_DATA",
    "CC": "CLOUD_COMPUTING",
    "IOT": "IOT",
    "BC": "BLOCKCHAIN",
    "MI": "MOBILE_INTERNET",
}

DEFAULT_BETAS = (1.0, 0.7, 0.8)

MODEL_FORMAT_VERSION = 1


class ClassifierError(ValueError):
    pass


class RemoteBackendError(RuntimeError):
    pass


@dataclass(frozen=True)
class Prediction:
    sentence_id: str
    label: str
    confidence: float

    def __post_init__(self):
        if self.label not in LABEL_CLASSES:
            raise ClassifierError(f"label {self.label!r} is not a known class")
        if not 0.0 <= self.confidence <= 1.0:
            raise ClassifierError(f"confidence {self.confidence} outside [0, 1]")


def prediction_to_record(p: Prediction) -> dict:
    return {"sentence_id": p.sentence_id, "label": p.label, "confidence": p.confidence}


def prediction_from_record(rec: dict) -> Prediction:
    return Prediction(rec["sentence_id"], rec["label"], float(rec["confidence"]))


# ---------------------------------------------------------------------------
# Dictionary baseline
# ---------------------------------------------------------------------------


def dictionary_classify(sentence: Sentence, lexicon: Lexicon) -> Prediction:
    """Keyword rule: label by the longest technology hit (ties broken toward
    the earliest offset); a generic-only hit means NON_NEW_DIGITAL; no hit
    means NON_DIGITAL. Confidence is 1.0 since the rule is deterministic."""
    hits = match_sentence(sentence, lexicon)
    tech_hits = [h for h in hits if h.category in CATEGORY_TO_LABEL]
    if tech_hits:
        best = min(tech_hits, key=lambda h: (-len(h.term), h.offset))
        return Prediction(sentence.sentence_id, CATEGORY_TO_LABEL[best.category], 1.0)
    if any(h.category == "GEN" for h in hits):
        return Prediction(sentence.sentence_id, "NON_NEW_DIGITAL", 1.0)
    return Prediction(sentence.sentence_id, "NON_DIGITAL", 1.0)


class DictionaryBackend:
    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon

    def predict_batch(self, sentences: Sequence[Sentence]) -> list[Prediction]:
        return [dictionary_classify(s, self.lexicon) for s in sentences]


# ---------------------------------------------------------------------------
# Native naive Bayes
# ---------------------------------------------------------------------------


def _tokens(text: str) -> list[str]:
    return text.lower().split()


@dataclass
class NbModel:
    """Multinomial naive Bayes with add-one smoothing over lowercase unigrams."""

    classes: tuple[str, ...]
    vocabulary: dict[str, int]
    class_log_prior: np.ndarray  # (C,)
    feature_log_prob: np.ndarray  # (C, V)

    def posterior(self, text: str) -> np.ndarray:
        scores = self.class_log_prior.copy()
        for tok in _tokens(text):
            j = self.vocabulary.get(tok)
            if j is not None:
                scores = scores + self.feature_log_prob[:, j]
        scores -= scores.max()
        probs = np.exp(scores)
        return probs / probs.sum()

    def predict_one(self, sentence: Sentence) -> Prediction:
        probs = self.posterior(sentence.text)
        k = int(np.argmax(probs))
        return Prediction(sentence.sentence_id, self.classes[k], float(probs[k]))

    def predict_batch(self, sentences: Sequence[Sentence]) -> list[Prediction]:
        return [self.predict_one(s) for s in sentences]

    def save(self, path: str | Path) -> None:
        vocab_in_order = sorted(self.vocabulary, key=self.vocabulary.__getitem__)
        payload = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "multinomial_nb",
            "classes": list(self.classes),
            "vocabulary": vocab_in_order,
            "class_log_prior": self.class_log_prior.tolist(),
            "feature_log_prob": self.feature_log_prob.tolist(),
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NbModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format_version") != MODEL_FORMAT_VERSION:
            raise ClassifierError(f"unsupported model format {payload.get('format_version')!r}")
        return cls(
            classes=tuple(payload["classes"]),
            vocabulary={tok: i for i, tok in enumerate(payload["vocabulary"])},
            class_log_prior=np.asarray(payload["class_log_prior"], dtype=float),
            feature_log_prob=np.asarray(payload["feature_log_prob"], dtype=float),
        )


def train_naive_bayes(
    examples: Sequence[tuple[str, str]],
    classes: Sequence[str] | None = None,
) -> NbModel:
    """Train on (text, label) pairs.

    `classes` defaults to the eight substantive label classes; every class in
    the set must have at least one training sentence, otherwise training is
    rejected naming the empty class.
    """
    if classes is None:
        classes = LABEL_CLASSES
    classes = tuple(classes)
    counts_by_class = {c: 0 for c in classes}
    for _, label in examples:
        if label not in counts_by_class:
            raise ClassifierError(f"label {label!r} not in configured class set")
        counts_by_class[label] += 1
    empty = [c for c in classes if counts_by_class[c] == 0]
    if empty:
        raise ClassifierError(f"no training sentences for class(es): {', '.join(empty)}")

    vocabulary: dict[str, int] = {}
    for text, _ in examples:
        for tok in _tokens(text):
            vocabulary.setdefault(tok, len(vocabulary))
    v = len(vocabulary)
    c = len(classes)
    class_index = {cl: i for i, cl in enumerate(classes)}
    token_counts = np.zeros((c, v), dtype=float)
    doc_counts = np.zeros(c, dtype=float)
    for text, label in examples:
        i = class_index[label]
        doc_counts[i] += 1
        for tok in _tokens(text):
            token_counts[i, vocabulary[tok]] += 1
    class_log_prior = np.log(doc_counts / doc_counts.sum())
    totals = token_counts.sum(axis=1, keepdims=True)
    feature_log_prob = np.log((token_counts + 1.0) / (totals + v))
    return NbModel(classes, vocabulary, class_log_prior, feature_log_prob)


# ---------------------------------------------------------------------------
# Remote inference backend
# ---------------------------------------------------------------------------


@dataclass
class RemoteBackendConfig:
    endpoint: str
    batch_size: int = 32
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.batch_size < 1:
            raise ClassifierError("batch_size must be >= 1")
        if self.timeout <= 0:
            raise ClassifierError("timeout must be > 0")


class RemoteBackend:
    """Client for an external sentence classifier.

    Request:  {"sentences": [{"id": ..., "text": ...}, ...]}
    Response: {"predictions": [{"id": ..., "label": ..., "confidence": ...}, ...]}

    Batches are all-or-nothing: a batch that still fails after the configured
    retries aborts the whole prediction run naming the batch index, and no
    partial results are returned.
    """

    def __init__(self, config: RemoteBackendConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()

    def _post_batch(self, batch: Sequence[Sentence], batch_index: int) -> list[Prediction]:
        payload = {"sentences": [{"id": s.sentence_id, "text": s.text} for s in batch]}
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                delay = self.config.backoff_base * (2 ** (attempt - 1))
                log.warning("batch %d attempt %d failed (%s); retrying in %.2fs",
                            batch_index, attempt, last_error, delay)
                time.sleep(delay)
            try:
                resp = self.session.post(
                    self.config.endpoint, json=payload, timeout=self.config.timeout
                )
                resp.raise_for_status()
                return self._parse(resp.json(), batch, batch_index)
            except (requests.RequestException, RemoteBackendError, ValueError, KeyError) as exc:
                last_error = exc
        raise RemoteBackendError(
            f"batch {batch_index} failed after {self.config.max_retries} retries: {last_error}"
        )

    def _parse(self, body, batch: Sequence[Sentence], batch_index: int) -> list[Prediction]:
        if not isinstance(body, dict) or "predictions" not in body:
            raise ValueError("response missing 'predictions'")
        by_id: dict[str, Prediction] = {}
        for item in body["predictions"]:
            label = item.get("label")
            if label not in LABEL_CLASSES:
                raise RemoteBackendError(
                    f"batch {batch_index}: unknown label {label!r} for id {item.get('id')!r}"
                )
            conf = float(item.get("confidence", 0.0))
            if not 0.0 <= conf <= 1.0:
                raise RemoteBackendError(
                    f"batch {batch_index}: confidence {conf} outside [0, 1]"
                )
            by_id[item["id"]] = Prediction(item["id"], label, conf)
        missing = [s.sentence_id for s in batch if s.sentence_id not in by_id]
        if missing:
            raise RemoteBackendError(
                f"batch {batch_index}: response missing ids {', '.join(missing)}"
            )
        return [by_id[s.sentence_id] for s in batch]

    def predict_batch(self, sentences: Sequence[Sentence]) -> list[Prediction]:
        out: list[Prediction] = []
        size = self.config.batch_size
        for batch_index, start in enumerate(range(0, len(sentences), size)):
            out.extend(self._post_batch(sentences[start : start + size], batch_index))
        return out


def predict(backend, sentences: Sequence[Sentence]) -> list[Prediction]:
    """One prediction per input sentence, order-preserving, via any backend."""
    if not sentences:
        return []
    preds = backend.predict_batch(sentences)
    if len(preds) != len(sentences):
        raise ClassifierError(
            f"backend returned {len(preds)} predictions for {len(sentences)} sentences"
        )
    return preds


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def fbeta_score(precision: float, recall: float, beta: float) -> float:
    """F-beta = (1 + beta^2) P R / (beta^2 P + R); beta < 1 favors precision."""
    if precision == 0.0 and recall == 0.0:
        return 0.0
    b2 = beta * beta
    return (1.0 + b2) * precision * recall / (b2 * precision + recall)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    fbeta: Mapping[float, float]
    per_class: Mapping[str, dict]
    confusion: Mapping[str, Mapping[str, int]]
    n: int

    @property
    def f1(self) -> float:
        return self.fbeta[1.0]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "fbeta": {str(b): v for b, v in self.fbeta.items()},
            "per_class": dict(self.per_class),
            "confusion": {g: dict(row) for g, row in self.confusion.items()},
        }

    def render(self) -> str:
        header = ["Accuracy", "Precision", "Recall"] + [
            f"F{b:g} Score" for b in self.fbeta
        ]
        values = [
            f"{self.accuracy * 100:.2f}%",
            f"{self.macro_precision * 100:.2f}%",
            f"{self.macro_recall * 100:.2f}%",
        ] + [f"{v:.4f}" for v in self.fbeta.values()]
        width = max(len(h) for h in header) + 2
        lines = [
            "".join(h.ljust(width) for h in header),
            "".join(v.ljust(width) for v in values),
        ]
        return "\n".join(lines)


def evaluate(
    predictions: Iterable[Prediction],
    gold: Mapping[str, str] | Sequence[tuple[str, str]],
    betas: Sequence[float] = DEFAULT_BETAS,
) -> EvalReport:
    """Score predictions against gold labels.

    Per-class precision/recall are one-vs-rest; macro precision/recall are
    unweighted means over classes with gold support; F-beta scores are
    computed from the macro precision and recall.
    """
    gold_map = dict(gold)
    pred_map = {p.sentence_id: p for p in predictions}
    missing_preds = sorted(set(gold_map) - set(pred_map))
    extra_preds = sorted(set(pred_map) - set(gold_map))
    if missing_preds or extra_preds:
        parts = []
        if missing_preds:
            parts.append(f"gold ids without predictions: {', '.join(missing_preds[:10])}")
        if extra_preds:
            parts.append(f"prediction ids without gold: {', '.join(extra_preds[:10])}")
        raise ClassifierError("; ".join(parts))
    if not gold_map:
        raise ClassifierError("nothing to evaluate")

    labels = [c for c in LABEL_CLASSES]
    confusion = {g: {p: 0 for p in labels} for g in labels}
    correct = 0
    for sid, gold_label in gold_map.items():
        if gold_label not in confusion:
            raise ClassifierError(f"gold label {gold_label!r} is not a known class")
        pred_label = pred_map[sid].label
        confusion[gold_label][pred_label] += 1
        if pred_label == gold_label:
            correct += 1
    n = len(gold_map)

    per_class = {}
    precisions, recalls = [], []
    for cls in labels:
        support = sum(confusion[cls].values())
        predicted = sum(confusion[g][cls] for g in labels)
        tp = confusion[cls][cls]
        if support == 0:
            continue
        precision = tp / predicted if predicted else 0.0
        recall = tp / support
        per_class[cls] = {"precision": precision, "recall": recall, "support": support}
        precisions.append(precision)
        recalls.append(recall)

    macro_p = float(np.mean(precisions))
    macro_r = float(np.mean(recalls))
    fbeta = {float(b): fbeta_score(macro_p, macro_r, float(b)) for b in betas}
    confusion_out = {
        g: {p: c for p, c in row.items() if c} for g, row in confusion.items()
        if sum(row.values())
    }
    return EvalReport(correct / n, macro_p, macro_r, fbeta, per_class, confusion_out, n)


def majority_class_accuracy(gold: Mapping[str, str] | Sequence[tuple[str, str]]) -> float:
    """Accuracy of always predicting the most frequent gold class."""
    gold_map = dict(gold)
    if not gold_map:
        raise ClassifierError("empty gold set")
    counts: dict[str, int] = {}
    for label in gold_map.values():
        counts[label] = counts.get(label, 0) + 1
    return max(counts.values()) / len(gold_map)
