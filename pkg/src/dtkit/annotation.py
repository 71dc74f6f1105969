"""Dual-annotation workflow: label schema, append-only event log, the task
state machine, adjudication, and inter-annotator agreement statistics.

Every sentence is labeled by exactly two annotators. Matching labels finalize
the task; conflicting labels park it for adjudication, which either picks a
final label or excludes the sentence from training data. The JSONL event log
is the source of truth; task states are a pure fold over it, so replaying the
log always reproduces the same states.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Sentence

LABEL_CLASSES = (
    "AI",
    "BIG_DATA",
    "CLOUD_COMPUTING",
    "IOT",
    "BLOCKCHAIN",
    "MOBILE_INTERNET",
    "NON_NEW_DIGITAL",
    "NON_DIGITAL",
)
EXCLUDED_SENTINEL = "EXCLUDED"

TECH_LABELS = ("AI", "BIG_DATA", "CLOUD_COMPUTING", "IOT", "BLOCKCHAIN", "MOBILE_INTERNET")

STATUS_UNLABELED = "UNLABELED"
STATUS_SINGLE = "SINGLE"
STATUS_AGREED = "AGREED"
STATUS_DISPUTED = "DISPUTED"
STATUS_ADJUDICATED = "ADJUDICATED"
STATUS_EXCLUDED = "EXCLUDED"
STATUSES = (
    STATUS_UNLABELED,
    STATUS_SINGLE,
    STATUS_AGREED,
    STATUS_DISPUTED,
    STATUS_ADJUDICATED,
    STATUS_EXCLUDED,
)

KIND_LABEL = "LABEL"
KIND_ADJUDICATE = "ADJUDICATE"


class AnnotationError(ValueError):
    """Raised on illegal label submissions or adjudications."""


@dataclass(frozen=True)
class AnnotationEvent:
    event_id: str
    sentence_id: str
    annotator_id: str
    label: str
    kind: str
    timestamp: float

    def to_record(self) -> dict:
        return {
            "event_id": self.event_id,
            "sentence_id": self.sentence_id,
            "annotator_id": self.annotator_id,
            "label": self.label,
            "kind": self.kind,
            "ts": self.timestamp,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "AnnotationEvent":
        return cls(
            rec["event_id"],
            rec["sentence_id"],
            rec["annotator_id"],
            rec["label"],
            rec["kind"],
            float(rec["ts"]),
        )


def new_event(sentence_id: str, annotator_id: str, label: str, kind: str = KIND_LABEL) -> AnnotationEvent:
    return AnnotationEvent(uuid.uuid4().hex, sentence_id, annotator_id, label, kind, time.time())


@dataclass
class TaskState:
    sentence_id: str
    status: str = STATUS_UNLABELED
    final_label: str | None = None
    labels: list[tuple[str, str]] = field(default_factory=list)  # (annotator, label) in event order

    def annotators(self) -> set[str]:
        return {a for a, _ in self.labels}


def fold_states(pool_ids: Sequence[str], events: Iterable[AnnotationEvent]) -> dict[str, TaskState]:
    """Pure fold of an event stream into per-sentence task states.

    Events that would be rejected by the live workflow (duplicate annotator,
    label on a settled task, adjudication of a non-disputed task) raise, so a
    persisted log can never replay into a different state than it was built
    with.
    """
    states = {sid: TaskState(sid) for sid in pool_ids}
    for ev in events:
        state = states.get(ev.sentence_id)
        if state is None:
            raise AnnotationError(f"event {ev.event_id} references unknown sentence {ev.sentence_id}")
        apply_event(state, ev)
    return states


def apply_event(state: TaskState, ev: AnnotationEvent) -> TaskState:
    if ev.kind == KIND_LABEL:
        # EXCLUDED is a legal label value: it is the annotator's "hard to
        # label" mark. Two hard marks exclude the sentence outright; a hard
        # mark against a substantive label disputes it for adjudication.
        if ev.label not in LABEL_CLASSES and ev.label != EXCLUDED_SENTINEL:
            raise AnnotationError(f"unknown label {ev.label!r}")
        if state.status not in (STATUS_UNLABELED, STATUS_SINGLE):
            raise AnnotationError(
                f"sentence {state.sentence_id} is {state.status}; labels are closed"
            )
        if ev.annotator_id in state.annotators():
            raise AnnotationError(
                f"annotator {ev.annotator_id} already labeled sentence {state.sentence_id}"
            )
        state.labels.append((ev.annotator_id, ev.label))
        if state.status == STATUS_UNLABELED:
            state.status = STATUS_SINGLE
        else:
            first_label = state.labels[0][1]
            if first_label != ev.label:
                state.status = STATUS_DISPUTED
            elif ev.label == EXCLUDED_SENTINEL:
                state.status = STATUS_EXCLUDED
                state.final_label = None
            else:
                state.status = STATUS_AGREED
                state.final_label = ev.label
    elif ev.kind == KIND_ADJUDICATE:
        if state.status != STATUS_DISPUTED:
            raise AnnotationError(
                f"sentence {state.sentence_id} is {state.status}, not DISPUTED"
            )
        if ev.label == EXCLUDED_SENTINEL:
            state.status = STATUS_EXCLUDED
            state.final_label = None
        elif ev.label in LABEL_CLASSES:
            state.status = STATUS_ADJUDICATED
            state.final_label = ev.label
        else:
            raise AnnotationError(f"unknown adjudication resolution {ev.label!r}")
    else:
        raise AnnotationError(f"unknown event kind {ev.kind!r}")
    return state


class EventLog:
    """Append-only JSONL event log, fsynced on every append."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, event: AnnotationEvent) -> None:
        with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(event.to_record(), sort_keys=True))
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())

    def replay(self) -> list[AnnotationEvent]:
        if not self.path.exists():
            return []
        events = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(AnnotationEvent.from_record(json.loads(line)))
        return events


@dataclass(frozen=True)
class AgreementReport:
    n_paired: int
    raw_agreement: float
    cohen_kappa: float
    degenerate: bool
    confusion: Mapping[tuple[str, str], int]


def agreement_stats(events: Iterable[AnnotationEvent]) -> AgreementReport:
    """Raw agreement and Cohen's kappa over sentences with two labels.

    Chance agreement uses the first-labeler and second-labeler marginal
    distributions over paired sentences. When chance agreement is exactly 1
    (both roles constant and equal) kappa is reported as 1 with the
    degenerate flag set instead of dividing by zero.
    """
    pairs: dict[str, list[str]] = {}
    for ev in events:
        if ev.kind == KIND_LABEL:
            pairs.setdefault(ev.sentence_id, []).append(ev.label)
    paired = {sid: labels for sid, labels in pairs.items() if len(labels) >= 2}
    if not paired:
        raise AnnotationError("no paired sentences; agreement is undefined")
    n = len(paired)
    confusion: dict[tuple[str, str], int] = {}
    agree = 0
    first_marginal: dict[str, int] = {}
    second_marginal: dict[str, int] = {}
    for labels in paired.values():
        a, b = labels[0], labels[1]
        confusion[(a, b)] = confusion.get((a, b), 0) + 1
        first_marginal[a] = first_marginal.get(a, 0) + 1
        second_marginal[b] = second_marginal.get(b, 0) + 1
        if a == b:
            agree += 1
    p_o = agree / n
    p_e = sum(
        (first_marginal.get(k, 0) / n) * (second_marginal.get(k, 0) / n)
        for k in set(first_marginal) | set(second_marginal)
    )
    if abs(1.0 - p_e) < 1e-12:
        return AgreementReport(n, p_o, 1.0, True, confusion)
    kappa = (p_o - p_e) / (1.0 - p_e)
    return AgreementReport(n, p_o, kappa, False, confusion)


class Workflow:
    """Live annotation session over a sentence pool.

    All mutations are serialized through one lock and persisted to the event
    log before the state change is acknowledged, so concurrent annotators can
    never double-label and a crash never loses an acknowledged label.
    """

    def __init__(self, sentences: Sequence[Sentence], log_path: str | Path):
        self.sentences = {s.sentence_id: s for s in sentences}
        self.pool_order = [s.sentence_id for s in sentences]
        self.log = EventLog(log_path)
        self._lock = threading.Lock()
        self._events: list[AnnotationEvent] = self.log.replay()
        self.states = fold_states(self.pool_order, self._events)

    # -- queries ------------------------------------------------------

    def eligible_for(self, annotator_id: str) -> list[str]:
        """Sentences this annotator could still label, pair-closing first."""
        single, fresh = [], []
        for sid in self.pool_order:
            state = self.states[sid]
            if annotator_id in state.annotators():
                continue
            if state.status == STATUS_SINGLE:
                single.append(sid)
            elif state.status == STATUS_UNLABELED:
                fresh.append(sid)
        return single + fresh

    def assign_next(self, annotator_id: str) -> str | None:
        """Next sentence for this annotator, or None when exhausted."""
        with self._lock:
            eligible = self.eligible_for(annotator_id)
        return eligible[0] if eligible else None

    def progress(self) -> dict:
        with self._lock:
            counts = {status: 0 for status in STATUSES}
            for state in self.states.values():
                counts[state.status] += 1
            body = {
                "total": len(self.states),
                "unlabeled": counts[STATUS_UNLABELED],
                "single": counts[STATUS_SINGLE],
                "agreed": counts[STATUS_AGREED],
                "disputed": counts[STATUS_DISPUTED],
                "adjudicated": counts[STATUS_ADJUDICATED],
                "excluded": counts[STATUS_EXCLUDED],
            }
            try:
                report = agreement_stats(self._events)
                body["raw_agreement"] = report.raw_agreement
                body["kappa"] = report.cohen_kappa
            except AnnotationError:
                body["raw_agreement"] = None
                body["kappa"] = None
            return body

    def disputes(self) -> list[dict]:
        with self._lock:
            out = []
            for sid in self.pool_order:
                state = self.states[sid]
                if state.status == STATUS_DISPUTED:
                    out.append(
                        {
                            "sentence_id": sid,
                            "text": self.sentences[sid].text,
                            "label_a": state.labels[0][1],
                            "label_b": state.labels[1][1],
                        }
                    )
            return out

    def events(self) -> list[AnnotationEvent]:
        with self._lock:
            return list(self._events)

    # -- mutations ----------------------------------------------------

    def submit_label(self, sentence_id: str, annotator_id: str, label: str) -> TaskState:
        with self._lock:
            state = self.states.get(sentence_id)
            if state is None:
                raise AnnotationError(f"sentence {sentence_id} is not in the pool")
            ev = new_event(sentence_id, annotator_id, label, KIND_LABEL)
            # Validate against a copy so a rejection leaves no trace.
            trial = TaskState(sentence_id, state.status, state.final_label, list(state.labels))
            apply_event(trial, ev)
            self.log.append(ev)
            self.states[sentence_id] = trial
            self._events.append(ev)
            return trial

    def adjudicate(self, sentence_id: str, resolution: str, adjudicator_id: str = "adjudicator") -> TaskState:
        with self._lock:
            state = self.states.get(sentence_id)
            if state is None:
                raise AnnotationError(f"sentence {sentence_id} is not in the pool")
            ev = new_event(sentence_id, adjudicator_id, resolution, KIND_ADJUDICATE)
            trial = TaskState(sentence_id, state.status, state.final_label, list(state.labels))
            apply_event(trial, ev)
            self.log.append(ev)
            self.states[sentence_id] = trial
            self._events.append(ev)
            return trial

    def agreement(self) -> AgreementReport:
        with self._lock:
            return agreement_stats(self._events)

    def training_export(self) -> list[tuple[str, str]]:
        """(sentence_id, final_label) for AGREED and ADJUDICATED tasks only;
        EXCLUDED sentences never enter training data."""
        with self._lock:
            return [
                (sid, self.states[sid].final_label)
                for sid in self.pool_order
                if self.states[sid].status in (STATUS_AGREED, STATUS_ADJUDICATED)
            ]


def write_labels_csv(labels: Sequence[tuple[str, str]], path: str | Path) -> None:
    """Final-label export: CSV with header sentence_id,final_label."""
    import csv

    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sentence_id", "final_label"])
        writer.writerows(labels)
