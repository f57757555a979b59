"""Trial protocol parsing and enrollment construction.

Trial files carry one trial per line, space separated:
``<enroll_model> <test_utt> [label]`` with label one of ``target``,
``nontarget``, ``spoof``. The label is optional so the same parser
serves unlabeled scoring runs. Enrollment map files list
``<model_id> <utt_id> <utt_id> ...`` per line.
"""

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingStore
from .exceptions import (
    DuplicateIdError,
    MalformedLineError,
    MissingUtteranceError,
    UnknownLabelError,
)
from .validation import l2_normalize


class TrialLabel(enum.Enum):
    TARGET = "target"
    NONTARGET = "nontarget"
    SPOOF = "spoof"


_LABELS = {label.value: label for label in TrialLabel}


@dataclass(frozen=True)
class TrialRecord:
    enroll_model: str
    test_utt: str
    label: TrialLabel | None = None


def parse_trials(text):
    """Parse trial lines into records; blank lines are skipped.

    Raises MalformedLineError on a wrong field count and
    UnknownLabelError on a label outside the enum, both carrying the
    1-based line number.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    records = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        fields = stripped.split(" ")
        if len(fields) == 2:
            enroll, test = fields
            label = None
        elif len(fields) == 3:
            enroll, test, raw = fields
            label = _LABELS.get(raw)
            if label is None:
                raise UnknownLabelError(line_no, raw)
        else:
            raise MalformedLineError(
                line_no, f"expected 2 or 3 space-separated fields, got {len(fields)}"
            )
        if not enroll or not test:
            raise MalformedLineError(line_no, "empty enroll or test id")
        records.append(TrialRecord(enroll, test, label))
    return records


def serialize_trials(records):
    lines = []
    for rec in records:
        if rec.label is None:
            lines.append(f"{rec.enroll_model} {rec.test_utt}")
        else:
            lines.append(f"{rec.enroll_model} {rec.test_utt} {rec.label.value}")
    return "\n".join(lines) + ("\n" if lines else "")


def read_trials(path):
    return parse_trials(Path(path).read_text(encoding="utf-8"))


def write_trials(records, path):
    Path(path).write_text(serialize_trials(records), encoding="utf-8")


def parse_enrollment_map(text):
    """Parse ``<model_id> <utt_id> ...`` lines into an ordered dict."""
    mapping = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split(" ")
        if len(fields) < 2:
            raise MalformedLineError(line_no, "expected a model id and at least one utterance")
        model, utts = fields[0], fields[1:]
        if model in mapping:
            raise DuplicateIdError(model)
        mapping[model] = utts
    return mapping


def read_enrollment_map(path):
    return parse_enrollment_map(Path(path).read_text(encoding="utf-8"))


def write_enrollment_map(mapping, path):
    lines = [f"{model} {' '.join(utts)}" for model, utts in mapping.items()]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def build_enrollment(mapping, store):
    """Aggregate per-model enrollment embeddings.

    Each model's vector is the arithmetic mean of its utterance vectors
    followed by L2 normalization (so a single-utterance enrollment equals
    the normalized utterance). Raises MissingUtteranceError when a listed
    utterance is absent from the store and ZeroVectorError when the mean
    cancels out.
    """
    out = EmbeddingStore(store.dim)
    for model, utts in mapping.items():
        vecs = []
        for utt in utts:
            if utt not in store:
                raise MissingUtteranceError(model, utt)
            vecs.append(np.asarray(store[utt], dtype=np.float64))
        mean = np.mean(vecs, axis=0)
        out.add(model, l2_normalize(mean).astype(np.float32))
    return out
