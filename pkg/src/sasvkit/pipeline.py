"""Wiring between stores, trials and the estimators.

Builds trial feature matrices, derives the stage-1 utterance labels from
the trial protocol, runs the two training stages, and emits per-trial
scores in input order.
"""

import numpy as np

from .cm import CountermeasureClassifier
from .exceptions import MissingUtteranceError, SasvError
from .heads import make_head
from .scores import ScoreRecord
from .trials import TrialLabel
from .validation import normalize_rows


def features_for_trials(trials, asv_store, cm_store, enroll_store):
    """Stack [e_test | e_en | e_cm] rows for each trial."""
    rows = []
    for trial in trials:
        if trial.test_utt not in asv_store:
            raise MissingUtteranceError(trial.enroll_model, trial.test_utt, where="ASV store")
        if trial.test_utt not in cm_store:
            raise MissingUtteranceError(trial.enroll_model, trial.test_utt, where="CM store")
        if trial.enroll_model not in enroll_store:
            raise MissingUtteranceError(trial.enroll_model, trial.enroll_model, where="enrollment store")
        rows.append(
            np.concatenate(
                [
                    np.asarray(asv_store[trial.test_utt], dtype=np.float64),
                    np.asarray(enroll_store[trial.enroll_model], dtype=np.float64),
                    np.asarray(cm_store[trial.test_utt], dtype=np.float64),
                ]
            )
        )
    if not rows:
        return np.zeros((0, 3 * asv_store.dim))
    return np.stack(rows)


def trial_targets(trials):
    """y = 1 for target trials, 0 for nontarget and spoof."""
    missing = [t for t in trials if t.label is None]
    if missing:
        t = missing[0]
        raise SasvError(f"trial ({t.enroll_model!r}, {t.test_utt!r}) has no label; training needs labels")
    return np.array([1.0 if t.label == TrialLabel.TARGET else 0.0 for t in trials])


def cm_training_set(trials, cm_store, asv_store):
    """Utterance-level countermeasure training data derived from trials.

    An utterance is spoofed when it appears in any spoof trial and bona
    fide when it appears in a target or nontarget trial; a conflict is a
    protocol error. Returns (utt_ids, X_cm, y, X_spk) in sorted
    utterance order.
    """
    labels = {}
    for trial in trials:
        if trial.label is None:
            continue
        spoofed = trial.label == TrialLabel.SPOOF
        prev = labels.setdefault(trial.test_utt, spoofed)
        if prev != spoofed:
            raise SasvError(f"utterance {trial.test_utt!r} appears as both bona fide and spoof")
    utts = sorted(labels)
    if not utts:
        raise SasvError("no labeled trials to derive countermeasure labels from")
    for utt in utts:
        if utt not in cm_store:
            raise MissingUtteranceError("-", utt, where="CM store")
        if utt not in asv_store:
            raise MissingUtteranceError("-", utt, where="ASV store")
    X_cm = cm_store.matrix(utts)
    X_spk = asv_store.matrix(utts)
    y = np.array([0.0 if labels[u] else 1.0 for u in utts])  # 1 = bona fide
    return utts, X_cm, y, X_spk


def train_system(trials, asv_store, cm_store, enroll_store, strategy, cm_kwargs=None, head_kwargs=None):
    """Two-stage training: countermeasure first, scoring head second.

    Returns the fitted head; its ``cm_model_`` attribute carries the
    stage-1 classifier actually used for scoring.
    """
    cm_kwargs = dict(cm_kwargs or {})
    head_kwargs = dict(head_kwargs or {})
    _, X_cm, y_cm, X_spk = cm_training_set(trials, cm_store, asv_store)
    cm = CountermeasureClassifier(**cm_kwargs)
    cm.fit(X_cm, y_cm, speaker=X_spk if cm.assist else None)

    head = make_head(strategy, cm_model=cm, **head_kwargs)
    X = features_for_trials(trials, asv_store, cm_store, enroll_store)
    head.fit(X, trial_targets(trials))
    return head


def score_trials(head, trials, asv_store, cm_store, enroll_store):
    """Per-trial head scores, emitted in input-trial order."""
    X = features_for_trials(trials, asv_store, cm_store, enroll_store)
    z = head.decision_function(X)
    return [ScoreRecord(t.enroll_model, t.test_utt, float(s)) for t, s in zip(trials, z)]


def branch_scores(cm_model, trials, asv_store, cm_store, enroll_store):
    """Per-trial cosine (ASV branch) and countermeasure scores.

    Used to fill the tandem cost: the ASV scores partition by trial
    label, the countermeasure score of a trial is the score of its test
    utterance.
    """
    X = features_for_trials(trials, asv_store, cm_store, enroll_store)
    dim = asv_store.dim
    e_test = normalize_rows(X[:, :dim])
    e_en = normalize_rows(X[:, dim : 2 * dim])
    sv = np.einsum("ij,ij->i", e_test, e_en)
    cm_vals = cm_model.decision_function(X[:, 2 * dim :], speaker=X[:, :dim])
    asv_records = [ScoreRecord(t.enroll_model, t.test_utt, float(s)) for t, s in zip(trials, sv)]
    cm_records = [ScoreRecord(t.enroll_model, t.test_utt, float(s)) for t, s in zip(trials, cm_vals)]
    return asv_records, cm_records
