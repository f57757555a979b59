"""Deterministic synthetic embedding corpus.

Gives the full pipeline a desk-scale ground truth: speaker means are
drawn uniformly on the unit sphere, each utterance's ASV embedding is
the normalized sum of its speaker mean and isotropic Gaussian noise, and
spoofed utterances reuse their target speaker's mean (a spoof passes the
speaker check in ASV space and must be caught by the countermeasure).
Countermeasure embeddings place bona fide and spoofed utterances on
opposite sides of a fixed direction (the first basis vector):

    projection ~ N(+cm_gap/2 * cm_std, cm_std^2)   bona fide
    projection ~ N(-cm_gap/2 * cm_std, cm_std^2)   spoofed

with the remaining coordinates N(0, cm_std^2). The analytic
countermeasure EER along that direction is therefore Phi(-cm_gap / 2).

All draws come from one Box-Muller stream over PCG64(seed) in a fixed
order (speaker means, then per speaker and utterance the ASV noise
followed by the CM noise), so a config reproduces bit-exactly.

Trial enumeration pairs every enrolled speaker with every bona fide test
utterance (target or nontarget) and each spoofed utterance with the
speaker it mimics, in deterministic order, optionally capped by
``max_trials``.
"""

from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingStore
from .exceptions import ConfigInvalidError
from .rng import StableRng
from .trials import TrialLabel, TrialRecord
from .validation import l2_normalize


@dataclass(frozen=True)
class SynthConfig:
    n_speakers: int = 10
    utts_per_speaker: int = 10
    spoof_fraction: float = 0.5
    dim: int = 16
    within_std: float = 0.3
    cm_gap: float = 3.0
    cm_std: float = 1.0
    seed: int = 0
    n_enroll: int = 3
    max_trials: int = 0

    def validate(self):
        if self.n_speakers < 2:
            raise ConfigInvalidError("n_speakers", "need at least 2 speakers")
        if self.utts_per_speaker < 1:
            raise ConfigInvalidError("utts_per_speaker", "need at least 1 utterance")
        if not 0.0 <= self.spoof_fraction <= 1.0:
            raise ConfigInvalidError("spoof_fraction", "must be in [0, 1]")
        if self.dim < 1:
            raise ConfigInvalidError("dim", "must be positive")
        if not np.isfinite(self.within_std) or self.within_std < 0.0:
            raise ConfigInvalidError("within_std", "must be finite and >= 0")
        if not np.isfinite(self.cm_gap) or self.cm_gap < 0.0:
            raise ConfigInvalidError("cm_gap", "must be finite and >= 0")
        if not np.isfinite(self.cm_std) or self.cm_std <= 0.0:
            raise ConfigInvalidError("cm_std", "must be finite and > 0")
        if self.n_enroll < 1:
            raise ConfigInvalidError("n_enroll", "must be >= 1")
        if self.max_trials < 0:
            raise ConfigInvalidError("max_trials", "must be >= 0 (0 = unlimited)")
        n_spoof = round(self.spoof_fraction * self.utts_per_speaker)
        if self.utts_per_speaker - n_spoof < 1:
            raise ConfigInvalidError("spoof_fraction", "leaves no bona fide utterance per speaker")
        return self


@dataclass
class CorpusTruth:
    """Generator internals, exposed for oracle computations in tests."""

    speaker_means: np.ndarray
    direction: np.ndarray
    utt_speaker: dict = field(default_factory=dict)
    spoofed_utts: set = field(default_factory=set)


@dataclass
class Corpus:
    asv_store: EmbeddingStore
    cm_store: EmbeddingStore
    trials: list
    enroll: dict
    truth: CorpusTruth


def generate_corpus(cfg):
    """Returns (asv_store, cm_store, trials, enrollment_map)."""
    corpus = generate_corpus_with_truth(cfg)
    return corpus.asv_store, corpus.cm_store, corpus.trials, corpus.enroll


def generate_corpus_with_truth(cfg):
    cfg.validate()
    rng = StableRng(cfg.seed)
    n_spoof = round(cfg.spoof_fraction * cfg.utts_per_speaker)
    n_bona = cfg.utts_per_speaker - n_spoof

    means = rng.normal((cfg.n_speakers, cfg.dim))
    means = np.stack([l2_normalize(row) for row in means])
    direction = np.zeros(cfg.dim)
    direction[0] = 1.0

    asv_store = EmbeddingStore(cfg.dim)
    cm_store = EmbeddingStore(cfg.dim)
    truth = CorpusTruth(speaker_means=means, direction=direction)

    speakers = [f"spk{i:03d}" for i in range(cfg.n_speakers)]
    bona_utts = {spk: [] for spk in speakers}
    spoof_utts = {spk: [] for spk in speakers}
    shift = 0.5 * cfg.cm_gap * cfg.cm_std

    for i, spk in enumerate(speakers):
        for j in range(cfg.utts_per_speaker):
            spoofed = j >= n_bona
            utt = f"{spk}-{'s' if spoofed else 'b'}{j:03d}"
            asv = means[i] + cfg.within_std * rng.normal(cfg.dim)
            asv_store.add(utt, l2_normalize(asv).astype(np.float32))
            cm = cfg.cm_std * rng.normal(cfg.dim)
            cm[0] += -shift if spoofed else shift
            cm_store.add(utt, cm.astype(np.float32))
            truth.utt_speaker[utt] = i
            if spoofed:
                truth.spoofed_utts.add(utt)
                spoof_utts[spk].append(utt)
            else:
                bona_utts[spk].append(utt)

    enroll = {}
    test_bona = []
    for spk in speakers:
        n_en = min(cfg.n_enroll, len(bona_utts[spk]))
        enroll[spk] = bona_utts[spk][:n_en]
        test_bona.extend(bona_utts[spk][n_en:])

    trials = []
    for k, spk in enumerate(speakers):
        for utt in test_bona:
            label = TrialLabel.TARGET if truth.utt_speaker[utt] == k else TrialLabel.NONTARGET
            trials.append(TrialRecord(spk, utt, label))
        for utt in spoof_utts[spk]:
            trials.append(TrialRecord(spk, utt, TrialLabel.SPOOF))
    if cfg.max_trials > 0:
        trials = trials[: cfg.max_trials]

    return Corpus(asv_store=asv_store, cm_store=cm_store, trials=trials, enroll=enroll, truth=truth)
