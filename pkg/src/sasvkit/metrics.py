"""Evaluation metrics: the three-EER protocol and the tandem cost.

EER convention (fixed and documented so regression numbers are stable):
a trial is accepted when its score is >= the threshold; candidate
thresholds are the distinct score values plus a reject-all sentinel
above the maximum; FRR(t) is the fraction of positives strictly below t
and FAR(t) the fraction of negatives at or above t. FAR - FRR is
non-increasing in t, and the reported EER is the linear interpolation
between the two adjacent operating points where the sign changes (or the
exact value when the difference hits zero at an operating point). The
EER is a rank statistic: any strictly increasing transform of the scores
leaves it unchanged.

The tandem cost fixes the verification branch at its target/nontarget
EER threshold and sweeps the countermeasure threshold:

    C1 = pi_tar (C_miss_cm - C_miss_asv P_miss_asv) - pi_non C_fa_asv P_fa_asv
    C2 = C_fa_cm pi_spoof (1 - P_miss_spoof_asv)
    cost(t) = C1 P_miss_cm(t) + C2 P_fa_cm(t)

and reports min_t cost(t) / min(C1, C2), in [0, 1] whenever both
weights are positive.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateCostError,
    EmptySideError,
    MissingScoreError,
    OrphanScoreError,
    SasvError,
)
from .trials import TrialLabel


@dataclass(frozen=True)
class CostModel:
    pi_tar: float
    pi_non: float
    pi_spoof: float
    c_miss_asv: float = 1.0
    c_fa_asv: float = 10.0
    c_miss_cm: float = 1.0
    c_fa_cm: float = 10.0

    def __post_init__(self):
        total = self.pi_tar + self.pi_non + self.pi_spoof
        if abs(total - 1.0) > 1e-9 or min(self.pi_tar, self.pi_non, self.pi_spoof) < 0:
            raise DegenerateCostError(f"priors must be nonnegative and sum to 1, got {total}")
        if min(self.c_miss_asv, self.c_fa_asv, self.c_miss_cm, self.c_fa_cm) <= 0:
            raise DegenerateCostError("costs must be positive")


# Evaluation-tradition defaults (configuration, not a fidelity claim).
ASVSPOOF2019_LA_COSTS = CostModel(
    pi_tar=0.9405, pi_non=0.0095, pi_spoof=0.05,
    c_miss_asv=1.0, c_fa_asv=10.0, c_miss_cm=1.0, c_fa_cm=10.0,
)

COST_PRESETS = {"asvspoof2019-la": ASVSPOOF2019_LA_COSTS}


def _operating_points(pos, neg):
    pos = np.sort(np.asarray(pos, dtype=np.float64))
    neg = np.sort(np.asarray(neg, dtype=np.float64))
    if pos.size == 0 or neg.size == 0:
        raise EmptySideError("both positive and negative scores are required")
    scores = np.unique(np.concatenate([pos, neg]))
    thresholds = np.concatenate([scores, [scores[-1] + 1.0]])
    frr = np.searchsorted(pos, thresholds, side="left") / pos.size
    far = (neg.size - np.searchsorted(neg, thresholds, side="left")) / neg.size
    return thresholds, far, frr


def det_points(pos_scores, neg_scores):
    """(threshold, FAR, FRR) triples at every operating point."""
    thresholds, far, frr = _operating_points(pos_scores, neg_scores)
    return list(zip(thresholds.tolist(), far.tolist(), frr.tolist()))


def compute_eer(pos_scores, neg_scores):
    """Equal error rate and its threshold; see the module docstring for
    the tie and interpolation conventions."""
    thresholds, far, frr = _operating_points(pos_scores, neg_scores)
    diff = far - frr
    k = int(np.argmax(diff <= 0.0))
    if diff[k] == 0.0:
        return float(far[k]), float(thresholds[k])
    lam = diff[k - 1] / (diff[k - 1] - diff[k])
    eer = frr[k - 1] + lam * (frr[k] - frr[k - 1])
    threshold = thresholds[k - 1] + lam * (thresholds[k] - thresholds[k - 1])
    return float(eer), float(threshold)


def partition_scores(trials, scores):
    """Split per-trial scores into the three (positive, negative) pools.

    SV:   target vs nontarget
    SPF:  target vs spoof
    SASV: target vs nontarget + spoof
    """
    table = {}
    for rec in scores:
        if rec.key in table:
            raise OrphanScoreError(*rec.key)
        table[rec.key] = rec.score
    pools = {TrialLabel.TARGET: [], TrialLabel.NONTARGET: [], TrialLabel.SPOOF: []}
    seen = set()
    for trial in trials:
        key = (trial.enroll_model, trial.test_utt)
        if trial.label is None:
            raise SasvError(f"trial ({key[0]!r}, {key[1]!r}) has no label; evaluation needs labeled trials")
        if key not in table:
            raise MissingScoreError(*key)
        pools[trial.label].append(table[key])
        seen.add(key)
    for key in table:
        if key not in seen:
            raise OrphanScoreError(*key)
    tar = pools[TrialLabel.TARGET]
    non = pools[TrialLabel.NONTARGET]
    spf = pools[TrialLabel.SPOOF]
    return {
        "sv": (tar, non),
        "spf": (tar, spf),
        "sasv": (tar, non + spf),
        "counts": (len(tar), len(non), len(spf)),
    }


@dataclass
class EvalReport:
    sv_eer: float
    spf_eer: float
    sasv_eer: float
    sv_threshold: float
    spf_threshold: float
    sasv_threshold: float
    n_target: int
    n_nontarget: int
    n_spoof: int
    min_tdcf: float | None = None
    det: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "sv_eer": self.sv_eer,
            "spf_eer": self.spf_eer,
            "sasv_eer": self.sasv_eer,
            "thresholds": {
                "sv": self.sv_threshold,
                "spf": self.spf_threshold,
                "sasv": self.sasv_threshold,
            },
            "counts": {
                "target": self.n_target,
                "nontarget": self.n_nontarget,
                "spoof": self.n_spoof,
            },
        }
        if self.min_tdcf is not None:
            out["min_tdcf"] = self.min_tdcf
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self, system="system"):
        lines = [
            f"{'':<16}{'SV-EER/%':>10}{'SPF-EER/%':>11}{'SASV-EER/%':>12}",
            f"{system:<16}{100 * self.sv_eer:>10.2f}{100 * self.spf_eer:>11.2f}{100 * self.sasv_eer:>12.2f}",
            "",
            f"trials: target={self.n_target} nontarget={self.n_nontarget} spoof={self.n_spoof}",
        ]
        if self.min_tdcf is not None:
            lines.append(f"min t-DCF: {self.min_tdcf:.5f}")
        return "\n".join(lines) + "\n"


def evaluate(trials, scores, cost_model=None, asv_scores=None, cm_scores=None, with_det=False):
    """Three-EER report over labeled trials plus optional tandem cost.

    The tandem cost needs per-trial scores from each branch: ``asv_scores``
    partitions by trial label, ``cm_scores`` are grouped per test
    utterance (bona fide = utterances of target/nontarget trials, spoof =
    utterances of spoof trials).
    """
    parts = partition_scores(trials, scores)
    n_tar, n_non, n_spf = parts["counts"]
    assert len(parts["sasv"][0]) + len(parts["sasv"][1]) == (n_tar + n_non) + (n_tar + n_spf) - n_tar

    sv_eer, sv_thr = compute_eer(*parts["sv"])
    spf_eer, spf_thr = compute_eer(*parts["spf"])
    sasv_eer, sasv_thr = compute_eer(*parts["sasv"])
    report = EvalReport(
        sv_eer=sv_eer,
        spf_eer=spf_eer,
        sasv_eer=sasv_eer,
        sv_threshold=sv_thr,
        spf_threshold=spf_thr,
        sasv_threshold=sasv_thr,
        n_target=n_tar,
        n_nontarget=n_non,
        n_spoof=n_spf,
    )
    if with_det:
        report.det = {
            "sv": det_points(*parts["sv"]),
            "spf": det_points(*parts["spf"]),
            "sasv": det_points(*parts["sasv"]),
        }
    if cost_model is not None and asv_scores is not None and cm_scores is not None:
        asv_parts = partition_scores(trials, asv_scores)
        bona_cm, spoof_cm = _utterance_cm_pools(trials, cm_scores)
        report.min_tdcf = min_tdcf(
            bona_cm,
            spoof_cm,
            asv_parts["sv"][0],
            asv_parts["sv"][1],
            asv_parts["spf"][1],
            cost_model,
        )
    return report


def _utterance_cm_pools(trials, cm_scores):
    """Collapse per-trial CM scores to per-utterance bona fide / spoof pools."""
    table = {}
    for rec in cm_scores:
        prev = table.setdefault(rec.test_utt, rec.score)
        if prev != rec.score:
            raise OrphanScoreError(rec.enroll_model, rec.test_utt)
    bona, spoof = {}, {}
    for trial in trials:
        if trial.test_utt not in table:
            raise MissingScoreError(trial.enroll_model, trial.test_utt)
        bucket = spoof if trial.label == TrialLabel.SPOOF else bona
        bucket[trial.test_utt] = table[trial.test_utt]
    return list(bona.values()), list(spoof.values())


def min_tdcf(bona_cm, spoof_cm, tar_asv, non_asv, spoof_asv, cost):
    """Minimum normalized tandem detection cost; see module docstring."""
    bona_cm = np.asarray(bona_cm, dtype=np.float64)
    spoof_cm = np.asarray(spoof_cm, dtype=np.float64)
    tar_asv = np.asarray(tar_asv, dtype=np.float64)
    non_asv = np.asarray(non_asv, dtype=np.float64)
    spoof_asv = np.asarray(spoof_asv, dtype=np.float64)
    if min(bona_cm.size, spoof_cm.size, tar_asv.size, non_asv.size, spoof_asv.size) == 0:
        raise EmptySideError("tandem cost needs nonempty pools on every side")

    _, asv_threshold = compute_eer(tar_asv, non_asv)
    p_miss_asv = float(np.mean(tar_asv < asv_threshold))
    p_fa_asv = float(np.mean(non_asv >= asv_threshold))
    p_miss_spoof_asv = float(np.mean(spoof_asv < asv_threshold))

    c1 = cost.pi_tar * (cost.c_miss_cm - cost.c_miss_asv * p_miss_asv) - cost.pi_non * cost.c_fa_asv * p_fa_asv
    c2 = cost.c_fa_cm * cost.pi_spoof * (1.0 - p_miss_spoof_asv)
    if min(c1, c2) <= 0.0:
        raise DegenerateCostError(
            f"tandem weights not both positive (C1={c1:.6g}, C2={c2:.6g}) at the fixed ASV point"
        )

    thresholds, p_fa_cm, p_miss_cm = _operating_points(bona_cm, spoof_cm)
    costs = c1 * p_miss_cm + c2 * p_fa_cm
    return float(np.min(costs) / min(c1, c2))
