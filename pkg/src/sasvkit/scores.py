"""Score files and score-level fusion.

Score files are TSV ``<enroll_model>\\t<test_utt>\\t<score>`` with fixed
``%.8f`` formatting so regression files are byte-stable.
"""

from dataclasses import dataclass
from pathlib import Path

from .exceptions import (
    DuplicateIdError,
    KeyMismatchError,
    LengthMismatchError,
    MalformedLineError,
)


@dataclass(frozen=True)
class ScoreRecord:
    enroll_model: str
    test_utt: str
    score: float

    @property
    def key(self):
        return (self.enroll_model, self.test_utt)


def write_scores(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(f"{rec.enroll_model}\t{rec.test_utt}\t{rec.score:.8f}\n")


def read_scores(path):
    records = []
    seen = set()
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise MalformedLineError(line_no, f"expected 3 tab-separated fields, got {len(fields)}")
        enroll, test, raw = fields
        try:
            score = float(raw)
        except ValueError:
            raise MalformedLineError(line_no, f"bad score value {raw!r}") from None
        if (enroll, test) in seen:
            raise DuplicateIdError((enroll, test))
        seen.add((enroll, test))
        records.append(ScoreRecord(enroll, test, score))
    return records


def fuse_scores(score_sets, weights):
    """Weighted sum of aligned score sets.

    All sets must cover exactly the same (enroll, test) pairs; output
    order follows the first set. Raises LengthMismatchError when the
    weight count differs from the set count and KeyMismatchError on any
    coverage difference.
    """
    if len(score_sets) != len(weights):
        raise LengthMismatchError(
            f"{len(score_sets)} score sets but {len(weights)} weights"
        )
    if not score_sets:
        return []
    maps = []
    base_keys = [rec.key for rec in score_sets[0]]
    base_set = set(base_keys)
    for i, records in enumerate(score_sets):
        table = {rec.key: rec.score for rec in records}
        if len(table) != len(records):
            raise DuplicateIdError(f"duplicate trial key in score set {i}")
        if set(table) != base_set:
            missing = (base_set - set(table)) or (set(table) - base_set)
            raise KeyMismatchError(f"score set {i} coverage differs, e.g. {next(iter(missing))}")
        maps.append(table)
    fused = []
    for key in base_keys:
        total = sum(w * table[key] for w, table in zip(weights, maps))
        fused.append(ScoreRecord(key[0], key[1], total))
    return fused
