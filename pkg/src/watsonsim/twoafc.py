"""Two-alternative forced choice data model, ranking head, and scoring.

A record holds a reference image, two distorted candidates, and the fraction
of human judges who picked the *second* candidate as more similar. The
ranking head turns a pair of metric distances into a smooth preference
probability for training; scoring uses the hard binary decision instead.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from watsonsim.color import Image, load_png
from watsonsim.errors import DataError, InputDomainError

# Clamp applied to probabilities before logs; keeps BCE finite when the
# sigmoid saturates.
PROB_CLAMP = 1e-7

MANIFEST_COLUMNS = ("ref", "p0", "p1", "judge")
FAMILY_COLUMNS = ("family0", "family1")
UNTAGGED = "untagged"


@dataclass(frozen=True)
class TwoAfcRecord:
    """One forced-choice judgement.

    ``judgement`` is the fraction of judges who found the second candidate
    more similar to the reference, so values above 0.5 favor ``second``.
    Family tags are optional provenance labels for grouped evaluation.
    """

    reference: Image
    first: Image
    second: Image
    judgement: float
    first_family: str | None = None
    second_family: str | None = None
    name: str | None = None

    def __post_init__(self):
        p = self.judgement
        if not (isinstance(p, (int, float)) and math.isfinite(p) and 0.0 <= p <= 1.0):
            raise InputDomainError(f"judgement {p!r} outside [0, 1]")
        shape = self.reference.pixels.shape
        space = self.reference.colorspace
        for label, img in (("first", self.first), ("second", self.second)):
            if img.pixels.shape != shape:
                raise InputDomainError(
                    f"{label} candidate shape {img.pixels.shape} != reference {shape}"
                )
            if img.colorspace is not space:
                raise InputDomainError(
                    f"{label} candidate colorspace {img.colorspace.value} != "
                    f"reference {space.value}"
                )


@dataclass(frozen=True)
class RankingHead:
    """Sigmoid slope applied to the normalized distance gap."""

    gamma: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise InputDomainError(f"gamma must be positive, got {self.gamma!r}")


def predict_preference(d0: float, d1: float, head: RankingHead) -> float:
    """Smooth probability that the first candidate is the more similar one.

    The distance gap is normalized by the pair's total distance, so scaling
    both distances by any positive constant leaves the result unchanged.
    Both distances zero is a perfect tie.
    """
    if not (d0 >= 0.0 and d1 >= 0.0):
        raise InputDomainError(f"distances must be nonnegative, got {d0!r}, {d1!r}")
    if d0 == 0.0 and d1 == 0.0:
        return 0.5
    z = head.gamma * ((d1 - d0) / (abs(d1) + abs(d0)))
    return 1.0 / (1.0 + math.exp(-z))


def binary_preference(d0: float, d1: float) -> float:
    """Hard decision in the stored-judgement convention.

    Returns the metric's estimate of the second-candidate fraction: 0.0 when
    the first candidate is strictly closer, 1.0 when the second is, 0.5 on an
    exact tie. Note the opposite orientation from :func:`predict_preference`,
    which scores the first candidate.
    """
    if d0 < d1:
        return 0.0
    if d0 > d1:
        return 1.0
    return 0.5


def bce_loss(p_hat: float, p: float) -> float:
    """Binary cross-entropy of a predicted probability against a target.

    ``p_hat`` is clamped to [PROB_CLAMP, 1 - PROB_CLAMP] before the logs so
    saturated predictions stay finite.
    """
    if not 0.0 <= p <= 1.0:
        raise InputDomainError(f"target probability {p!r} outside [0, 1]")
    q = min(max(p_hat, PROB_CLAMP), 1.0 - PROB_CLAMP)
    return -(p * math.log(q) + (1.0 - p) * math.log(1.0 - q))


def agreement_score(judgements, estimates) -> float:
    """Expected fraction of judges agreeing with the metric's decisions.

    Per record the score is p*p_hat + (1-p)*(1-p_hat); the result is the mean
    over records. Estimates are typically :func:`binary_preference` outputs
    but any probabilities work.
    """
    ps = np.asarray(judgements, dtype=np.float64)
    qs = np.asarray(estimates, dtype=np.float64)
    if ps.size == 0:
        raise InputDomainError("cannot score an empty record list")
    if ps.shape != qs.shape:
        raise InputDomainError(
            f"judgements and estimates differ in length: {ps.shape} vs {qs.shape}"
        )
    if ps.min() < 0.0 or ps.max() > 1.0:
        raise InputDomainError("judgements must lie in [0, 1]")
    return float(np.mean(ps * qs + (1.0 - ps) * (1.0 - qs)))


def human_ceiling(judgements) -> float:
    """Agreement an oracle predicting the exact judge fraction would get."""
    return agreement_score(judgements, judgements)


# ---------------------------------------------------------------------------
# dataset loading


def _require(condition: bool, message: str, path: str) -> None:
    if not condition:
        raise DataError(message, path)


def _build_record(ref, img0, img1, p, fam0, fam1, name, where) -> TwoAfcRecord:
    try:
        return TwoAfcRecord(ref, img0, img1, p, fam0, fam1, name)
    except InputDomainError as exc:
        raise DataError(str(exc), where)


def _load_csv_manifest(path: Path, strict: bool) -> list[TwoAfcRecord]:
    base = path.parent
    records: list[TwoAfcRecord] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return records
        header = tuple(cell.strip() for cell in header)
        _require(
            header[: len(MANIFEST_COLUMNS)] == MANIFEST_COLUMNS,
            f"manifest must start with columns {','.join(MANIFEST_COLUMNS)}, "
            f"got {','.join(header)}",
            str(path),
        )
        has_families = header[len(MANIFEST_COLUMNS) :][: 2] == FAMILY_COLUMNS
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            where = f"{path}:{lineno}"
            try:
                records.append(_csv_record(row, base, has_families, where))
            except DataError as exc:
                if strict:
                    raise
                warnings.warn(f"skipping 2AFC record: {exc}")
    return records


def _csv_record(row, base: Path, has_families: bool, where: str) -> TwoAfcRecord:
    needed = len(MANIFEST_COLUMNS) + (2 if has_families else 0)
    _require(len(row) >= needed, f"row has {len(row)} fields, needs {needed}", where)
    ref_rel, rel0, rel1, judge = (cell.strip() for cell in row[:4])
    try:
        p = float(judge)
    except ValueError:
        raise DataError(f"judgement {judge!r} is not a number", where)
    fam0 = fam1 = None
    if has_families:
        fam0 = row[4].strip() or None
        fam1 = row[5].strip() or None
    ref = load_png(base / ref_rel)
    img0 = load_png(base / rel0)
    img1 = load_png(base / rel1)
    return _build_record(ref, img0, img1, p, fam0, fam1, ref_rel, where)


def _tree_record(split: Path, rid: str) -> TwoAfcRecord:
    judge_path = split / "judge" / f"{rid}.csv"
    _require(judge_path.is_file(), "missing judge file", str(judge_path))
    text = judge_path.read_text().strip()
    try:
        p = float(text)
    except ValueError:
        raise DataError(f"judge file holds {text!r}, not a number", str(judge_path))
    ref = load_png(split / "ref" / f"{rid}.png")
    img0 = load_png(split / "p0" / f"{rid}.png")
    img1 = load_png(split / "p1" / f"{rid}.png")
    return _build_record(ref, img0, img1, p, None, None, rid, str(judge_path))


def _load_directory(root: Path, strict: bool) -> list[TwoAfcRecord]:
    if (root / "ref").is_dir():
        splits = [root]
    else:
        splits = sorted(
            child for child in root.iterdir()
            if child.is_dir() and (child / "ref").is_dir()
        )
    if not splits:
        raise DataError("no ref/ image folder found under dataset root", str(root))
    records: list[TwoAfcRecord] = []
    for split in splits:
        for rid in sorted(p.stem for p in (split / "ref").glob("*.png")):
            try:
                records.append(_tree_record(split, rid))
            except DataError as exc:
                if strict:
                    raise
                warnings.warn(f"skipping 2AFC record: {exc}")
    return records


def load_dataset(path: str | Path, strict: bool = True) -> list[TwoAfcRecord]:
    """Read judgement records from a CSV manifest or a directory tree.

    A file is parsed as a CSV manifest with header ``ref,p0,p1,judge`` and
    optional ``family0,family1`` columns; image paths are relative to the
    manifest's directory. A directory is walked as ``ref/ p0/ p1/`` image
    folders plus ``judge/<id>.csv`` files each holding one float; a root
    whose children are such split folders concatenates them in sorted order.

    With ``strict`` (default) the first bad record aborts the load; otherwise
    bad records are skipped with a warning.
    """
    path = Path(path)
    if path.is_dir():
        return _load_directory(path, strict)
    if path.is_file():
        return _load_csv_manifest(path, strict)
    raise DataError("dataset path does not exist", str(path))


# ---------------------------------------------------------------------------
# evaluation


def _record_families(record: TwoAfcRecord) -> set[str]:
    tags = {t for t in (record.first_family, record.second_family) if t}
    return tags or {UNTAGGED}


def evaluate_metric(distance_fn, records) -> dict:
    """Score a distance function's binary decisions against the judges.

    ``distance_fn(reference, candidate)`` maps two :class:`Image` objects to
    a scalar. Returns overall agreement, the human ceiling, and a per-family
    breakdown where a record counts under each of its distinct family tags
    (untagged records form one group).
    """
    records = list(records)
    if not records:
        raise InputDomainError("cannot evaluate on an empty record list")
    judgements = []
    estimates = []
    members: dict[str, list[int]] = {}
    for index, record in enumerate(records):
        d0 = float(distance_fn(record.reference, record.first))
        d1 = float(distance_fn(record.reference, record.second))
        judgements.append(record.judgement)
        estimates.append(binary_preference(d0, d1))
        for tag in _record_families(record):
            members.setdefault(tag, []).append(index)
    ps = np.asarray(judgements)
    qs = np.asarray(estimates)
    families = {}
    for tag in sorted(members):
        idx = members[tag]
        families[tag] = {
            "n_records": len(idx),
            "agreement": agreement_score(ps[idx], qs[idx]),
            "human_ceiling": human_ceiling(ps[idx]),
        }
    return {
        "n_records": len(records),
        "agreement": agreement_score(ps, qs),
        "human_ceiling": human_ceiling(ps),
        "families": families,
    }
