"""Answer metrics, inter-annotator agreement, and benchmark curation.

Implements the extractive-QA scoring convention (exact match and token-level
F1 over normalized answers), Fleiss' kappa for fixed-rater categorical
judgments, the mean-score curation rule used to filter annotated candidates,
and modality-stratified accuracy reports.

Normalization note: EM/F1 depend on the normalizer. We follow the common
extractive-QA recipe (lowercase, remove punctuation, drop the articles
a/an/the, collapse whitespace). Both metrics are symmetric in their
arguments, and F1 >= EM always holds.
"""

from __future__ import annotations

import random
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

__all__ = [
    "DegenerateMatrix",
    "IdMismatch",
    "StratifiedReport",
    "curate_benchmark",
    "exact_match",
    "fleiss_kappa",
    "normalize_answer",
    "stratified_report",
    "token_f1",
]

_ARTICLES = {"a", "an", "the"}
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


class DegenerateMatrix(Exception):
    """Raised when expected chance agreement is 1 (single category ever used).

    Kappa is undefined in this case; callers that want a sentinel value must
    catch this instead of receiving a number.
    """


class IdMismatch(Exception):
    """Prediction, gold, and sample ids do not line up."""


def normalize_answer(text: str) -> list[str]:
    """Normalize an answer string into a token list.

    Lowercase, strip all punctuation characters, drop English articles,
    and split on whitespace.

    >>> normalize_answer("The USA.")
    ['usa']
    """
    lowered = text.lower().translate(_PUNCT_TABLE)
    return [tok for tok in lowered.split() if tok not in _ARTICLES]


def exact_match(pred: str, gold: str) -> int:
    """1 iff the normalized token sequences are identical, else 0."""
    return int(normalize_answer(pred) == normalize_answer(gold))


def token_f1(pred: str, gold: str) -> float:
    """Token-multiset F1 between normalized answers.

    Harmonic mean of precision and recall over token multisets. Both sides
    empty scores 1.0; exactly one side empty scores 0.0.
    """
    pred_tokens = normalize_answer(pred)
    gold_tokens = normalize_answer(gold)
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(pred_tokens)
    recall = num_same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def fleiss_kappa(matrix: Sequence[Sequence[int]]) -> float:
    """Fleiss' kappa for a judgment matrix.

    ``matrix[i][j]`` counts how many raters assigned item ``i`` to category
    ``j``. Every row must sum to the same number of raters ``n``, with
    ``n >= 2`` and at least two items.

    Computes ``kappa = (Pbar - Pe) / (1 - Pe)`` where ``Pbar`` is the mean
    per-item observed agreement ``(sum_j m_ij^2 - n) / (n (n - 1))`` and
    ``Pe = sum_j p_j^2`` is the chance agreement from the marginal category
    proportions. Perfect observed agreement with ``Pe < 1`` returns exactly
    1.0.

    Raises:
        DegenerateMatrix: if all mass falls in one category (``Pe == 1``).
        ValueError: on malformed input (ragged rows, varying row sums,
            fewer than 2 items or raters, negative counts).
    """
    rows = [list(row) for row in matrix]
    if len(rows) < 2:
        raise ValueError("need at least 2 items")
    k = len(rows[0])
    if any(len(row) != k for row in rows):
        raise ValueError("ragged judgment matrix")
    if any(c < 0 for row in rows for c in row):
        raise ValueError("negative count in judgment matrix")
    n = sum(rows[0])
    if any(sum(row) != n for row in rows):
        raise ValueError("row sums differ (raters must be constant)")
    if n < 2:
        raise ValueError("need at least 2 raters")

    n_items = len(rows)
    p_observed = sum(
        (sum(c * c for c in row) - n) / (n * (n - 1)) for row in rows
    ) / n_items
    totals = [sum(row[j] for row in rows) for j in range(k)]
    proportions = [t / (n_items * n) for t in totals]
    p_expected = sum(p * p for p in proportions)
    if p_expected >= 1.0:
        raise DegenerateMatrix("all judgments in a single category")
    return (p_observed - p_expected) / (1.0 - p_expected)


def curate_benchmark(
    candidates: Sequence[str],
    scores: Mapping[str, Sequence[int]],
    threshold: float = 0.75,
    target_n: int | None = None,
    seed: int = 0,
) -> list[str]:
    """Filter annotated candidates by mean score, then subsample.

    A candidate is kept iff the mean of its 0/1 annotator scores is at least
    ``threshold``. If more than ``target_n`` survive, a seeded uniform sample
    without replacement reduces the kept set to exactly ``target_n``.

    With three binary annotators the default 0.75 threshold keeps only
    unanimously-valid candidates (attainable means are 0, 1/3, 2/3, 1).

    Args:
        candidates: candidate ids, order defines the sampling universe.
        scores: candidate id -> per-annotator 0/1 scores (each nonempty).
        threshold: minimum mean score to keep.
        target_n: final size cap; ``None`` keeps everything that passed.
        seed: RNG seed for the subsample.
    """
    kept = []
    for cid in candidates:
        cand_scores = scores[cid]
        if not cand_scores:
            raise ValueError(f"candidate {cid!r} has no scores")
        if sum(cand_scores) / len(cand_scores) >= threshold:
            kept.append(cid)
    if target_n is not None and len(kept) > target_n:
        kept = random.Random(seed).sample(kept, target_n)
    return kept


@dataclass
class StratifiedReport:
    """EM/F1 overall plus per-modality-subset EM.

    Subset EM is ``None`` when the subset is empty (``n == 0``).
    """

    em: float
    f1: float
    n: int
    subsets: dict[str, tuple[int, float | None]] = field(default_factory=dict)


def stratified_report(
    preds: Mapping[str, str],
    golds: Mapping[str, str],
    modalities: Mapping[str, Iterable[str]],
) -> StratifiedReport:
    """Score predictions overall and stratified by modality membership.

    Strata: ``has_image`` / ``has_table`` (samples whose modality set
    includes that modality, possibly among others) and ``has_both``.

    Args:
        preds: sample id -> predicted answer.
        golds: sample id -> gold answer; ids must equal ``preds`` ids.
        modalities: sample id -> modality names for that sample.

    Raises:
        IdMismatch: if the three id sets do not agree.
        ValueError: if there are no samples.
    """
    ids = sorted(preds)
    if set(golds) != set(ids) or not set(modalities) >= set(ids):
        raise IdMismatch("prediction/gold/sample ids differ")
    if not ids:
        raise ValueError("no samples to score")

    em_by_id = {i: exact_match(preds[i], golds[i]) for i in ids}
    overall_em = sum(em_by_id.values()) / len(ids)
    overall_f1 = sum(token_f1(preds[i], golds[i]) for i in ids) / len(ids)

    def subset_em(members: list[str]) -> tuple[int, float | None]:
        if not members:
            return 0, None
        return len(members), sum(em_by_id[i] for i in members) / len(members)

    flags = {i: frozenset(modalities[i]) for i in ids}
    report = StratifiedReport(em=overall_em, f1=overall_f1, n=len(ids))
    report.subsets["has_image"] = subset_em([i for i in ids if "image" in flags[i]])
    report.subsets["has_table"] = subset_em([i for i in ids if "table" in flags[i]])
    report.subsets["has_both"] = subset_em(
        [i for i in ids if {"image", "table"} <= flags[i]]
    )
    return report


_WS_RE = re.compile(r"\s+")


def normalize_question(text: str) -> str:
    """Case/whitespace normalization used for question deduplication."""
    return _WS_RE.sub(" ", text.strip().casefold())
