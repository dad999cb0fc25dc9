"""Few-shot selection, question generation, and the question gates.

The gate order is fixed and enforced by the pipeline: duplicate check,
decomposition, multihop classification, optional conjunction-free rephrase,
then the single-modality ablation. A question reaches answer generation only
after every gate has passed.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from enum import Enum
from typing import Collection, Mapping, Sequence

from .corpus import Document
from .evalkit import normalize_question
from .gateway import Gateway, PromptSpec
from .prompts import TASK_PROJECTION, TASK_SINGLE_DOC
from .render import render_document, render_group, truncate_group

__all__ = [
    "CandidateQuestion",
    "DuplicateExhausted",
    "Exemplar",
    "FEWSHOT_MAX",
    "HopClass",
    "HopVerdict",
    "ModalityVerdict",
    "NotEnoughExemplars",
    "RephraseFailed",
    "UnparseableDecomposition",
    "UnparseableJudgment",
    "check_multimodal",
    "classify_multihop",
    "decompose_question",
    "generate_question",
    "has_conjoined_clauses",
    "rephrase_concise",
    "select_fewshot",
]

FEWSHOT_MAX = 3


class NotEnoughExemplars(Exception):
    pass


class DuplicateExhausted(Exception):
    """All generation attempts repeated an earlier question for this group."""


class UnparseableDecomposition(Exception):
    pass


class UnparseableJudgment(Exception):
    """A yes/no probe returned neither yes nor no."""


class RephraseFailed(Exception):
    """Rephrased question still conjoined, or no longer multihop."""


@dataclass(frozen=True)
class Exemplar:
    """A worked example: full rendered source pages plus question and answer."""

    id: str
    documents: tuple[str, ...]
    question: str
    answer: str

    def __post_init__(self) -> None:
        if not self.question:
            raise ValueError("exemplar question must be nonempty")
        if len(self.documents) < 2:
            raise ValueError("exemplar needs at least 2 documents")


@dataclass(frozen=True)
class CandidateQuestion:
    group_ref: tuple[str, ...]
    text: str
    fewshot_ids: tuple[str, ...]
    prior_attempts: tuple[str, ...]
    attempts: int


class HopClass(Enum):
    UNRELATED_FACTS = "unrelated_facts"
    RELATED_OPEN_ENDED = "related_open_ended"
    CONCISE_MULTIHOP = "concise_multihop"


@dataclass(frozen=True)
class HopVerdict:
    hop_class: HopClass
    subquestions: tuple[tuple[str, bool], ...]  # (text, single_doc_answerable)
    retained_text: str | None

    def __post_init__(self) -> None:
        if self.hop_class is HopClass.UNRELATED_FACTS:
            assert all(flag for _, flag in self.subquestions)
        if self.hop_class is HopClass.CONCISE_MULTIHOP:
            assert self.retained_text


@dataclass(frozen=True)
class ModalityVerdict:
    passed: bool
    modalities: frozenset[str] | None
    sufficient_projection: str | None  # set when a single modality sufficed


def select_fewshot(pool: Sequence[Exemplar], n: int, seed: int) -> list[Exemplar]:
    """Seeded uniform sample of up to three exemplars, without replacement."""
    if not 0 <= n <= FEWSHOT_MAX:
        raise NotEnoughExemplars(f"shot count must be 0..{FEWSHOT_MAX}, got {n}")
    if n > len(pool):
        raise NotEnoughExemplars(f"asked for {n} exemplars, pool has {len(pool)}")
    return random.Random(seed).sample(list(pool), n)


def _render_exemplars(shots: Sequence[Exemplar]) -> str:
    if not shots:
        return "(none)"
    parts = []
    for shot in shots:
        parts.append("\n".join(shot.documents))
        parts.append(f"Q: {shot.question}")
        parts.append(f"A: {shot.answer}")
    return "\n".join(parts)


def generate_question(
    docs: Sequence[Document],
    shots: Sequence[Exemplar],
    prior: Sequence[str],
    gateway: Gateway,
    max_attempts: int = 3,
    context_chars: int = 24000,
    seen_global: Collection[str] = (),
) -> CandidateQuestion:
    """Generate one question for a group, retrying on duplicates.

    A response counts as a duplicate when its case/whitespace-normalized
    text matches an earlier question for this group (``prior``) or any
    question already in the dataset (``seen_global``, pre-normalized). On a
    duplicate the prompt is reissued with this group's previous questions
    listed, up to ``max_attempts`` times.
    """
    fitted = truncate_group(docs, context_chars)
    rendered_docs = render_group(fitted)
    rendered_shots = _render_exemplars(shots)
    seen = {normalize_question(p) for p in prior} | set(seen_global)
    attempted: list[str] = list(prior)

    for attempt in range(1, max_attempts + 1):
        slots = {"documents": rendered_docs, "examples": rendered_shots}
        if attempted:
            listing = "\n".join(f"- {p}" for p in attempted)
            slots["prior_questions"] = (
                f"Already generated for these documents (produce a different question):\n{listing}\n"
            )
        if attempt > 1:
            # distinct cache key per retry, else the response cache would
            # replay the same duplicate forever
            slots["attempt"] = f"retry {attempt}"
        response = gateway.complete(PromptSpec("question_gen", slots))
        text = response.texts[0].strip()
        if text and normalize_question(text) not in seen:
            return CandidateQuestion(
                group_ref=tuple(d.id for d in docs),
                text=text,
                fewshot_ids=tuple(s.id for s in shots),
                prior_attempts=tuple(attempted),
                attempts=attempt,
            )
        if text:
            seen.add(normalize_question(text))
            if text not in attempted:
                attempted.append(text)
    raise DuplicateExhausted(f"no fresh question after {max_attempts} attempts")


_LINE_PREFIX = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s*")


def decompose_question(question: str, gateway: Gateway) -> list[str]:
    """Split a question into sub-questions via the decomposition template."""
    response = gateway.complete(PromptSpec("decompose", {"question": question}))
    subs = []
    for line in response.texts[0].splitlines():
        cleaned = _LINE_PREFIX.sub("", line).strip()
        if cleaned:
            subs.append(cleaned)
    if not subs:
        raise UnparseableDecomposition("decomposition produced no sub-questions")
    return subs


def judge_yes_no(gateway: Gateway, task: str, context: str, question: str) -> bool:
    """Ask a yes/no probe; the verdict is the first token, case-insensitive."""
    spec = PromptSpec("judge", {"task": task, "context": context, "question": question})
    text = gateway.complete(spec).texts[0].strip()
    first = text.split()[0].strip(".,:;!").lower() if text.split() else ""
    if first.startswith("yes"):
        return True
    if first.startswith("no"):
        return False
    raise UnparseableJudgment(f"expected yes/no, got {text[:60]!r}")


_CONJ_MARKERS = (", and ", "; ", " and ")
_CLAUSE_CUES = {
    "who", "whom", "whose", "what", "when", "where", "which", "why", "how",
    "is", "are", "was", "were", "do", "does", "did", "can", "could", "will",
    "would", "has", "have", "had",
}


def _opens_clause(fragment: str) -> bool:
    tokens = re.findall(r"[a-z']+", fragment.lower())
    return any(tok in _CLAUSE_CUES for tok in tokens[:3])


def has_conjoined_clauses(text: str) -> bool:
    """True when a conjunction marker joins two interrogative clauses.

    Plain noun coordination ("France and Germany") does not count: both
    sides of the marker must read as question clauses.
    """
    lowered = text.lower()
    for marker in _CONJ_MARKERS:
        start = 0
        while (pos := lowered.find(marker, start)) != -1:
            left, right = text[:pos], text[pos + len(marker):]
            if _opens_clause(right) and any(
                tok in _CLAUSE_CUES for tok in re.findall(r"[a-z']+", left.lower())
            ):
                return True
            start = pos + len(marker)
    return False


def classify_multihop(
    question: str,
    subquestions: Sequence[str],
    docs: Sequence[Document],
    gateway: Gateway,
) -> HopVerdict:
    """Sort a question into the three-way multihop taxonomy.

    Each sub-question is probed against each document alone. If every part
    is answerable from some single document the question merely joins
    unrelated facts and is rejected. Otherwise a conjoined surface form
    marks it open-ended (to be rephrased); a conjunction-free form passes
    as a concise multihop question.
    """
    assert len(docs) >= 2, "groups are 2-3 documents by construction"
    flags = []
    for sub in subquestions:
        single = any(
            judge_yes_no(gateway, TASK_SINGLE_DOC, render_document(doc), sub)
            for doc in docs
        )
        flags.append((sub, single))
    if all(flag for _, flag in flags):
        return HopVerdict(HopClass.UNRELATED_FACTS, tuple(flags), None)
    if has_conjoined_clauses(question):
        return HopVerdict(HopClass.RELATED_OPEN_ENDED, tuple(flags), None)
    return HopVerdict(HopClass.CONCISE_MULTIHOP, tuple(flags), question)


def rephrase_concise(
    question: str,
    verdict: HopVerdict,
    docs: Sequence[Document],
    gateway: Gateway,
) -> str:
    """Rewrite an open-ended question without conjunctions.

    Keeps the cross-document parts, then re-runs the multihop probe on the
    revision; anything still conjoined or no longer multihop fails.
    """
    cross_doc = [sub for sub, single in verdict.subquestions if not single]
    parts = "\n".join(cross_doc) if cross_doc else question
    spec = PromptSpec("rephrase", {"question": question, "parts": parts})
    revised = gateway.complete(spec).texts[0].strip()
    if not revised:
        raise RephraseFailed("empty rephrase")
    if has_conjoined_clauses(revised):
        raise RephraseFailed("rephrased question still conjoins clauses")
    re_subs = decompose_question(revised, gateway)
    re_verdict = classify_multihop(revised, re_subs, docs, gateway)
    if re_verdict.hop_class is not HopClass.CONCISE_MULTIHOP:
        raise RephraseFailed("rephrased question failed the multihop probe")
    return revised


_PROJECTIONS = ("text", "image", "table")
_VALID_MODALITIES = frozenset(_PROJECTIONS)


def _present_modalities(docs: Sequence[Document]) -> frozenset[str]:
    present = set()
    for doc in docs:
        if doc.text_blocks():
            present.add("text")
        if doc.image_blocks():
            present.add("image")
        if doc.table_blocks():
            present.add("table")
    return frozenset(present)


def check_multimodal(
    question: str,
    docs: Sequence[Document],
    gateway: Gateway,
) -> ModalityVerdict:
    """Single-modality ablation gate.

    The group is projected to text-only, image-captions-only, and
    tables-only views; if the judge can answer the question from any one
    projection alone the question is rejected. On pass, a follow-up probe
    records which modalities the question actually requires (falling back
    to the modalities present in the group if the probe is unparseable).
    """
    for name in _PROJECTIONS:
        projection = render_group(docs, include={name})
        if judge_yes_no(gateway, TASK_PROJECTION, projection, question):
            return ModalityVerdict(False, None, name)

    probe = gateway.complete(
        PromptSpec(
            "modality_probe",
            {"question": question, "documents": render_group(docs)},
        )
    )
    tokens = re.findall(r"[a-z]+", probe.texts[0].lower())
    required = frozenset(t for t in tokens if t in _VALID_MODALITIES)
    if len(required) < 2:
        required = _present_modalities(docs)
    return ModalityVerdict(True, required, None)


def load_exemplars(records: Sequence[Mapping]) -> list[Exemplar]:
    """Build exemplars from parsed pool-file records."""
    return [
        Exemplar(
            id=str(rec["id"]),
            documents=tuple(rec["documents"]),
            question=str(rec["question"]),
            answer=str(rec["answer"]),
        )
        for rec in records
    ]
