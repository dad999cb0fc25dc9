"""Answer generation and three-part answer validation.

Validation order is fixed: entity grounding first, then relation
consistency, then unanimous voting — the recorded rejection reason is the
first check that fails. Entity grounding is a deterministic surface match
(after eval-normalization) against document prose, table cells, and the
question-conditioned image captions; numbers are additionally extracted by
a digit scan so numeric checks never depend on the backend. Relation
consistency is the weakest testable reading: subject and object must
co-occur inside one source document. Relations are extracted from the long
answer, where they actually occur; the vote compares short answers only.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import Document
from .evalkit import normalize_answer
from .gateway import Gateway, GatewayError, PromptSpec, Sampling
from .prompts import TASK_ENTITIES, TASK_RELATIONS
from .render import document_surface_text, render_group

__all__ = [
    "AnswerPair",
    "AnswerVerdict",
    "Entity",
    "RelationTriple",
    "UnparseableAnswer",
    "VoteResult",
    "extract_entities",
    "extract_relations",
    "generate_answer",
    "parse_answer_pair",
    "validate_answer",
    "vote_consistency",
]

SHORT_WORD_CAP = 10

ENTITY_KINDS = frozenset(
    {"person", "org", "location", "date", "number", "work", "product", "event", "other"}
)
_GROUNDED_KINDS = ENTITY_KINDS - {"other"}


class UnparseableAnswer(Exception):
    pass


@dataclass(frozen=True)
class AnswerPair:
    long: str
    short: str

    def __post_init__(self) -> None:
        if not self.short:
            raise ValueError("short answer must be nonempty")


@dataclass(frozen=True)
class Entity:
    surface: str
    kind: str
    source: str  # "answer" or "doc:<id>"


@dataclass(frozen=True)
class RelationTriple:
    subject: str
    predicate: str
    object: str
    source: str


@dataclass(frozen=True)
class VoteResult:
    accepted: bool
    consensus: str | None  # first generation's short answer when accepted
    shorts: tuple[str | None, ...]


@dataclass(frozen=True)
class AnswerVerdict:
    passed: bool
    reason: str | None  # ner_mismatch | relation_mismatch | vote_split | ner_failure
    votes: int


_LONG_RE = re.compile(r"^\s*long\s*:\s*(.*)$", re.IGNORECASE)
_SHORT_RE = re.compile(r"^\s*short\s*:\s*(.*)$", re.IGNORECASE)


def parse_answer_pair(text: str, short_cap: int = SHORT_WORD_CAP) -> AnswerPair:
    """Parse the Long:/Short: delimited response format."""
    long_answer = None
    short_answer = None
    for line in text.splitlines():
        if (m := _LONG_RE.match(line)) and long_answer is None:
            long_answer = m.group(1).strip()
        elif (m := _SHORT_RE.match(line)) and short_answer is None:
            short_answer = " ".join(m.group(1).split())
    if not long_answer or not short_answer:
        raise UnparseableAnswer("response missing Long:/Short: lines")
    if len(short_answer.split()) > short_cap:
        raise UnparseableAnswer(
            f"short answer exceeds {short_cap} words: {short_answer!r}"
        )
    return AnswerPair(long=long_answer, short=short_answer)


def _answer_spec(question: str, docs: Sequence[Document], captions: Mapping[str, str], n: int) -> PromptSpec:
    return PromptSpec(
        "answer_gen",
        {"question": question, "documents": render_group(docs, captions)},
        attachments=tuple(
            (doc.id, img.uri) for doc in docs for img in doc.image_blocks()
        ),
        sampling=Sampling(n=n),
    )


def generate_answer(
    question: str,
    docs: Sequence[Document],
    captions: Mapping[str, str],
    gateway: Gateway,
    short_cap: int = SHORT_WORD_CAP,
) -> AnswerPair:
    """Generate the long/short answer pair with captions already in place."""
    response = gateway.complete(_answer_spec(question, docs, captions, n=1))
    return parse_answer_pair(response.texts[0], short_cap)


_NUMBER_RE = re.compile(r"\d[\d,]*(?:\.\d+)?")
_ENTITY_LINE_RE = re.compile(r"^\s*(.+?)\s*\|\s*([a-z_]+)\s*$")


def extract_entities(
    text: str,
    source: str,
    gateway: Gateway | None = None,
) -> list[Entity]:
    """Numbers by digit scan, everything else via the judge extractor.

    Passing ``gateway=None`` runs the digit scan only.
    """
    if not text.strip():
        return []
    entities: list[Entity] = []
    seen: set[tuple[str, str]] = set()

    def add(surface: str, kind: str) -> None:
        key = (surface, kind)
        if surface and key not in seen:
            seen.add(key)
            entities.append(Entity(surface, kind, source))

    for match in _NUMBER_RE.finditer(text):
        add(match.group(), "number")
    if gateway is not None:
        spec = PromptSpec("judge", {"task": TASK_ENTITIES, "context": text})
        for line in gateway.complete(spec).texts[0].splitlines():
            if m := _ENTITY_LINE_RE.match(line):
                surface, kind = m.group(1), m.group(2)
                add(surface, kind if kind in ENTITY_KINDS else "other")
    return entities


_TRIPLE_RE = re.compile(r"^\s*\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*,\s*([^()]+?)\s*\)\s*$")


def extract_relations(
    text: str,
    source: str,
    gateway: Gateway,
    counters: Counter | None = None,
) -> list[RelationTriple]:
    """Line-delimited (subject, predicate, object) triples from the backend.

    Unparseable lines are skipped and counted, never fatal.
    """
    if not text.strip():
        return []
    spec = PromptSpec("judge", {"task": TASK_RELATIONS, "context": text})
    triples = []
    for line in gateway.complete(spec).texts[0].splitlines():
        if not line.strip():
            continue
        if (m := _TRIPLE_RE.match(line)) and all(m.group(i).strip() for i in (1, 2, 3)):
            triples.append(
                RelationTriple(m.group(1), m.group(2), m.group(3), source)
            )
        elif counters is not None:
            counters["relation_lines_skipped"] += 1
    return triples


def vote_consistency(
    question: str,
    docs: Sequence[Document],
    captions: Mapping[str, str],
    gateway: Gateway,
    k: int = 5,
    short_cap: int = SHORT_WORD_CAP,
) -> VoteResult:
    """Accept only if all k sampled short answers agree after normalization.

    The consensus is the first generation's short answer; acceptance
    requires all-equal, so the consensus is order-independent up to
    normalization.
    """
    if k < 2:
        raise ValueError("vote needs k >= 2")
    response = gateway.complete(_answer_spec(question, docs, captions, n=k))
    shorts: list[str | None] = []
    for text in response.texts:
        try:
            shorts.append(parse_answer_pair(text, short_cap).short)
        except UnparseableAnswer:
            shorts.append(None)
    normalized = [tuple(normalize_answer(s)) if s is not None else None for s in shorts]
    accepted = None not in normalized and len(set(normalized)) == 1
    return VoteResult(
        accepted=accepted,
        consensus=shorts[0] if accepted else None,
        shorts=tuple(shorts),
    )


def _grounding_texts(
    docs: Sequence[Document], captions: Mapping[str, str]
) -> dict[str, list[str]]:
    """Per-document normalized token lists for surface matching."""
    return {
        doc.id: normalize_answer(document_surface_text(doc, captions)) for doc in docs
    }


def _contains_tokens(haystack: list[str], needle: list[str]) -> bool:
    if not needle:
        return True
    limit = len(haystack) - len(needle)
    return any(haystack[i : i + len(needle)] == needle for i in range(limit + 1))


def validate_answer(
    pair: AnswerPair,
    question: str,
    docs: Sequence[Document],
    captions: Mapping[str, str],
    gateway: Gateway,
    k: int = 5,
    counters: Counter | None = None,
) -> AnswerVerdict:
    """Run the entity, relation, and voting checks in fixed order.

    Captions must be precomputed: this function issues no caption requests.
    """
    grounding = _grounding_texts(docs, captions)

    try:
        entities = extract_entities(pair.short, "answer", gateway)
    except GatewayError:
        return AnswerVerdict(False, "ner_failure", 0)
    for entity in entities:
        if entity.kind not in _GROUNDED_KINDS:
            continue
        needle = normalize_answer(entity.surface)
        if not any(_contains_tokens(tokens, needle) for tokens in grounding.values()):
            return AnswerVerdict(False, "ner_mismatch", 0)

    triples = extract_relations(pair.long, "answer", gateway, counters)
    for triple in triples:
        subject = normalize_answer(triple.subject)
        obj = normalize_answer(triple.object)
        if not any(
            _contains_tokens(tokens, subject) and _contains_tokens(tokens, obj)
            for tokens in grounding.values()
        ):
            return AnswerVerdict(False, "relation_mismatch", 0)

    vote = vote_consistency(question, docs, captions, gateway, k)
    if not vote.accepted:
        return AnswerVerdict(False, "vote_split", k)
    return AnswerVerdict(True, None, k)
