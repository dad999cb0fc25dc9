"""Retrieval-query generation and top-k validation (stage 5).

The generated query is an ordered step-by-step guide — each step names a
source document, the content kind to consult, and what to look up. A query
is well-formed when embedding the question together with all step
instructions retrieves at least two of the group's source documents within
the top five of the pool index.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .answer import AnswerPair
from .corpus import Document, DocumentGroup
from .gateway import Gateway, PromptSpec
from .render import render_group
from .retrieval import VectorIndex, topk

__all__ = [
    "QueryPlan",
    "QueryStep",
    "QueryVerdict",
    "UnparseableQuery",
    "generate_query",
    "parse_query_plan",
    "validate_query",
]

RETRIEVAL_TOP_K = 5
MIN_SOURCE_HITS = 2  # "more than one" source document must be retrieved


class UnparseableQuery(Exception):
    pass


@dataclass(frozen=True)
class QueryStep:
    step_no: int
    doc_title: str
    target_modality: str  # text | image | table
    instruction: str


@dataclass(frozen=True)
class QueryPlan:
    steps: tuple[QueryStep, ...]

    def instructions_text(self) -> str:
        return " ".join(step.instruction for step in self.steps)


_STEP_RE = re.compile(
    r"^\s*(\d+)[.)]\s*(.+?)\s*\|\s*(text|image|table)\s*\|\s*(.+?)\s*$"
)


def parse_query_plan(text: str, group_titles: Sequence[str]) -> QueryPlan:
    """Parse numbered `N. <title> | <modality> | <instruction>` lines.

    Raises UnparseableQuery when fewer than two steps parse, numbering is
    not consecutive from 1, or a step names a document outside the group.
    """
    steps = []
    for line in text.splitlines():
        if not line.strip():
            continue
        m = _STEP_RE.match(line)
        if m is None:
            raise UnparseableQuery(f"unparseable step line: {line!r}")
        steps.append(
            QueryStep(
                step_no=int(m.group(1)),
                doc_title=m.group(2),
                target_modality=m.group(3),
                instruction=m.group(4),
            )
        )
    if len(steps) < 2:
        raise UnparseableQuery(f"need at least 2 steps, got {len(steps)}")
    if [s.step_no for s in steps] != list(range(1, len(steps) + 1)):
        raise UnparseableQuery("step numbers must run 1..n")
    titles = set(group_titles)
    for step in steps:
        if step.doc_title not in titles:
            raise UnparseableQuery(f"step names document outside group: {step.doc_title!r}")
    return QueryPlan(steps=tuple(steps))


def generate_query(
    question: str,
    answer: AnswerPair,
    docs: Sequence[Document],
    gateway: Gateway,
) -> QueryPlan:
    spec = PromptSpec(
        "query_gen",
        {
            "question": question,
            "answer": answer.short,
            "documents": render_group(docs),
        },
    )
    response = gateway.complete(spec)
    return parse_query_plan(response.texts[0], [d.title for d in docs])


@dataclass(frozen=True)
class QueryVerdict:
    passed: bool
    hits: frozenset[str]  # group members found in the top-k
    ranked: tuple[tuple[str, float], ...]


def validate_query(
    plan: QueryPlan,
    question: str,
    index: VectorIndex,
    group: DocumentGroup,
    gateway: Gateway,
    k: int = RETRIEVAL_TOP_K,
    min_sources: int = MIN_SOURCE_HITS,
) -> QueryVerdict:
    """Check that the query retrieves the group from the whole pool.

    Embeds the question concatenated with every step instruction and ranks
    the pool by exact cosine; passes iff at least ``min_sources`` group
    members appear in the top ``k``.
    """
    query_text = f"{question} {plan.instructions_text()}"
    vector = gateway.embed(query_text)
    ranked = topk(index, vector, k)
    hits = frozenset(doc_id for doc_id, _ in ranked) & set(group.doc_ids)
    return QueryVerdict(
        passed=len(hits) >= min_sources,
        hits=hits,
        ranked=tuple(ranked),
    )
