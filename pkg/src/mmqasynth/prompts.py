"""Prompt templates for every generation and validation call.

Each template declares the slots it requires; the gateway refuses to send a
spec with missing or empty required slots. Template bodies are plain
``str.format``-style text so scripted and replay backends can ignore them
while live backends render the full prompt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

__all__ = [
    "PromptTemplate",
    "TEMPLATES",
    "TASK_SINGLE_DOC",
    "TASK_PROJECTION",
    "TASK_ENTITIES",
    "TASK_RELATIONS",
]


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    required_slots: frozenset[str]
    body: str

    def render(self, slots: Mapping[str, str]) -> str:
        missing = sorted(self.required_slots - set(slots))
        if missing:
            raise KeyError(f"template {self.id!r} missing slots: {missing}")
        return self.body.format_map({k: slots.get(k, "") for k in _all_slot_names(self.body)})


def _all_slot_names(body: str) -> set[str]:
    import string as _string

    return {name for _, name, _, _ in _string.Formatter().parse(body) if name}


# Judge task wordings, shared by callers so transcripts stay stable.
TASK_SINGLE_DOC = (
    "Decide whether the question can be fully answered using only this single document."
)
TASK_PROJECTION = (
    "Decide whether the question can be fully answered using only the material shown below."
)
TASK_ENTITIES = (
    "List the named entities that appear in the text, one per line, formatted as: surface | kind. "
    "Valid kinds: person, org, location, date, number, work, product, event, other."
)
TASK_RELATIONS = (
    "List the factual relations stated in the text, one per line, formatted as: "
    "(subject, predicate, object)."
)

_DEFS = [
    (
        "question_gen",
        {"documents", "examples"},
        "Write one question that can only be answered by combining information from every "
        "document below, drawing on at least two kinds of content (prose, images, tables). "
        "The question must become unanswerable if any single document or content kind is "
        "removed, and it must not merely join unrelated facts.\n"
        "{prior_questions}"
        "Documents:\n{documents}\n\nWorked examples:\n{examples}\n\nQuestion:",
    ),
    (
        "answer_gen",
        {"question", "documents"},
        "Read every document below, including image captions and tables, and answer the "
        "question using only what the documents state. Reply with two lines:\n"
        "Long: <a full-sentence answer citing the combined evidence>\n"
        "Short: <only the key information, no extra words>\n\n"
        "Question: {question}\n\nDocuments:\n{documents}\n",
    ),
    (
        "query_gen",
        {"question", "answer", "documents"},
        "Given the question, its answer, and the source documents, lay out the ordered "
        "steps a reader must take to find and verify the answer. Write one line per step "
        "in the form:\n"
        "<step number>. <document title> | <text or image or table> | <what to look up>\n\n"
        "Question: {question}\nAnswer: {answer}\n\nDocuments:\n{documents}\n",
    ),
    (
        "decompose",
        {"question"},
        "Break the question into its elementary sub-questions, one per line, without "
        "numbering. If it is already elementary, repeat it unchanged.\n\n"
        "Question: {question}\n",
    ),
    (
        "rephrase",
        {"question", "parts"},
        "Rewrite the question as a single concise question with no conjoined clauses, "
        "keeping only the parts listed below and preserving the need to combine sources.\n\n"
        "Original: {question}\nParts to keep:\n{parts}\n\nRewritten question:",
    ),
    (
        "modality_probe",
        {"question", "documents"},
        "Which kinds of content are needed to answer the question from these documents? "
        "Reply with a comma-separated subset of: text, image, table.\n\n"
        "Question: {question}\n\nDocuments:\n{documents}\n",
    ),
    (
        "caption",
        {"image_uri", "question"},
        "Describe the image at {image_uri} with one sentence focused on whatever the "
        "question asks about.\n\nQuestion: {question}\nCaption:",
    ),
    (
        "judge",
        {"task", "context"},
        "{task}\n\nMaterial:\n{context}\n\nQuestion: {question}\n\nAnswer:",
    ),
]

TEMPLATES: dict[str, PromptTemplate] = {
    tid: PromptTemplate(tid, frozenset(req), body) for tid, req, body in _DEFS
}
