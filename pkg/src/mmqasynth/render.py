"""Plain-text renderings of documents for prompting and grounding.

Images render as their caption text (question-conditioned captions override
the parsed ones when supplied), tables as pipe-joined rows. The ``include``
filter produces the single-modality projections used by the modality
ablation gate.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .corpus import Document, ImageBlock, TableBlock, TextBlock

__all__ = [
    "ContextOverflow",
    "document_surface_text",
    "render_document",
    "render_group",
    "truncate_group",
]

ALL_MODALITIES = ("text", "image", "table")


class ContextOverflow(Exception):
    """The group cannot be truncated to fit the context budget."""


def render_document(
    doc: Document,
    captions: Mapping[str, str] | None = None,
    include: Iterable[str] = ALL_MODALITIES,
) -> str:
    included = set(include)
    captions = captions or {}
    lines = [f"# {doc.title}"]
    for block in doc.blocks:
        if isinstance(block, TextBlock) and "text" in included:
            lines.append(block.text)
        elif isinstance(block, ImageBlock) and "image" in included:
            caption = captions.get(block.uri) or block.caption or block.alt
            lines.append(f"[image {block.uri}] {caption}".rstrip())
        elif isinstance(block, TableBlock) and "table" in included:
            lines.append("[table]")
            lines.extend(" | ".join(row) for row in block.rows)
    return "\n".join(lines)


def render_group(
    docs: Sequence[Document],
    captions: Mapping[str, str] | None = None,
    include: Iterable[str] = ALL_MODALITIES,
) -> str:
    return "\n\n".join(render_document(d, captions, include) for d in docs)


def truncate_group(docs: Sequence[Document], budget_chars: int) -> list[Document]:
    """Fit a group into a character budget.

    Drops trailing text blocks from whichever document currently carries the
    most text, one at a time; image and table blocks are never dropped.
    """
    current = list(docs)
    while len(render_group(current)) > budget_chars:
        candidates = [
            (sum(len(b.text) for b in d.text_blocks()), i)
            for i, d in enumerate(current)
            if d.text_blocks()
        ]
        if not candidates:
            raise ContextOverflow(
                f"group does not fit in {budget_chars} chars even without text blocks"
            )
        _, doc_idx = max(candidates)
        doc = current[doc_idx]
        blocks = list(doc.blocks)
        for j in range(len(blocks) - 1, -1, -1):
            if isinstance(blocks[j], TextBlock):
                del blocks[j]
                break
        current[doc_idx] = Document(
            id=doc.id,
            title=doc.title,
            blocks=tuple(blocks),
            outlinks=doc.outlinks,
            lang=doc.lang,
        )
    return current


def document_surface_text(doc: Document, captions: Mapping[str, str] | None = None) -> str:
    """All searchable surface of one document: title, prose, captions, cells.

    Used both as the embedding text for the retrieval index and as the
    grounding corpus for answer-entity checks.
    """
    captions = captions or {}
    parts = [doc.title]
    parts.extend(b.text for b in doc.text_blocks())
    for img in doc.image_blocks():
        parts.append(captions.get(img.uri) or img.caption or img.alt)
    for table in doc.table_blocks():
        for row in table.rows:
            parts.extend(row)
    return " ".join(p for p in parts if p)
