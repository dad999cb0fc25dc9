"""Document pool construction: parsing, segmentation, linking, grouping.

Documents come from a bounded HTML subset (headings, paragraphs, anchors,
figure/figcaption, img+alt, simple tables; merged cells are flattened
left-to-right). Parsed documents are split into segments that each carry at
most one image, linked into an undirected graph through resolvable anchors,
clustered by topic over segment embeddings, and finally combined into
2-3-document groups that seed question generation.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Callable, Iterable, Mapping, Sequence
from urllib.parse import unquote

import numpy as np

__all__ = [
    "Document",
    "DocumentGroup",
    "ImageBlock",
    "LinkGraph",
    "Segment",
    "TableBlock",
    "TextBlock",
    "UnparsableInput",
    "build_link_graph",
    "cluster_topics",
    "form_groups",
    "parse_document",
    "segment_document",
]


class UnparsableInput(Exception):
    """Input is not tokenizable text (e.g. binary content); drop the document."""


@dataclass(frozen=True)
class TextBlock:
    text: str


@dataclass(frozen=True)
class ImageBlock:
    uri: str
    alt: str
    caption: str


@dataclass(frozen=True)
class TableBlock:
    rows: tuple[tuple[str, ...], ...]
    header: bool


Block = TextBlock | ImageBlock | TableBlock


@dataclass(frozen=True)
class Document:
    """A parsed multimodal page: ordered blocks plus outgoing link titles."""

    id: str
    title: str
    blocks: tuple[Block, ...]
    outlinks: tuple[str, ...]
    lang: str = "en"

    def text_blocks(self) -> list[TextBlock]:
        return [b for b in self.blocks if isinstance(b, TextBlock)]

    def image_blocks(self) -> list[ImageBlock]:
        return [b for b in self.blocks if isinstance(b, ImageBlock)]

    def table_blocks(self) -> list[TableBlock]:
        return [b for b in self.blocks if isinstance(b, TableBlock)]


@dataclass(frozen=True)
class Segment:
    """A contiguous slice of a document's blocks holding at most one image."""

    doc_id: str
    index: int
    blocks: tuple[Block, ...]

    def text(self) -> str:
        """Segment text plus image caption text, for embedding."""
        parts = []
        for block in self.blocks:
            if isinstance(block, TextBlock):
                parts.append(block.text)
            elif isinstance(block, ImageBlock):
                parts.append(block.caption or block.alt)
        return " ".join(p for p in parts if p)


@dataclass(frozen=True)
class DocumentGroup:
    """2-3 documents plus the evidence that justified grouping them."""

    doc_ids: tuple[str, ...]
    link_kind: str  # "hyperlink" | "topic"
    evidence: str

    def __post_init__(self) -> None:
        if not 2 <= len(self.doc_ids) <= 3:
            raise ValueError("groups must contain 2 or 3 documents")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError("group doc_ids must be distinct")

    @property
    def key(self) -> tuple[str, ...]:
        return tuple(sorted(self.doc_ids))


_HEADINGS = {"h1", "h2", "h3", "h4", "h5", "h6"}
_WIKI_HREF = re.compile(r"^(?:\.?/)?wiki/(.+)$")


class _SubsetParser(HTMLParser):
    """Event-driven extractor for the supported HTML subset.

    Unknown tags are skipped but their text still flows into the enclosing
    paragraph context, so sloppy markup degrades gracefully.
    """

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.blocks: list[Block] = []
        self.title = ""
        self.outlinks: list[str] = []
        self._text_parts: list[str] = []
        self._text_depth = 0  # inside p / heading
        self._in_title = False
        self._title_parts: list[str] = []
        # figure state
        self._in_figure = False
        self._figure_img: tuple[str, str] | None = None  # (uri, alt)
        self._in_figcaption = False
        self._figcaption_parts: list[str] = []
        # table state
        self._in_table = False
        self._rows: list[list[str]] = []
        self._cells: list[str] | None = None
        self._cell_parts: list[str] | None = None
        self._saw_th = False
        # anchor state
        self._anchor_href: str | None = None
        self._anchor_title: str | None = None
        self._anchor_text_parts: list[str] | None = None

    # -- text block helpers -------------------------------------------------

    def _flush_text(self) -> None:
        text = " ".join(" ".join(self._text_parts).split())
        self._text_parts = []
        if text:
            self.blocks.append(TextBlock(text))

    # -- HTMLParser hooks ---------------------------------------------------

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        attr_map = {k: (v or "") for k, v in attrs}
        if tag == "title":
            self._in_title = True
        elif tag in _HEADINGS or tag == "p":
            self._flush_text()
            self._text_depth += 1
        elif tag == "figure":
            self._flush_text()
            self._in_figure = True
            self._figure_img = None
            self._figcaption_parts = []
        elif tag == "figcaption":
            self._in_figcaption = True
        elif tag == "img":
            uri = attr_map.get("src", "")
            alt = attr_map.get("alt", "")
            if not uri:
                return
            if self._in_figure:
                if self._figure_img is None:
                    self._figure_img = (uri, alt)
            else:
                self._flush_text()
                self.blocks.append(ImageBlock(uri=uri, alt=alt, caption=alt))
        elif tag == "table":
            self._flush_text()
            self._in_table = True
            self._rows = []
            self._saw_th = False
        elif tag == "tr" and self._in_table:
            self._cells = []
        elif tag in ("td", "th") and self._in_table:
            self._cell_parts = []
            if tag == "th":
                self._saw_th = True
        elif tag == "a":
            self._anchor_href = attr_map.get("href")
            self._anchor_title = attr_map.get("title")
            self._anchor_text_parts = []

    def handle_endtag(self, tag: str) -> None:
        if tag == "title":
            self._in_title = False
        elif tag in _HEADINGS or tag == "p":
            self._text_depth = max(0, self._text_depth - 1)
            self._flush_text()
        elif tag == "figcaption":
            self._in_figcaption = False
        elif tag == "figure":
            if self._figure_img is not None:
                uri, alt = self._figure_img
                caption = " ".join(" ".join(self._figcaption_parts).split())
                self.blocks.append(ImageBlock(uri=uri, alt=alt, caption=caption or alt))
            self._in_figure = False
            self._figure_img = None
            self._figcaption_parts = []
        elif tag in ("td", "th") and self._cell_parts is not None:
            cell = " ".join(" ".join(self._cell_parts).split())
            if self._cells is not None:
                self._cells.append(cell)
            self._cell_parts = None
        elif tag == "tr" and self._cells is not None:
            self._rows.append(self._cells)
            self._cells = None
        elif tag == "table" and self._in_table:
            rows = tuple(tuple(r) for r in self._rows if r)
            if rows:
                self.blocks.append(TableBlock(rows=rows, header=self._saw_th))
            self._in_table = False
            self._rows = []
        elif tag == "a":
            self._record_outlink()
            self._anchor_href = None
            self._anchor_title = None
            self._anchor_text_parts = None

    def handle_data(self, data: str) -> None:
        if self._in_title:
            self._title_parts.append(data)
            return
        if self._in_figcaption:
            self._figcaption_parts.append(data)
            return
        if self._cell_parts is not None:
            self._cell_parts.append(data)
        elif self._text_depth > 0:
            self._text_parts.append(data)
        if self._anchor_text_parts is not None:
            self._anchor_text_parts.append(data)

    # -- outlinks -----------------------------------------------------------

    def _record_outlink(self) -> None:
        """Anchor target preference: title attribute, wiki-style href, text."""
        target = (self._anchor_title or "").strip()
        if not target and self._anchor_href:
            match = _WIKI_HREF.match(self._anchor_href)
            if match:
                target = unquote(match.group(1)).replace("_", " ").strip()
        if not target and self._anchor_text_parts is not None:
            target = " ".join(" ".join(self._anchor_text_parts).split())
        if target:
            self.outlinks.append(target)

    def result_title(self) -> str:
        return " ".join(" ".join(self._title_parts).split())


def parse_document(raw: str, doc_id: str, lang: str = "en") -> Document:
    """Parse an HTML-subset page into an ordered-block document.

    Blocks appear in source order. Anchors contribute outlink titles. Images
    keep figcaption text as their caption, falling back to alt text. The
    document title comes from <title>, else the first heading, else the id.

    Raises:
        UnparsableInput: for non-text input (NUL bytes); such documents are
            dropped by the caller. An empty body parses to zero blocks.
    """
    if "\x00" in raw:
        raise UnparsableInput(f"document {doc_id!r} is not text")
    parser = _SubsetParser()
    parser.feed(raw)
    parser.close()
    title = parser.result_title()
    if not title:
        headings = [b.text for b in parser.blocks if isinstance(b, TextBlock)]
        title = headings[0] if headings else doc_id
    # de-duplicate outlinks, preserving first-seen order
    seen: set[str] = set()
    outlinks = tuple(t for t in parser.outlinks if not (t in seen or seen.add(t)))
    return Document(
        id=doc_id,
        title=title,
        blocks=tuple(parser.blocks),
        outlinks=outlinks,
        lang=lang,
    )


def segment_document(doc: Document) -> list[Segment]:
    """Split a document into contiguous segments with at most one image each.

    A new segment starts when a second image would enter the current one, so
    a document with no images yields exactly one segment and the
    concatenation of all segments always reproduces ``doc.blocks``.
    """
    segments: list[Segment] = []
    current: list[Block] = []
    image_count = 0
    for block in doc.blocks:
        if isinstance(block, ImageBlock) and image_count == 1:
            segments.append(Segment(doc.id, len(segments), tuple(current)))
            current = []
            image_count = 0
        current.append(block)
        if isinstance(block, ImageBlock):
            image_count += 1
    segments.append(Segment(doc.id, len(segments), tuple(current)))
    return segments


@dataclass
class LinkGraph:
    """Undirected hyperlink graph over document ids."""

    adjacency: dict[str, set[str]] = field(default_factory=dict)
    unresolved_links: int = 0

    def has_edge(self, a: str, b: str) -> bool:
        return b in self.adjacency.get(a, set())

    def edges(self) -> list[tuple[str, str]]:
        out = set()
        for a, nbrs in self.adjacency.items():
            for b in nbrs:
                out.add((min(a, b), max(a, b)))
        return sorted(out)


def build_link_graph(pool: Sequence[Document]) -> LinkGraph:
    """Connect documents whose anchors resolve to pool titles (case-exact).

    The edge (a, b) exists iff a links b or b links a. Outlinks that do not
    resolve to a pool title are counted, not fatal.
    """
    by_title = {doc.title: doc.id for doc in pool}
    graph = LinkGraph(adjacency={doc.id: set() for doc in pool})
    for doc in pool:
        for target in doc.outlinks:
            other = by_title.get(target)
            if other is None:
                graph.unresolved_links += 1
            elif other != doc.id:
                graph.adjacency[doc.id].add(other)
                graph.adjacency[other].add(doc.id)
    return graph


def cluster_topics(
    segments: Sequence[Segment],
    embed: Callable[[str], np.ndarray],
    k: int,
    seed: int = 0,
    max_iter: int = 25,
    titles: Mapping[str, str] | None = None,
) -> dict[str, set[int]]:
    """Assign each document the set of topic clusters its segments fall in.

    Each segment is embedded from its text plus image caption text and
    assigned to the nearest of k centroids; a document's cluster set is the
    deduplicated union over its segments. Clustering is seeded k-means:
    initial centroids are drawn by ``random.Random(seed).sample`` over the
    distinct embedding vectors in first-appearance order, then Lloyd
    iterations run up to ``max_iter`` with nearest-centroid assignment
    (ties to the lowest centroid index).

    Segments with no embeddable text fall back to the parent document title
    so every document receives at least one cluster.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    titles = titles or {}
    texts = []
    for seg in segments:
        text = seg.text().strip()
        texts.append(text if text else titles.get(seg.doc_id, seg.doc_id))
    points = np.stack([np.asarray(embed(t), dtype=np.float64) for t in texts])

    assignment = _kmeans_assign(points, k, seed, max_iter)
    clusters: dict[str, set[int]] = {}
    for seg, label in zip(segments, assignment):
        clusters.setdefault(seg.doc_id, set()).add(int(label))
    return clusters


def _kmeans_assign(points: np.ndarray, k: int, seed: int, max_iter: int) -> list[int]:
    """Seeded Lloyd's algorithm; returns per-point cluster labels."""
    distinct: list[np.ndarray] = []
    seen_keys: set[bytes] = set()
    for row in points:
        key = row.tobytes()
        if key not in seen_keys:
            seen_keys.add(key)
            distinct.append(row)
    k_eff = min(k, len(distinct))
    rng = random.Random(seed)
    centroids = np.stack(rng.sample(distinct, k_eff))

    labels = _nearest(points, centroids)
    for _ in range(max_iter):
        new_centroids = centroids.copy()
        for c in range(k_eff):
            members = points[[i for i, lab in enumerate(labels) if lab == c]]
            if len(members):
                new_centroids[c] = members.mean(axis=0)
        new_labels = _nearest(points, new_centroids)
        if new_labels == labels and np.allclose(new_centroids, centroids):
            break
        centroids, labels = new_centroids, new_labels
    return labels


def _nearest(points: np.ndarray, centroids: np.ndarray) -> list[int]:
    dists = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return [int(np.argmin(row)) for row in dists]  # argmin ties -> lowest index


def form_groups(
    graph: LinkGraph,
    topic_map: Mapping[str, Iterable[int]],
    sizes: Iterable[int] = (2, 3),
    budget: int | None = None,
) -> list[DocumentGroup]:
    """Enumerate candidate document groups from links and shared topics.

    Hyperlink groups are connected pairs plus triples closed over paths of
    length 2; topic groups are pairs/triples of documents sharing a cluster
    id. Duplicate member sets are dropped (hyperlink evidence wins) and the
    result is deterministically ordered: hyperlink groups before topic
    groups, each sorted by member ids.
    """
    wanted = set(sizes)
    if not wanted <= {2, 3}:
        raise ValueError("group sizes must be within {2, 3}")
    emitted: set[tuple[str, ...]] = set()
    hyperlink_groups: list[DocumentGroup] = []
    if 2 in wanted:
        for a, b in graph.edges():
            key = (a, b)
            if key not in emitted:
                emitted.add(key)
                hyperlink_groups.append(DocumentGroup(key, "hyperlink", f"{a}--{b}"))
    if 3 in wanted:
        for mid in sorted(graph.adjacency):
            nbrs = sorted(graph.adjacency[mid])
            for i, a in enumerate(nbrs):
                for c in nbrs[i + 1 :]:
                    key = tuple(sorted((a, mid, c)))
                    if key not in emitted:
                        emitted.add(key)
                        hyperlink_groups.append(
                            DocumentGroup(key, "hyperlink", f"{a}--{mid}--{c}")
                        )
    hyperlink_groups.sort(key=lambda g: g.key)

    by_cluster: dict[int, list[str]] = {}
    for doc_id, clusters in topic_map.items():
        for cid in clusters:
            by_cluster.setdefault(int(cid), []).append(doc_id)
    topic_groups: list[DocumentGroup] = []
    for cid in sorted(by_cluster):
        members = sorted(set(by_cluster[cid]))
        if 2 in wanted:
            for i, a in enumerate(members):
                for b in members[i + 1 :]:
                    key = (a, b)
                    if key not in emitted:
                        emitted.add(key)
                        topic_groups.append(DocumentGroup(key, "topic", f"cluster:{cid}"))
        if 3 in wanted:
            for i, a in enumerate(members):
                for j, b in enumerate(members[i + 1 :], start=i + 1):
                    for c in members[j + 1 :]:
                        key = (a, b, c)
                        if key not in emitted:
                            emitted.add(key)
                            topic_groups.append(
                                DocumentGroup(key, "topic", f"cluster:{cid}")
                            )
    topic_groups.sort(key=lambda g: g.key)

    groups = hyperlink_groups + topic_groups
    if budget is not None:
        groups = groups[:budget]
    return groups
