"""Build the hyperlink graph, cluster topics, and form 2-3 document groups.

Run from the repository root:  python demos/02_link_and_group.py
"""

from pathlib import Path

from mmqasynth.corpus import build_link_graph, cluster_topics, form_groups, segment_document
from mmqasynth.demo import demo_embedder, load_pool

POOL_DIR = Path(__file__).resolve().parent.parent / "fixtures" / "pool"

pool = load_pool(POOL_DIR)
graph = build_link_graph(pool)
print("hyperlink edges:")
for a, b in graph.edges():
    print(f"  {a} -- {b}")
print(f"unresolved outlinks (counted, not fatal): {graph.unresolved_links}\n")

segments = [seg for doc in pool for seg in segment_document(doc)]
topic_map = cluster_topics(
    segments,
    demo_embedder,
    k=6,
    seed=42,
    titles={doc.id: doc.title for doc in pool},
)
print("topic clusters per document:")
for doc_id in sorted(topic_map):
    print(f"  {doc_id}: {sorted(topic_map[doc_id])}")

groups = form_groups(graph, topic_map)
print(f"\nformed {len(groups)} candidate groups (hyperlink first, then topic):")
for group in groups:
    print(f"  {group.link_kind:9s} {group.doc_ids}  [{group.evidence}]")
