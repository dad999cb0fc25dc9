"""Parse the fixture pool and split documents into single-image segments.

Run from the repository root:  python demos/01_parse_and_segment.py
"""

from pathlib import Path

from mmqasynth.corpus import ImageBlock, TableBlock, TextBlock, segment_document
from mmqasynth.demo import load_pool

POOL_DIR = Path(__file__).resolve().parent.parent / "fixtures" / "pool"


def describe(block):
    if isinstance(block, TextBlock):
        return f"text({len(block.text)} chars)"
    if isinstance(block, ImageBlock):
        return f"image({block.uri})"
    if isinstance(block, TableBlock):
        return f"table({len(block.rows)} rows)"
    return "?"


pool = load_pool(POOL_DIR)
print(f"parsed {len(pool)} documents\n")

for doc in pool[:3]:
    print(f"== {doc.title} ({doc.id})")
    print("   blocks:", ", ".join(describe(b) for b in doc.blocks))
    print("   outlinks:", list(doc.outlinks) or "(none)")
    segments = segment_document(doc)
    print(f"   segments: {len(segments)} (each carries at most one image)")
    for seg in segments:
        images = sum(isinstance(b, ImageBlock) for b in seg.blocks)
        print(f"     segment {seg.index}: {len(seg.blocks)} blocks, {images} image(s)")
    print()

# the segmentation round trip: concatenating segments reproduces the document
for doc in pool:
    segments = segment_document(doc)
    flattened = tuple(b for seg in segments for b in seg.blocks)
    assert flattened == doc.blocks
print("round trip holds for every document in the pool")
