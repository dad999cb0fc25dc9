"""Run the full generate-and-validate pipeline over the fixture pool.

The scripted demo backend stands in for a live model: every prompt gets a
deterministic response, so the run is reproducible end to end. Four groups
survive all gates; one is rejected by the single-modality ablation and one
by a 4/5 vote split.

Run from the repository root:  python demos/03_synthesize_dataset.py
"""

from pathlib import Path

from mmqasynth.demo import build_demo_backend, demo_config, demo_exemplars, load_pool
from mmqasynth.gateway import Gateway
from mmqasynth.pipeline import run_synthesis
from mmqasynth.store import compute_stats, export_dataset

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "demos" / "out"

pool = load_pool(ROOT / "fixtures" / "pool")
gateway = Gateway(build_demo_backend())
result = run_synthesis(pool, demo_exemplars(), gateway, demo_config())

print(f"attempts: {result.ledger.attempts_started}")
print(f"admitted: {len(result.samples)}   rejected: {len(result.ledger.records)}")
print(f"conservation holds: {result.conserved}\n")

for sample in result.samples:
    print(f"Q: {sample.question}")
    print(f"   short answer: {sample.answer_short}")
    print(f"   modalities: {sorted(sample.modalities)}  sources: {sample.source_doc_ids}")
    print(f"   retrieval guide ({len(sample.query_steps.steps)} steps):")
    for step in sample.query_steps.steps:
        print(f"     {step.step_no}. [{step.doc_title} / {step.target_modality}] {step.instruction}")
    print()

print("rejections:")
for rec in result.ledger.records:
    print(f"  stage={rec.stage} reason={rec.reason} group={rec.group_ref}")

stats = compute_stats(result.samples)
print(
    f"\ncorpus stats: image {stats.image_pct:.0f}% | table {stats.table_pct:.0f}% | "
    f"both {stats.both_pct:.0f}% | avg question {stats.avg_q_words:.1f} words | "
    f"avg answer {stats.avg_a_words:.2f} words | avg sources {stats.avg_sources:.2f}"
)

OUT.mkdir(exist_ok=True)
export_dataset(result.samples, OUT / "dataset.jsonl")
result.ledger.write(OUT / "rejections.jsonl")
print(f"\nwrote {OUT / 'dataset.jsonl'} and {OUT / 'rejections.jsonl'}")
