"""Score answers with EM/F1, measure agreement, and curate a benchmark.

Run from the repository root:  python demos/05_metrics_and_curation.py
"""

import random

from mmqasynth.evalkit import curate_benchmark, exact_match, fleiss_kappa, normalize_answer, token_f1

pairs = [
    ("539", "539"),
    ("539", "539 people"),
    ("The USA.", "usa"),
    ("Music from Big Pink", "Imagine"),
]
print("answer scoring (normalize -> exact match / token F1):")
for pred, gold in pairs:
    print(
        f"  {pred!r:24} vs {gold!r:14} -> tokens {normalize_answer(pred)} | "
        f"EM {exact_match(pred, gold)} | F1 {token_f1(pred, gold):.4f}"
    )

# three raters, two categories: rows count judgments per category
matrix = [[3, 0], [2, 1], [1, 2], [0, 3]]
print(f"\nfleiss kappa of the fixture matrix: {fleiss_kappa(matrix):.4f}")
print(f"fleiss kappa under perfect agreement: {fleiss_kappa([[3, 0], [0, 3]]):.1f}")

# curation: three binary annotators, mean >= 0.75 keeps only unanimous rows
rng = random.Random(1)
candidates = [f"cand-{i:04d}" for i in range(1200)]
scores = {c: [rng.choices([0, 1], weights=[1, 9])[0] for _ in range(3)] for c in candidates}
kept = curate_benchmark(candidates, scores, threshold=0.75)
print(f"\n{len(kept)} of {len(candidates)} candidates survive the 0.75 threshold")
final = curate_benchmark(candidates, scores, threshold=0.75, target_n=800, seed=7)
print(f"seeded subsample to exactly {len(final)} benchmark entries")
