"""Record model transcripts once, then replay the pipeline byte-identically.

Every completion and embedding is persisted to a content-addressed store
during the first (scripted) run. The two replay runs never touch a backend
and produce byte-identical dataset and ledger files.

Run from the repository root:  python demos/04_record_and_replay.py
"""

import hashlib
import tempfile
from pathlib import Path

from mmqasynth.demo import build_demo_backend, demo_config, demo_exemplars, load_pool
from mmqasynth.gateway import Gateway, ReplayBackend
from mmqasynth.pipeline import run_synthesis
from mmqasynth.store import export_dataset

ROOT = Path(__file__).resolve().parent.parent
pool = load_pool(ROOT / "fixtures" / "pool")

with tempfile.TemporaryDirectory() as tmp:
    store = Path(tmp) / "transcripts"

    recorder = Gateway(build_demo_backend(), store_dir=store)
    run_synthesis(pool, demo_exemplars(), recorder, demo_config())
    print(f"recorded {len(list(store.glob('*.json')))} transcripts into {store.name}/")

    digests = []
    for run in (1, 2):
        gateway = Gateway(ReplayBackend(), store_dir=store)
        result = run_synthesis(pool, demo_exemplars(), gateway, demo_config())
        dataset = Path(tmp) / f"dataset{run}.jsonl"
        ledger = Path(tmp) / f"ledger{run}.jsonl"
        export_dataset(result.samples, dataset)
        result.ledger.write(ledger)
        digest = (
            hashlib.sha256(dataset.read_bytes()).hexdigest()[:16],
            hashlib.sha256(ledger.read_bytes()).hexdigest()[:16],
        )
        digests.append(digest)
        print(
            f"replay run {run}: {len(result.samples)} samples, "
            f"{gateway.counters['network_requests']} network calls, "
            f"dataset sha {digest[0]}, ledger sha {digest[1]}"
        )

    assert digests[0] == digests[1]
    print("replay runs are byte-identical")
