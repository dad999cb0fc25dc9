"""Command-line entry points.

    mmqasynth synth        run the synthesis pipeline over a document pool
    mmqasynth stats        corpus statistics of a dataset file
    mmqasynth ledger       rejection summary of a run directory
    mmqasynth eval         EM / token-F1 of predictions against gold answers
    mmqasynth kappa        Fleiss' kappa of a judgment-count CSV
    mmqasynth curate       threshold + subsample benchmark curation
    mmqasynth serve-review launch the human-review HTTP service
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import demo as demo_mod
from .evalkit import (
    DegenerateMatrix,
    curate_benchmark,
    exact_match,
    fleiss_kappa,
    stratified_report,
    token_f1,
)
from .gateway import GatewayConfig, build_gateway, load_config
from .pipeline import PipelineConfig, run_synthesis
from .question import Exemplar
from .review import ReviewService, load_items
from .store import compute_stats, export_dataset, import_dataset, read_jsonl


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmqasynth", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="synthesize a QA dataset from a document pool")
    synth.add_argument("--pool", required=True, help="directory with manifest.json and HTML files")
    synth.add_argument("--exemplars", help="exemplar pool JSONL (omit to use the built-in demo pool)")
    synth.add_argument("--shots", type=int, default=1)
    synth.add_argument("--seed", type=int, default=42)
    synth.add_argument("--max-samples", type=int, default=None)
    synth.add_argument("--groups", default="2..3", help="group sizes, e.g. 2..3 or 2")
    synth.add_argument("--topic-k", type=int, default=6)
    synth.add_argument("--backend", default="demo", choices=["demo", "replay", "live"])
    synth.add_argument("--gateway-config", help="JSON gateway config (required for live)")
    synth.add_argument("--store", help="transcript store directory")
    synth.add_argument("--out", required=True, help="dataset JSONL output path")
    synth.add_argument("--run-dir", help="directory for the rejection ledger (default: out's parent)")

    pool = sub.add_parser("pool", help="parse an HTML fixture directory into a canonical pool file")
    pool.add_argument("--pool", required=True, help="directory with manifest.json and HTML files")
    pool.add_argument("--out", required=True, help="pool JSONL output path (one document per line)")

    stats = sub.add_parser("stats", help="print corpus statistics for a dataset")
    stats.add_argument("dataset")

    ledger = sub.add_parser("ledger", help="summarize a run's rejection ledger")
    ledger.add_argument("run_dir")

    evalp = sub.add_parser("eval", help="score predictions against gold answers")
    evalp.add_argument("--pred", required=True, help="JSONL with id + answer fields")
    evalp.add_argument("--gold", required=True, help="gold dataset JSONL")
    evalp.add_argument("--stratify", action="store_true")

    kappa = sub.add_parser("kappa", help="Fleiss' kappa of a judgment-count CSV (items x categories)")
    kappa.add_argument("matrix")

    curate = sub.add_parser("curate", help="threshold-filter and subsample scored candidates")
    curate.add_argument("--scores", required=True, help="JSONL with id + scores fields")
    curate.add_argument("--threshold", type=float, default=0.75)
    curate.add_argument("--n", type=int, default=None)
    curate.add_argument("--seed", type=int, default=0)
    curate.add_argument("--out", help="write kept ids JSONL here (default: stdout)")

    serve = sub.add_parser("serve-review", help="serve the human-review HTTP API")
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--items", required=True)
    serve.add_argument("--batches", type=int, default=4)
    serve.add_argument("--batch-size", type=int, default=25)
    serve.add_argument("--raters", type=int, default=3)
    serve.add_argument("--seed", type=int, default=0)
    serve.add_argument("--audit", help="append judgments to this JSONL file")
    return parser


def _parse_sizes(spec: str) -> tuple[int, ...]:
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return (int(spec),)


def _cmd_synth(args: argparse.Namespace) -> int:
    pool = demo_mod.load_pool(args.pool)
    if args.exemplars:
        exemplars = [
            Exemplar(
                id=str(rec["id"]),
                documents=tuple(rec["documents"]),
                question=str(rec["question"]),
                answer=str(rec["answer"]),
            )
            for rec in read_jsonl(args.exemplars)
        ]
    else:
        exemplars = demo_mod.demo_exemplars()

    if args.backend == "demo":
        backend_gateway = build_gateway(
            GatewayConfig(backend="scripted", store_dir=args.store or "")
        )
        backend_gateway.backend = demo_mod.build_demo_backend()
    elif args.backend == "replay":
        backend_gateway = build_gateway(
            GatewayConfig(backend="replay", store_dir=args.store or "")
        )
    else:
        if not args.gateway_config:
            print("--gateway-config is required for the live backend", file=sys.stderr)
            return 2
        backend_gateway = build_gateway(load_config(args.gateway_config))

    config = PipelineConfig(
        seed=args.seed,
        shots=args.shots,
        max_samples=args.max_samples,
        group_sizes=_parse_sizes(args.groups),
        topic_k=args.topic_k,
    )
    result = run_synthesis(pool, exemplars, backend_gateway, config)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    export_dataset(result.samples, out_path)
    run_dir = Path(args.run_dir) if args.run_dir else out_path.parent
    run_dir.mkdir(parents=True, exist_ok=True)
    result.ledger.write(run_dir / "rejections.jsonl")

    print(f"groups attempted: {result.ledger.attempts_started}")
    print(f"samples admitted: {len(result.samples)} -> {out_path}")
    print(f"rejections: {len(result.ledger.records)} -> {run_dir / 'rejections.jsonl'}")
    print(f"conservation holds: {result.conserved}")
    return 0


def _cmd_pool(args: argparse.Namespace) -> int:
    from .store import document_to_record, write_jsonl

    pool = demo_mod.load_pool(args.pool)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(out_path, (document_to_record(d) for d in pool))
    print(f"wrote {len(pool)} documents -> {out_path}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    samples = import_dataset(args.dataset)
    stats = compute_stats(samples)
    print(f"samples: {stats.n}")
    print(f"image modality: {stats.image_pct:.1f}%")
    print(f"table modality: {stats.table_pct:.1f}%")
    print(f"both image and table: {stats.both_pct:.1f}%")
    print(f"average question length (words): {stats.avg_q_words:.2f}")
    print(f"average answer length (words): {stats.avg_a_words:.2f}")
    print(f"average source documents: {stats.avg_sources:.2f}")
    return 0


def _cmd_ledger(args: argparse.Namespace) -> int:
    path = Path(args.run_dir) / "rejections.jsonl"
    records = read_jsonl(path)
    by_stage: dict[str, int] = {}
    by_reason: dict[str, int] = {}
    for rec in records:
        by_stage[rec["stage"]] = by_stage.get(rec["stage"], 0) + 1
        by_reason[rec["reason"]] = by_reason.get(rec["reason"], 0) + 1
    print(f"rejections: {len(records)}")
    for stage in ("question", "answer", "query"):
        print(f"  stage {stage}: {by_stage.get(stage, 0)}")
    for reason in sorted(by_reason):
        print(f"  reason {reason}: {by_reason[reason]}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    preds = {str(rec["id"]): str(rec["answer"]) for rec in read_jsonl(args.pred)}
    gold_samples = import_dataset(args.gold)
    golds = {s.id: s.answer_short for s in gold_samples}
    modalities = {s.id: sorted(s.modalities) for s in gold_samples}
    missing = sorted(set(golds) - set(preds))
    if missing:
        print(f"missing predictions for {len(missing)} ids", file=sys.stderr)
        return 2
    if args.stratify:
        report = stratified_report(
            {i: preds[i] for i in golds}, golds, modalities
        )
        print(f"n: {report.n}")
        print(f"EM: {report.em:.4f}")
        print(f"F1: {report.f1:.4f}")
        for name, (count, em) in report.subsets.items():
            shown = "n/a" if em is None else f"{em:.4f}"
            print(f"EM ({name}): {shown} (n={count})")
    else:
        ids = sorted(golds)
        em = sum(exact_match(preds[i], golds[i]) for i in ids) / len(ids)
        f1 = sum(token_f1(preds[i], golds[i]) for i in ids) / len(ids)
        print(f"n: {len(ids)}")
        print(f"EM: {em:.4f}")
        print(f"F1: {f1:.4f}")
    return 0


def _cmd_kappa(args: argparse.Namespace) -> int:
    rows = []
    for line in Path(args.matrix).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append([int(cell) for cell in line.split(",")])
    try:
        print(f"fleiss kappa: {fleiss_kappa(rows):.6f}")
        return 0
    except DegenerateMatrix:
        print("fleiss kappa: undefined (single category ever used)")
        return 1


def _cmd_curate(args: argparse.Namespace) -> int:
    records = read_jsonl(args.scores)
    candidates = [str(rec["id"]) for rec in records]
    scores = {str(rec["id"]): list(rec["scores"]) for rec in records}
    kept = curate_benchmark(candidates, scores, args.threshold, args.n, args.seed)
    lines = [json.dumps({"id": cid}) for cid in kept]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"kept {len(kept)} of {len(candidates)} -> {args.out}")
    else:
        print("\n".join(lines))
    return 0


def _cmd_serve_review(args: argparse.Namespace) -> int:
    from wsgiref.simple_server import make_server

    items = load_items(args.items)
    service = ReviewService(
        items,
        n_batches=args.batches,
        per_batch=args.batch_size,
        raters_per_batch=args.raters,
        seed=args.seed,
        audit_path=args.audit,
    )
    server = make_server("127.0.0.1", args.port, service.wsgi_app)
    print(
        f"review service on http://127.0.0.1:{args.port} "
        f"({args.batches} batches x {args.batch_size} items x {args.raters} raters)"
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "pool": _cmd_pool,
    "stats": _cmd_stats,
    "ledger": _cmd_ledger,
    "eval": _cmd_eval,
    "kappa": _cmd_kappa,
    "curate": _cmd_curate,
    "serve-review": _cmd_serve_review,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
