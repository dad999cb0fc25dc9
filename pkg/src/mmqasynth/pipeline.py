"""End-to-end synthesis: pool -> groups -> gated generation -> dataset.

Groups are processed sequentially in their deterministic formation order,
so given the same pool, seed, and backend transcripts, two runs produce
byte-identical dataset and ledger files. Every started attempt ends either
as an admitted sample or as exactly one rejection-ledger entry.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

from . import answer as answer_mod
from . import query as query_mod
from . import question as question_mod
from .corpus import Document, DocumentGroup, build_link_graph, cluster_topics, form_groups, segment_document
from .gateway import Gateway, GatewayError
from .question import Exemplar, HopClass
from .render import ContextOverflow, document_surface_text
from .retrieval import VectorIndex, build_index
from .store import DatasetStore, LedgerBook, RejectionRecord, Sample, sample_id_for_question

__all__ = ["PipelineConfig", "SynthesisResult", "run_synthesis"]


@dataclass
class PipelineConfig:
    seed: int = 42
    shots: int = 1
    max_samples: int | None = None
    group_sizes: tuple[int, ...] = (2, 3)
    group_budget: int | None = None
    topic_k: int = 4
    vote_k: int = 5
    duplicate_retries: int = 3
    short_word_cap: int = 10
    context_chars: int = 24000
    retrieval_k: int = 5
    min_source_hits: int = 2


@dataclass
class SynthesisResult:
    samples: list[Sample]
    ledger: LedgerBook
    groups: list[DocumentGroup] = field(default_factory=list)

    @property
    def conserved(self) -> bool:
        return self.ledger.conserved_with(len(self.samples))


class _StageReject(Exception):
    def __init__(self, stage: str, reason: str) -> None:
        super().__init__(f"{stage}:{reason}")
        self.stage = stage
        self.reason = reason


def _group_seed(base_seed: int, group: DocumentGroup) -> int:
    digest = hashlib.sha256(",".join(group.key).encode("utf-8")).digest()
    return base_seed ^ int.from_bytes(digest[:4], "little")


def run_synthesis(
    pool: Sequence[Document],
    exemplars: Sequence[Exemplar],
    gateway: Gateway,
    config: PipelineConfig | None = None,
    groups: Sequence[DocumentGroup] | None = None,
) -> SynthesisResult:
    """Run the full generate-and-validate pipeline over a document pool.

    Args:
        pool: parsed documents.
        exemplars: few-shot pool; ``config.shots`` are sampled per group.
        gateway: backend gateway (scripted, replay, or live).
        config: knobs; defaults replicate the standard protocol.
        groups: explicit groups (tests); default derives them from links
            and topic clusters.
    """
    config = config or PipelineConfig()
    docs_by_id = {doc.id: doc for doc in pool}
    if groups is None:
        segments = [seg for doc in pool for seg in segment_document(doc)]
        graph = build_link_graph(pool)
        topic_map = cluster_topics(
            segments,
            gateway.embed,
            k=config.topic_k,
            seed=config.seed,
            titles={doc.id: doc.title for doc in pool},
        )
        groups = form_groups(graph, topic_map, config.group_sizes, config.group_budget)
    index = build_index(
        [(doc.id, document_surface_text(doc)) for doc in pool], gateway.embed
    )

    store = DatasetStore()
    ledger = LedgerBook()
    for group in groups:
        if config.max_samples is not None and len(store) >= config.max_samples:
            break
        ledger.attempts_started += 1
        log_start = len(gateway.request_log)
        try:
            sample = _synthesize_one(
                group, docs_by_id, exemplars, gateway, index, config,
                seen_questions=store.normalized_questions,
            )
        except _StageReject as reject:
            keys = tuple(key for _, key in gateway.request_log[log_start:])
            ledger.record_rejection(
                RejectionRecord(reject.stage, reject.reason, group.key, keys)
            )
            continue
        store.admit(sample, ledger)
    return SynthesisResult(samples=store.samples, ledger=ledger, groups=list(groups))


def _synthesize_one(
    group: DocumentGroup,
    docs_by_id: dict[str, Document],
    exemplars: Sequence[Exemplar],
    gateway: Gateway,
    index: VectorIndex,
    config: PipelineConfig,
    seen_questions: frozenset[str] = frozenset(),
) -> Sample:
    docs = [docs_by_id[doc_id] for doc_id in group.doc_ids]
    log_start = len(gateway.request_log)

    # ---- question stage ----------------------------------------------------
    try:
        shots = question_mod.select_fewshot(
            exemplars, config.shots, seed=_group_seed(config.seed, group)
        )
        candidate = question_mod.generate_question(
            docs,
            shots,
            prior=[],
            gateway=gateway,
            max_attempts=config.duplicate_retries,
            context_chars=config.context_chars,
            seen_global=seen_questions,
        )
        question_text = candidate.text
        subquestions = question_mod.decompose_question(question_text, gateway)
        verdict = question_mod.classify_multihop(question_text, subquestions, docs, gateway)
        rephrased = False
        if verdict.hop_class is HopClass.UNRELATED_FACTS:
            raise _StageReject("question", "unrelated_facts")
        if verdict.hop_class is HopClass.RELATED_OPEN_ENDED:
            question_text = question_mod.rephrase_concise(question_text, verdict, docs, gateway)
            rephrased = True
        modality = question_mod.check_multimodal(question_text, docs, gateway)
        if not modality.passed:
            raise _StageReject("question", "single_modality")
    except question_mod.DuplicateExhausted:
        raise _StageReject("question", "duplicate")
    except question_mod.UnparseableDecomposition:
        raise _StageReject("question", "decompose_parse")
    except question_mod.RephraseFailed:
        raise _StageReject("question", "rephrase_failed")
    except ContextOverflow:
        raise _StageReject("question", "context_overflow")
    except (GatewayError, question_mod.UnparseableJudgment):
        raise _StageReject("question", "backend_error")

    # ---- answer stage --------------------------------------------------------
    try:
        captions = {
            img.uri: gateway.caption_image(img.uri, question_text)
            for doc in docs
            for img in doc.image_blocks()
        }
        pair = answer_mod.generate_answer(
            question_text, docs, captions, gateway, config.short_word_cap
        )
        answer_verdict = answer_mod.validate_answer(
            pair, question_text, docs, captions, gateway, k=config.vote_k
        )
        if not answer_verdict.passed:
            raise _StageReject("answer", answer_verdict.reason or "answer_invalid")
    except answer_mod.UnparseableAnswer:
        raise _StageReject("answer", "answer_parse")
    except GatewayError:
        raise _StageReject("answer", "backend_error")

    # ---- query stage ---------------------------------------------------------
    try:
        plan = query_mod.generate_query(question_text, pair, docs, gateway)
        query_verdict = query_mod.validate_query(
            plan,
            question_text,
            index,
            group,
            gateway,
            k=config.retrieval_k,
            min_sources=config.min_source_hits,
        )
        if not query_verdict.passed:
            raise _StageReject("query", "retrieval_miss")
    except query_mod.UnparseableQuery:
        raise _StageReject("query", "query_parse")
    except GatewayError:
        raise _StageReject("query", "backend_error")

    transcript_keys = sorted({key for _, key in gateway.request_log[log_start:]})
    return Sample(
        id=sample_id_for_question(question_text),
        question=question_text,
        answer_short=pair.short,
        answer_long=pair.long,
        query_steps=plan,
        source_doc_ids=group.doc_ids,
        modalities=modality.modalities or frozenset(),
        link_kind=group.link_kind,
        provenance={
            "backend": gateway.backend.id,
            "shot_ids": list(candidate.fewshot_ids),
            "question_attempts": candidate.attempts,
            "rephrased": rephrased,
            "transcript_keys": transcript_keys,
            "methods": {
                "vote_rule": "unanimous_normalized_short",
                "relation_rule": "same_document_cooccurrence",
                "retrieval_text": "question_plus_step_instructions",
            },
        },
        validation={
            "gates": {"question": True, "answer": True, "query": True},
            "question": {
                "attempts": candidate.attempts,
                "hop_class": verdict.hop_class.value,
                "rephrased": rephrased,
            },
            "answer": {"votes": answer_verdict.votes},
            "query": {"hits": sorted(query_verdict.hits)},
        },
    )
