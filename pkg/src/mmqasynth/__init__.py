"""Synthesis engine for multimodal multihop QA datasets.

Builds validation-gated question/answer/query triples from pools of
interlinked multimodal documents, with pluggable model backends, exact
retrieval-based query validation, dataset statistics, extractive-QA
metrics, and a human-review HTTP service for benchmark curation.
"""

from .corpus import Document, DocumentGroup, Segment, parse_document, segment_document
from .evalkit import exact_match, fleiss_kappa, normalize_answer, token_f1
from .gateway import Gateway, PromptSpec, ScriptedBackend, build_gateway
from .pipeline import PipelineConfig, SynthesisResult, run_synthesis
from .store import Sample, compute_stats, export_dataset, import_dataset

__version__ = "0.1.0"

__all__ = [
    "Document",
    "DocumentGroup",
    "Gateway",
    "PipelineConfig",
    "PromptSpec",
    "Sample",
    "ScriptedBackend",
    "Segment",
    "SynthesisResult",
    "build_gateway",
    "compute_stats",
    "exact_match",
    "export_dataset",
    "fleiss_kappa",
    "import_dataset",
    "normalize_answer",
    "parse_document",
    "run_synthesis",
    "segment_document",
    "token_f1",
]
