"""Shared helpers: document factories, scripted gateways, a WSGI client."""

from __future__ import annotations

import io
import json
from pathlib import Path

import pytest

from mmqasynth.corpus import Document, ImageBlock, TableBlock, TextBlock
from mmqasynth.gateway import Gateway, ScriptedBackend
from mmqasynth.query import QueryPlan, QueryStep
from mmqasynth.store import Sample

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def make_doc(
    doc_id: str,
    title: str | None = None,
    texts: tuple[str, ...] = (),
    images: tuple[tuple[str, str], ...] = (),  # (uri, caption)
    table_rows: tuple[tuple[str, ...], ...] = (),
    outlinks: tuple[str, ...] = (),
) -> Document:
    blocks = [TextBlock(t) for t in texts]
    blocks += [ImageBlock(uri=u, alt="", caption=c) for u, c in images]
    if table_rows:
        blocks.append(TableBlock(rows=table_rows, header=True))
    return Document(
        id=doc_id,
        title=title or doc_id,
        blocks=tuple(blocks),
        outlinks=outlinks,
    )


def scripted_gateway(script=None, embedder=None, dim=8, store_dir=None, **kwargs) -> Gateway:
    backend = ScriptedBackend(script=script, embedder=embedder, dim=dim)
    return Gateway(backend, store_dir=store_dir, backoff_base=0.0, **kwargs)


def make_sample(
    idx: int,
    modalities: set[str],
    n_sources: int = 2,
    question: str | None = None,
    answer_short: str = "a",
) -> Sample:
    question = question or f"What does fixture sample number {idx} ask about exactly?"
    steps = tuple(
        QueryStep(step_no=i + 1, doc_title=f"Doc {j}", target_modality="text", instruction=f"step {i}")
        for i, j in enumerate(range(2))
    )
    return Sample(
        id=f"s{idx:04d}",
        question=question,
        answer_short=answer_short,
        answer_long=f"long answer {idx}",
        query_steps=QueryPlan(steps=steps),
        source_doc_ids=tuple(f"d{idx}_{k}" for k in range(n_sources)),
        modalities=frozenset(modalities),
        link_kind="hyperlink",
        provenance={"backend": "test"},
        validation={"gates": {"question": True, "answer": True, "query": True}},
    )


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion at the end of the run."""
    reports = []
    for key in ("passed", "failed"):
        reports += [r for r in terminalreporter.stats.get(key, []) if hasattr(r, "when")]
    acceptance = [
        r for r in reports if r.when == "call" and "test_acceptance" in r.nodeid
    ]
    if not acceptance:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for report in sorted(acceptance, key=lambda r: r.nodeid):
        verdict = "PASS" if report.passed else "FAIL"
        terminalreporter.write_line(f"{verdict}  {report.nodeid.split('::')[-1]}")


def wsgi_request(app, method: str, path: str, body: dict | None = None, token: str | None = None):
    """Drive a WSGI app in-process; returns (status_code, parsed_json)."""
    raw = json.dumps(body).encode("utf-8") if body is not None else b""
    environ = {
        "REQUEST_METHOD": method,
        "PATH_INFO": path,
        "CONTENT_LENGTH": str(len(raw)),
        "wsgi.input": io.BytesIO(raw),
    }
    if token:
        environ["HTTP_AUTHORIZATION"] = f"Bearer {token}"
    captured = {}

    def start_response(status, headers):
        captured["status"] = int(status.split()[0])
        captured["headers"] = headers

    chunks = app(environ, start_response)
    payload = b"".join(chunks)
    return captured["status"], json.loads(payload) if payload else None
