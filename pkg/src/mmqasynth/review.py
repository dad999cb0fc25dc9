"""HTTP service for human benchmark curation and A/B answer evaluation.

Items are split into disjoint batches, each served to a fixed number of
annotators. In A/B mode every (item, annotator) pair gets a seeded-random
answer ordering; which method produced "Answer A" stays server-side and is
only used after submission to resolve judgments to method-level outcomes,
so neither annotators nor the browser ever learn the mapping.

The service is a plain WSGI application (run it with any WSGI server; the
CLI uses wsgiref) speaking versioned JSON:

    POST /annotators            register, returns a bearer token
    GET  /items/next            next unjudged item for the caller
    POST /judgments             submit or overwrite a judgment
    GET  /reports/agreement     per-batch Fleiss' kappa (post-mapping)
    GET  /reports/distribution  four-region outcome counts
    GET  /health
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .evalkit import DegenerateMatrix, fleiss_kappa

__all__ = [
    "AB_CHOICES",
    "InsufficientItems",
    "InsufficientJudgments",
    "Judgment",
    "ReviewItemSource",
    "ReviewService",
    "assign_batches",
    "load_items",
    "resolve_choice",
]

SCHEMA = "review/v1"
AB_CHOICES = ("A_correct", "B_correct", "both", "neither")
SCORE_CHOICES = (0, 1)
METHOD_OUTCOMES = ("validated_correct", "baseline_correct", "both", "neither")


class InsufficientItems(Exception):
    pass


class InsufficientJudgments(Exception):
    pass


@dataclass(frozen=True)
class ReviewItemSource:
    """One item as loaded from disk: question, documents, method answers."""

    id: str
    question: str
    documents: tuple[Mapping, ...]
    answer_validated: str
    answer_baseline: str | None
    mode: str  # "AB" | "score"


@dataclass
class Judgment:
    annotator_id: str
    item_id: str
    choice: object  # AB choice string, or 0/1 in score mode
    rationale: str | None
    seq: int


def load_items(path: str | Path) -> list[ReviewItemSource]:
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            answers = rec.get("answers", {})
            items.append(
                ReviewItemSource(
                    id=str(rec["id"]),
                    question=str(rec["question"]),
                    documents=tuple(rec.get("documents", ())),
                    answer_validated=str(answers.get("validated", "")),
                    answer_baseline=(
                        str(answers["baseline"]) if "baseline" in answers else None
                    ),
                    mode=str(rec.get("mode", "AB")),
                )
            )
    return items


def assign_batches(
    item_ids: Sequence[str],
    n_batches: int,
    per_batch: int,
    raters_per_batch: int,
    seed: int,
) -> list[list[str]]:
    """Seeded disjoint batches; total annotator slots = batches x raters."""
    needed = n_batches * per_batch
    if needed > len(item_ids):
        raise InsufficientItems(f"need {needed} items, have {len(item_ids)}")
    shuffled = list(item_ids)
    random.Random(seed).shuffle(shuffled)
    return [shuffled[i * per_batch : (i + 1) * per_batch] for i in range(n_batches)]


def _swap_for(seed: int, item_id: str, annotator_id: str) -> bool:
    """Deterministic per item x annotator: does Answer A hold the baseline?"""
    return random.Random(f"{seed}:{item_id}:{annotator_id}").random() < 0.5


def resolve_choice(choice: str, swapped: bool) -> str:
    """Translate a position-based AB choice into a method-level outcome."""
    if choice == "both" or choice == "neither":
        return choice
    if choice not in ("A_correct", "B_correct"):
        raise ValueError(f"invalid AB choice {choice!r}")
    picked_a = choice == "A_correct"
    picked_validated = picked_a != swapped
    return "validated_correct" if picked_validated else "baseline_correct"


@dataclass
class _Annotator:
    annotator_id: str
    token: str
    batch_idx: int
    judgments: dict[str, Judgment] = field(default_factory=dict)
    history: list[Judgment] = field(default_factory=list)


class ReviewService:
    """In-memory review state plus its WSGI surface."""

    def __init__(
        self,
        items: Sequence[ReviewItemSource],
        n_batches: int,
        per_batch: int,
        raters_per_batch: int,
        seed: int = 0,
        audit_path: str | Path | None = None,
    ) -> None:
        self.items = {item.id: item for item in items}
        if len(self.items) != len(items):
            raise ValueError("duplicate item ids")
        self.seed = seed
        self.raters_per_batch = raters_per_batch
        self.batches = assign_batches(
            [item.id for item in items], n_batches, per_batch, raters_per_batch, seed
        )
        self._annotators: dict[str, _Annotator] = {}  # token -> state
        self._slot_counts = [0] * n_batches
        self._rng = random.Random(seed ^ 0x5EED)
        self._seq = 0
        self._lock = threading.Lock()
        self._audit_path = Path(audit_path) if audit_path else None

    # -- registration and assignment -----------------------------------------

    def register(self, name: str | None = None) -> _Annotator:
        with self._lock:
            batch_idx = next(
                (
                    i
                    for i, count in enumerate(self._slot_counts)
                    if count < self.raters_per_batch
                ),
                None,
            )
            if batch_idx is None:
                raise InsufficientItems("all annotator slots are filled")
            self._slot_counts[batch_idx] += 1
            annotator_id = name or f"annotator-{len(self._annotators) + 1}"
            token = f"tok-{self._rng.getrandbits(64):016x}"
            state = _Annotator(annotator_id, token, batch_idx)
            self._annotators[token] = state
            return state

    def annotator_slots(self) -> int:
        return len(self.batches) * self.raters_per_batch

    def _annotator(self, token: str) -> _Annotator:
        state = self._annotators.get(token)
        if state is None:
            raise KeyError("unknown annotator token")
        return state

    def swapped(self, item_id: str, annotator_id: str) -> bool:
        return _swap_for(self.seed, item_id, annotator_id)

    # -- item flow -------------------------------------------------------------

    def next_item(self, token: str) -> dict | None:
        """View of the first unjudged item in batch order, or None when done.

        The response never contains the method mapping.
        """
        state = self._annotator(token)
        batch = self.batches[state.batch_idx]
        pending = [iid for iid in batch if iid not in state.judgments]
        progress = {"judged": len(batch) - len(pending), "total": len(batch)}
        if not pending:
            return None
        item = self.items[pending[0]]
        view = {
            "schema": SCHEMA,
            "item_id": item.id,
            "mode": item.mode,
            "question": item.question,
            "documents": list(item.documents),
            "progress": progress,
        }
        if item.mode == "AB":
            swapped = self.swapped(item.id, state.annotator_id)
            first = item.answer_baseline if swapped else item.answer_validated
            second = item.answer_validated if swapped else item.answer_baseline
            view["answer_a"] = first
            view["answer_b"] = second
            view["choices"] = list(AB_CHOICES)
        else:
            view["answer"] = item.answer_validated
            view["choices"] = list(SCORE_CHOICES)
        return view

    def submit(self, token: str, item_id: str, choice, rationale: str | None = None) -> Judgment:
        state = self._annotator(token)
        batch = self.batches[state.batch_idx]
        if item_id not in batch:
            raise PermissionError(f"item {item_id!r} is not assigned to this annotator")
        item = self.items[item_id]
        if item.mode == "AB":
            if choice not in AB_CHOICES:
                raise ValueError(f"invalid choice {choice!r} for AB mode")
        elif choice not in SCORE_CHOICES:
            raise ValueError(f"invalid choice {choice!r} for score mode")
        with self._lock:
            self._seq += 1
            judgment = Judgment(state.annotator_id, item_id, choice, rationale, self._seq)
            state.history.append(judgment)  # audit trail keeps overwrites
            state.judgments[item_id] = judgment
        self._audit(judgment)
        return judgment

    def _audit(self, judgment: Judgment) -> None:
        if self._audit_path is None:
            return
        record = {
            "schema": "judgment/v1",
            "annotator": judgment.annotator_id,
            "item": judgment.item_id,
            "choice": judgment.choice,
            "rationale": judgment.rationale,
            "seq": judgment.seq,
        }
        with self._lock:
            with open(self._audit_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    # -- reports ----------------------------------------------------------------

    def _resolved_outcome(self, judgment: Judgment) -> str:
        item = self.items[judgment.item_id]
        if item.mode == "AB":
            swapped = self.swapped(judgment.item_id, judgment.annotator_id)
            return resolve_choice(judgment.choice, swapped)
        return "valid" if judgment.choice == 1 else "invalid"

    def _judgments_by_item(self) -> dict[str, list[Judgment]]:
        by_item: dict[str, list[Judgment]] = {}
        for state in self._annotators.values():
            for judgment in state.judgments.values():
                by_item.setdefault(judgment.item_id, []).append(judgment)
        return by_item

    def agreement_report(self) -> dict:
        """Per-batch Fleiss' kappa over method-resolved judgment categories."""
        by_item = self._judgments_by_item()
        batches_out = []
        for batch_idx, batch in enumerate(self.batches):
            judged = [iid for iid in batch if by_item.get(iid)]
            if not judged:
                continue
            counts = {len(by_item[iid]) for iid in judged}
            if min(counts) < 2:
                raise InsufficientJudgments(
                    f"batch {batch_idx}: every judged item needs >= 2 judgments"
                )
            raters = min(counts)
            modes = {self.items[iid].mode for iid in judged}
            if len(modes) > 1:
                raise ValueError(f"batch {batch_idx} mixes AB and score items")
            categories = (
                list(METHOD_OUTCOMES) if modes == {"AB"} else ["invalid", "valid"]
            )
            matrix = []
            for iid in judged:
                row = [0] * len(categories)
                # truncate to the common rater count so row sums are constant
                for judgment in sorted(by_item[iid], key=lambda j: j.seq)[:raters]:
                    row[categories.index(self._resolved_outcome(judgment))] += 1
                matrix.append(row)
            try:
                kappa = fleiss_kappa(matrix)
            except (DegenerateMatrix, ValueError):
                kappa = None
            batches_out.append(
                {
                    "batch": batch_idx,
                    "items": len(judged),
                    "raters": raters,
                    "kappa": kappa,
                    "categories": categories,
                }
            )
        return {
            "schema": SCHEMA,
            "batches": batches_out,
            "distribution": self.distribution(),
        }

    def distribution(self) -> dict:
        """Four-region outcome counts; invariant to the A/B randomization."""
        counts = {outcome: 0 for outcome in METHOD_OUTCOMES}
        score_counts = {"valid": 0, "invalid": 0}
        total = 0
        for state in self._annotators.values():
            for judgment in state.judgments.values():
                outcome = self._resolved_outcome(judgment)
                total += 1
                if outcome in counts:
                    counts[outcome] += 1
                else:
                    score_counts[outcome] += 1
        tallies = {
            "validated": counts["validated_correct"] + counts["both"],
            "baseline": counts["baseline_correct"] + counts["both"],
        }
        return {
            "schema": SCHEMA,
            "regions": counts,
            "score": score_counts,
            "method_tallies": tallies,
            "total_judgments": total,
        }

    # -- WSGI surface -------------------------------------------------------------

    def wsgi_app(self, environ: Mapping, start_response: Callable) -> Iterable[bytes]:
        method = environ["REQUEST_METHOD"]
        path = environ.get("PATH_INFO", "/")
        try:
            if method == "OPTIONS":  # CORS preflight for the browser UI
                return _respond(start_response, 200, {"schema": SCHEMA})
            if method == "GET" and path == "/health":
                return _respond(start_response, 200, {"schema": SCHEMA, "status": "ok"})
            if method == "POST" and path == "/annotators":
                body = _read_json(environ)
                state = self.register(body.get("name"))
                return _respond(
                    start_response,
                    200,
                    {
                        "schema": SCHEMA,
                        "token": state.token,
                        "annotator_id": state.annotator_id,
                        "batch": state.batch_idx,
                        "total_items": len(self.batches[state.batch_idx]),
                    },
                )
            if method == "GET" and path == "/items/next":
                token = _bearer_token(environ)
                view = self.next_item(token)
                if view is None:
                    state = self._annotator(token)
                    total = len(self.batches[state.batch_idx])
                    view = {
                        "schema": SCHEMA,
                        "done": True,
                        "progress": {"judged": total, "total": total},
                    }
                return _respond(start_response, 200, view)
            if method == "POST" and path == "/judgments":
                token = _bearer_token(environ)
                body = _read_json(environ)
                judgment = self.submit(
                    token, body["item_id"], body["choice"], body.get("rationale")
                )
                state = self._annotator(token)
                batch = self.batches[state.batch_idx]
                return _respond(
                    start_response,
                    200,
                    {
                        "schema": SCHEMA,
                        "accepted": True,
                        "item_id": judgment.item_id,
                        "progress": {
                            "judged": len(state.judgments),
                            "total": len(batch),
                        },
                    },
                )
            if method == "GET" and path == "/reports/agreement":
                return _respond(start_response, 200, self.agreement_report())
            if method == "GET" and path == "/reports/distribution":
                return _respond(start_response, 200, self.distribution())
            return _respond(
                start_response, 404, {"schema": SCHEMA, "error": "not_found"}
            )
        except KeyError as exc:
            return _respond(
                start_response, 401, {"schema": SCHEMA, "error": "unauthorized", "message": str(exc)}
            )
        except PermissionError as exc:
            return _respond(
                start_response, 403, {"schema": SCHEMA, "error": "not_assigned", "message": str(exc)}
            )
        except (ValueError, InsufficientItems) as exc:
            return _respond(
                start_response, 400, {"schema": SCHEMA, "error": "bad_request", "message": str(exc)}
            )
        except InsufficientJudgments as exc:
            return _respond(
                start_response, 409, {"schema": SCHEMA, "error": "insufficient_judgments", "message": str(exc)}
            )

    __call__ = wsgi_app


def _read_json(environ: Mapping) -> dict:
    try:
        length = int(environ.get("CONTENT_LENGTH") or 0)
    except ValueError:
        length = 0
    raw = environ["wsgi.input"].read(length) if length else b"{}"
    try:
        data = json.loads(raw.decode("utf-8") or "{}")
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed JSON body: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError("JSON body must be an object")
    return data


def _bearer_token(environ: Mapping) -> str:
    header = environ.get("HTTP_AUTHORIZATION", "")
    if not header.startswith("Bearer "):
        raise KeyError("missing bearer token")
    return header[len("Bearer ") :].strip()


def _respond(start_response: Callable, status: int, body: Mapping) -> list[bytes]:
    payload = json.dumps(body, ensure_ascii=False).encode("utf-8")
    reasons = {200: "OK", 400: "Bad Request", 401: "Unauthorized", 403: "Forbidden", 404: "Not Found", 409: "Conflict"}
    start_response(
        f"{status} {reasons.get(status, 'Error')}",
        [
            ("Content-Type", "application/json; charset=utf-8"),
            ("Content-Length", str(len(payload))),
            ("Access-Control-Allow-Origin", "*"),
            ("Access-Control-Allow-Headers", "Authorization, Content-Type"),
            ("Access-Control-Allow-Methods", "GET, POST, OPTIONS"),
        ],
    )
    return [payload]
