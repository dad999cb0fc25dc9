"""Few-shot selection, generation retries, and the question gates."""

from __future__ import annotations

import pytest

from mmqasynth.prompts import TASK_PROJECTION, TASK_SINGLE_DOC
from mmqasynth.question import (
    DuplicateExhausted,
    Exemplar,
    HopClass,
    NotEnoughExemplars,
    RephraseFailed,
    UnparseableDecomposition,
    check_multimodal,
    classify_multihop,
    decompose_question,
    generate_question,
    has_conjoined_clauses,
    rephrase_concise,
    select_fewshot,
)

from conftest import make_doc, scripted_gateway

POOL = [
    Exemplar(id=f"ex{i}", documents=("# A\ntext", "# B\ntext"), question=f"q{i}?", answer=f"a{i}")
    for i in range(5)
]

# the three-row taxonomy the multihop gate implements
Q_UNRELATED = (
    "In what year did Mike Tyson become the youngest heavyweight champion, "
    "and who is the president of the United States?"
)
Q_OPEN_ENDED = (
    "In what year did Mike Tyson become the youngest heavyweight champion, "
    "and who was the president of the United States at that time?"
)
Q_CONCISE = (
    "Who was the president of the United States when Mike Tyson became "
    "the youngest heavyweight champion?"
)

SUB_YEAR = "In what year did Mike Tyson become the youngest heavyweight champion?"
SUB_PRESIDENT_NOW = "Who is the president of the United States?"
SUB_PRESIDENT_THEN = "Who was the president of the United States at that time?"


def tyson_docs():
    return [
        make_doc("tyson", title="Mike Tyson", texts=("Mike Tyson became champion in 1986.",)),
        make_doc("presidents", title="List of Presidents", texts=("Presidents by year table prose.",)),
    ]


# --- select_fewshot ---------------------------------------------------------


def test_select_fewshot_zero_shot():
    assert select_fewshot(POOL, 0, seed=1) == []


def test_select_fewshot_whole_pool_when_n_equals_pool():
    picked = select_fewshot(POOL[:3], 3, seed=5)
    assert sorted(e.id for e in picked) == ["ex0", "ex1", "ex2"]


def test_select_fewshot_seeded_determinism():
    assert select_fewshot(POOL, 2, seed=9) == select_fewshot(POOL, 2, seed=9)


def test_select_fewshot_bounds():
    with pytest.raises(NotEnoughExemplars):
        select_fewshot(POOL, 4, seed=0)  # cap is 3
    with pytest.raises(NotEnoughExemplars):
        select_fewshot(POOL[:1], 2, seed=0)


# --- generate_question --------------------------------------------------------


def test_generate_question_fresh_text_accepted_first_attempt():
    gw = scripted_gateway({"question_gen": "A fresh question?"})
    cand = generate_question(tyson_docs(), POOL[:1], prior=[], gateway=gw)
    assert cand.text == "A fresh question?"
    assert cand.attempts == 1


def test_generate_question_retries_with_prior_listed():
    responses = iter(["Old question?", "New question?"])

    def script(spec):
        return next(responses)

    gw = scripted_gateway({"question_gen": script})
    cand = generate_question(tyson_docs(), [], prior=["Old question?"], gateway=gw)
    assert cand.text == "New question?"
    assert cand.attempts == 2
    # the retry prompt carried the duplicate text
    retry_template, retry_key = gw.request_log[-1]
    assert retry_template == "question_gen"
    assert any("Old question?" in s.slots.get("prior_questions", "")
               for s in _logged_specs(gw))


_SPEC_LOG = []


def _logged_specs(gw):
    return _SPEC_LOG


@pytest.fixture(autouse=True)
def _capture_specs(monkeypatch):
    _SPEC_LOG.clear()
    from mmqasynth.gateway import Gateway

    original = Gateway.complete

    def wrapper(self, spec):
        _SPEC_LOG.append(spec)
        return original(self, spec)

    monkeypatch.setattr(Gateway, "complete", wrapper)


def test_generate_question_duplicate_exhausted():
    gw = scripted_gateway({"question_gen": "Same question?"})
    with pytest.raises(DuplicateExhausted):
        generate_question(
            tyson_docs(), [], prior=["Same question?"], gateway=gw, max_attempts=3
        )


def test_generate_question_duplicate_against_dataset():
    gw = scripted_gateway({"question_gen": "Known question?"})
    with pytest.raises(DuplicateExhausted):
        generate_question(
            tyson_docs(), [], prior=[], gateway=gw,
            seen_global={"known question?"},
        )


def test_generate_question_case_whitespace_normalized_duplicate():
    gw = scripted_gateway({"question_gen": "  SAME   question? "})
    with pytest.raises(DuplicateExhausted):
        generate_question(tyson_docs(), [], prior=["same question?"], gateway=gw)


# --- decompose_question ----------------------------------------------------------


def test_decompose_conjunction_question_two_parts():
    gw = scripted_gateway({"decompose": f"1. {SUB_YEAR}\n2. {SUB_PRESIDENT_NOW}"})
    subs = decompose_question(Q_UNRELATED, gw)
    assert subs == [SUB_YEAR, SUB_PRESIDENT_NOW]


def test_decompose_atomic_question_returns_itself():
    gw = scripted_gateway({"decompose": Q_CONCISE})
    assert decompose_question(Q_CONCISE, gw) == [Q_CONCISE]


def test_decompose_empty_response_unparseable():
    gw = scripted_gateway({"decompose": ""})
    with pytest.raises(UnparseableDecomposition):
        decompose_question(Q_CONCISE, gw)


# --- classify_multihop -------------------------------------------------------------


def single_doc_judge(yes_pairs):
    """yes_pairs: set of (sub fragment, doc title) that are single-doc answerable."""

    def script(spec):
        if spec.slots["task"] == TASK_SINGLE_DOC:
            sub = spec.slots["question"].lower()
            title = spec.slots["context"].splitlines()[0][2:]
            return "Yes" if any(frag.lower() in sub and title == t for frag, t in yes_pairs) else "No"
        return "No"

    return script


def test_classify_unrelated_facts_rejected():
    gw = scripted_gateway({
        "judge": single_doc_judge({("what year", "Mike Tyson"), ("who is the president", "List of Presidents")})
    })
    verdict = classify_multihop(
        Q_UNRELATED, [SUB_YEAR, SUB_PRESIDENT_NOW], tyson_docs(), gw
    )
    assert verdict.hop_class is HopClass.UNRELATED_FACTS
    assert all(flag for _, flag in verdict.subquestions)


def test_classify_related_open_ended():
    gw = scripted_gateway({
        "judge": single_doc_judge({("what year", "Mike Tyson")})
    })
    verdict = classify_multihop(
        Q_OPEN_ENDED, [SUB_YEAR, SUB_PRESIDENT_THEN], tyson_docs(), gw
    )
    assert verdict.hop_class is HopClass.RELATED_OPEN_ENDED


def test_classify_concise_multihop():
    gw = scripted_gateway({"judge": single_doc_judge({("what year", "Mike Tyson")})})
    verdict = classify_multihop(
        Q_CONCISE, [SUB_YEAR, "Who was the president in that year?"], tyson_docs(), gw
    )
    assert verdict.hop_class is HopClass.CONCISE_MULTIHOP
    assert verdict.retained_text == Q_CONCISE


def test_conjoined_clause_detection():
    assert has_conjoined_clauses(Q_UNRELATED)
    assert has_conjoined_clauses(Q_OPEN_ENDED)
    assert not has_conjoined_clauses(Q_CONCISE)
    # noun coordination is not clause conjunction
    assert not has_conjoined_clauses("Which battle involved France and Germany?")


# --- rephrase_concise -----------------------------------------------------------------


def test_rephrase_marker_check_failure():
    from mmqasynth.question import HopVerdict

    gw = scripted_gateway({
        "rephrase": "What year did it happen, and who was the president?",
        "decompose": "irrelevant",
        "judge": "No",
    })
    verdict = HopVerdict(
        HopClass.RELATED_OPEN_ENDED,
        ((SUB_YEAR, True), (SUB_PRESIDENT_THEN, False)),
        None,
    )
    with pytest.raises(RephraseFailed):
        rephrase_concise(Q_OPEN_ENDED, verdict, tyson_docs(), gw)


def test_rephrase_valid_revision_passes_reprobe():
    from mmqasynth.question import HopVerdict

    gw = scripted_gateway({
        "rephrase": Q_CONCISE,
        "decompose": f"{SUB_YEAR}\nWho was the president in that year?",
        "judge": single_doc_judge({("what year", "Mike Tyson")}),
    })
    verdict = HopVerdict(
        HopClass.RELATED_OPEN_ENDED,
        ((SUB_YEAR, True), (SUB_PRESIDENT_THEN, False)),
        None,
    )
    revised = rephrase_concise(Q_OPEN_ENDED, verdict, tyson_docs(), gw)
    assert revised == Q_CONCISE


def test_rephrase_failing_reprobe_rejected():
    from mmqasynth.question import HopVerdict

    # revision decomposes into parts that are all single-doc answerable
    gw = scripted_gateway({
        "rephrase": "When did Tyson win?",
        "decompose": "When did Tyson win?",
        "judge": single_doc_judge({("When did Tyson win?", "Mike Tyson")}),
    })
    verdict = HopVerdict(
        HopClass.RELATED_OPEN_ENDED, ((SUB_YEAR, True), (SUB_PRESIDENT_THEN, False)), None
    )
    with pytest.raises(RephraseFailed):
        rephrase_concise(Q_OPEN_ENDED, verdict, tyson_docs(), gw)


# --- check_multimodal ---------------------------------------------------------------------


def multimodal_docs():
    return [
        make_doc(
            "flag", title="Flag Photo",
            texts=("The photograph became famous.",),
            images=(("img/flag.png", "Soldiers raising a flag."),),
        ),
        make_doc(
            "battle", title="Battle Page",
            texts=("The battle lasted five weeks.",),
            table_rows=(("Country", "Killed"), ("United States", "539")),
        ),
    ]


def test_single_modality_sufficient_rejected():
    def judge(spec):
        if spec.slots["task"] == TASK_PROJECTION:
            # the text-only projection suffices
            return "Yes" if "photograph became famous" in spec.slots["context"] else "No"
        return "No"

    gw = scripted_gateway({"judge": judge})
    verdict = check_multimodal("Some question?", multimodal_docs(), gw)
    assert not verdict.passed
    assert verdict.sufficient_projection == "text"


def test_all_projections_insufficient_passes_with_modalities():
    gw = scripted_gateway({"judge": "No", "modality_probe": "image, table"})
    verdict = check_multimodal("Some question?", multimodal_docs(), gw)
    assert verdict.passed
    assert verdict.modalities == frozenset({"image", "table"})
    assert len(verdict.modalities) >= 2


def test_unparseable_probe_falls_back_to_present_modalities():
    gw = scripted_gateway({"judge": "No", "modality_probe": "hmm unclear"})
    verdict = check_multimodal("Some question?", multimodal_docs(), gw)
    assert verdict.passed
    assert verdict.modalities == frozenset({"text", "image", "table"})


def test_projection_contents_are_disjoint():
    gw = scripted_gateway({"judge": "No", "modality_probe": "image, table"})
    check_multimodal("Some question?", multimodal_docs(), gw)
    projections = [
        s.slots["context"] for s in _SPEC_LOG
        if s.template_id == "judge" and s.slots["task"] == TASK_PROJECTION
    ]
    text_only, image_only, table_only = projections
    assert "photograph became famous" in text_only and "raising a flag" not in text_only
    assert "raising a flag" in image_only and "539" not in image_only
    assert "539" in table_only and "photograph became famous" not in table_only
