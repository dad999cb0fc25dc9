"""Answer parsing, entity/relation extraction, voting, and validation."""

from __future__ import annotations

import itertools
from collections import Counter

import pytest

from mmqasynth.answer import (
    AnswerPair,
    UnparseableAnswer,
    extract_entities,
    extract_relations,
    generate_answer,
    parse_answer_pair,
    validate_answer,
    vote_consistency,
)
from mmqasynth.evalkit import normalize_answer
from mmqasynth.prompts import TASK_ENTITIES, TASK_RELATIONS

from conftest import make_doc, scripted_gateway


def casualty_docs():
    return [
        make_doc(
            "photo", title="Flag Photo",
            texts=("The photograph shows soldiers of the United States.",),
            images=(("img/flag.png", "Soldiers raising the United States flag."),),
        ),
        make_doc(
            "battle", title="Battle Page",
            texts=("The battle lasted five weeks.",),
            table_rows=(("Country", "Killed"), ("United States", "539")),
        ),
    ]


CAPTIONS = {"img/flag.png": "Soldiers raising the United States flag on a hill."}


# --- parsing ---------------------------------------------------------------


def test_parse_long_short_pair():
    pair = parse_answer_pair("Long: The table records 539 deaths.\nShort: 539")
    assert pair.long == "The table records 539 deaths."
    assert pair.short == "539"


def test_parse_answer_whitespace_normalized():
    pair = parse_answer_pair("Long: x\nShort:   Music   from  Big Pink ")
    assert pair.short == "Music from Big Pink"


def test_parse_answer_missing_delimiter():
    with pytest.raises(UnparseableAnswer):
        parse_answer_pair("just some text with no fields")
    with pytest.raises(UnparseableAnswer):
        parse_answer_pair("Long: only a long answer")


def test_parse_answer_short_word_cap():
    too_long = " ".join(["word"] * 11)
    with pytest.raises(UnparseableAnswer):
        parse_answer_pair(f"Long: x\nShort: {too_long}")


def test_generate_answer_iwo_fixture():
    gw = scripted_gateway({
        "answer_gen": "Long: The casualty table lists 539 United States personnel killed.\nShort: 539"
    })
    pair = generate_answer("How many died?", casualty_docs(), CAPTIONS, gw)
    assert pair.short == "539"


def test_answer_pair_requires_nonempty_short():
    with pytest.raises(ValueError):
        AnswerPair(long="x", short="")


# --- entity extraction --------------------------------------------------------


def test_digit_scan_is_backend_free():
    entities = extract_entities("539", "answer", gateway=None)
    assert [(e.surface, e.kind) for e in entities] == [("539", "number")]


def test_empty_text_no_entities():
    assert extract_entities("", "answer", gateway=None) == []


def test_entities_digit_scan_plus_scripted_extractor():
    gw = scripted_gateway({
        "judge": lambda s: "Mike Tyson | person" if s.slots["task"] == TASK_ENTITIES else "No"
    })
    entities = extract_entities("Mike Tyson became champion in 1986", "answer", gw)
    surfaces = {(e.surface, e.kind) for e in entities}
    assert ("1986", "number") in surfaces
    assert ("Mike Tyson", "person") in surfaces


def test_entities_unknown_kind_mapped_to_other():
    gw = scripted_gateway({"judge": "thing | gadget"})
    entities = extract_entities("thing", "answer", gw)
    assert entities[-1].kind == "other"


def test_number_with_thousands_separator():
    entities = extract_entities("about 1,083 died", "answer", gateway=None)
    assert ("1,083", "number") in {(e.surface, e.kind) for e in entities}


# --- relation extraction ---------------------------------------------------------


def test_relations_empty_text():
    gw = scripted_gateway({"judge": "(a, b, c)"})
    assert extract_relations("", "answer", gw) == []


def test_relations_scripted_triple():
    gw = scripted_gateway({
        "judge": lambda s: "(USA, casualties, 539)" if s.slots["task"] == TASK_RELATIONS else ""
    })
    triples = extract_relations("text", "answer", gw)
    assert len(triples) == 1
    assert (triples[0].subject, triples[0].predicate, triples[0].object) == (
        "USA", "casualties", "539"
    )


def test_relations_malformed_line_skipped_with_counter():
    gw = scripted_gateway({
        "judge": "(a, b, c)\nnot a triple at all\n(d, e, f)"
    })
    counters = Counter()
    triples = extract_relations("text", "answer", gw, counters)
    assert len(triples) == 2
    assert counters["relation_lines_skipped"] == 1


# --- voting -------------------------------------------------------------------------


def vote_gateway(shorts):
    texts = [f"Long: some explanation.\nShort: {s}" for s in shorts]

    def script(spec):
        assert spec.sampling.n == len(texts)
        return texts

    return scripted_gateway({"answer_gen": script})


def test_vote_unanimous_accepts():
    gw = vote_gateway(["539"] * 5)
    result = vote_consistency("q?", casualty_docs(), CAPTIONS, gw, k=5)
    assert result.accepted and result.consensus == "539"


def test_vote_four_of_five_rejects():
    gw = vote_gateway(["539", "539", "540", "539", "539"])
    result = vote_consistency("q?", casualty_docs(), CAPTIONS, gw, k=5)
    assert not result.accepted and result.consensus is None


def test_vote_normalized_equality():
    gw = vote_gateway(["The Beatles", "the beatles.", "the beatles.", "the beatles.", "the beatles."])
    result = vote_consistency("q?", casualty_docs(), CAPTIONS, gw, k=5)
    assert result.accepted
    assert normalize_answer(result.consensus) == ["beatles"]


def test_vote_reorder_invariance():
    votes = ["The Beatles", "the beatles.", "the beatles.", "the beatles.", "the beatles."]
    outcomes = set()
    consensus_norms = set()
    for perm in set(itertools.permutations(votes)):
        result = vote_consistency("q?", casualty_docs(), CAPTIONS, vote_gateway(list(perm)), k=5)
        outcomes.add(result.accepted)
        consensus_norms.add(tuple(normalize_answer(result.consensus)))
    assert outcomes == {True}
    assert consensus_norms == {("beatles",)}


def test_vote_unparseable_generation_rejects():
    texts = ["Long: e.\nShort: 539"] * 4 + ["garbled"]
    gw = scripted_gateway({"answer_gen": lambda s: texts})
    result = vote_consistency("q?", casualty_docs(), CAPTIONS, gw, k=5)
    assert not result.accepted


def test_vote_requires_k_at_least_two():
    with pytest.raises(ValueError):
        vote_consistency("q?", casualty_docs(), CAPTIONS, vote_gateway(["x"]), k=1)


# --- validate_answer ------------------------------------------------------------------


def validating_gateway(votes, entity_lines="", relation_lines=""):
    def judge(spec):
        task = spec.slots["task"]
        if task == TASK_ENTITIES:
            return entity_lines
        if task == TASK_RELATIONS:
            return relation_lines
        return "No"

    def answer(spec):
        return votes if spec.sampling.n > 1 else votes[:1]

    return scripted_gateway({"judge": judge, "answer_gen": answer})


def test_validate_grounded_number_passes_all_checks():
    votes = ["Long: The table shows 539 deaths.\nShort: 539"] * 5
    gw = validating_gateway(votes, relation_lines="(United States, killed, 539)")
    pair = AnswerPair(long="The table shows 539 deaths for the United States.", short="539")
    verdict = validate_answer(pair, "q?", casualty_docs(), CAPTIONS, gw)
    assert verdict.passed and verdict.reason is None
    assert verdict.votes == 5


def test_validate_ungrounded_number_is_ner_mismatch():
    votes = ["Long: x.\nShort: 541"] * 5
    gw = validating_gateway(votes)
    pair = AnswerPair(long="The records disagree.", short="541")
    verdict = validate_answer(pair, "q?", casualty_docs(), CAPTIONS, gw)
    assert not verdict.passed and verdict.reason == "ner_mismatch"


def test_validate_relation_without_cooccurrence_is_relation_mismatch():
    votes = ["Long: x.\nShort: 539"] * 5
    gw = validating_gateway(votes, relation_lines="(United States, twinned with, Adelaide)")
    pair = AnswerPair(long="Some claim.", short="539")
    verdict = validate_answer(pair, "q?", casualty_docs(), CAPTIONS, gw)
    assert verdict.reason == "relation_mismatch"


def test_validate_vote_split_is_last_gate():
    votes = ["Long: x.\nShort: 539"] * 4 + ["Long: x.\nShort: 540"]
    gw = validating_gateway(votes)
    pair = AnswerPair(long="claim", short="539")
    verdict = validate_answer(pair, "q?", casualty_docs(), CAPTIONS, gw)
    assert verdict.reason == "vote_split"


def test_validate_entity_grounded_in_caption():
    # the surface appears only in the question-conditioned caption
    votes = ["Long: x.\nShort: 539"] * 5
    gw = validating_gateway(votes, entity_lines="hill | location")
    pair = AnswerPair(long="claim", short="on the hill")
    verdict = validate_answer(pair, "q?", casualty_docs(), CAPTIONS, gw)
    assert verdict.passed


def test_validate_makes_no_caption_requests():
    votes = ["Long: x.\nShort: 539"] * 5
    gw = validating_gateway(votes)
    pair = AnswerPair(long="claim", short="539")
    before = gw.counters["caption_requests"]
    validate_answer(pair, "q?", casualty_docs(), CAPTIONS, gw)
    assert gw.counters["caption_requests"] == before == 0


def test_validate_token_sublist_not_substring():
    # "53" must not ground against "539"
    votes = ["Long: x.\nShort: 53"] * 5
    gw = validating_gateway(votes)
    pair = AnswerPair(long="claim", short="53")
    verdict = validate_answer(pair, "q?", casualty_docs(), CAPTIONS, gw)
    assert verdict.reason == "ner_mismatch"
