"""Gateway contracts: caching, keys, retries, record/replay, counters."""

from __future__ import annotations

import numpy as np
import pytest

from mmqasynth.gateway import (
    BackendExhausted,
    Gateway,
    PromptSpec,
    ReplayBackend,
    ReplayMiss,
    Sampling,
    TransientBackendError,
    cache_key,
)

from conftest import scripted_gateway


def spec(template="question_gen", n=1, temperature=0.7, **slots):
    base = {"documents": "docs", "examples": "(none)"}
    base.update(slots)
    return PromptSpec(template, base, sampling=Sampling(n=n, temperature=temperature))


def test_scripted_echo():
    gw = scripted_gateway({"question_gen": "Q1?"})
    assert gw.complete(spec()).texts == ("Q1?",)


def test_second_identical_call_is_cache_hit():
    gw = scripted_gateway({"question_gen": "Q1?"})
    first = gw.complete(spec())
    second = gw.complete(spec())
    assert not first.cache_hit and second.cache_hit
    assert first.texts == second.texts
    assert gw.counters["complete.backend"] == 1
    assert gw.counters["complete.cache_hit"] == 1


def test_n_five_returns_five_texts():
    gw = scripted_gateway({"answer_gen": "Long: x\nShort: y"})
    response = gw.complete(
        PromptSpec("answer_gen", {"question": "q", "documents": "d"}, sampling=Sampling(n=5))
    )
    assert len(response.texts) == 5


def test_missing_required_slot_rejected():
    with pytest.raises(ValueError):
        PromptSpec("answer_gen", {"question": "q"})  # no documents
    with pytest.raises(ValueError):
        PromptSpec("answer_gen", {"question": "q", "documents": ""})  # empty


def test_cache_key_slot_order_insensitive():
    a = PromptSpec("judge", {"task": "t", "context": "c"})
    b = PromptSpec("judge", dict(reversed(list({"task": "t", "context": "c"}.items()))))
    assert cache_key(a) == cache_key(b)


def test_cache_key_sensitive_to_sampling():
    assert cache_key(spec(temperature=0.7)) != cache_key(spec(temperature=0.2))
    assert cache_key(spec(n=1)) != cache_key(spec(n=5))
    assert cache_key(spec(documents="other")) != cache_key(spec())


def test_default_temperature_is_0_7():
    assert Sampling().temperature == 0.7


class FlakyBackend:
    is_network = False
    id = "flaky"
    dim = 4

    def __init__(self, fail_times: int):
        self.fail_times = fail_times
        self.calls = 0

    def complete(self, spec):
        self.calls += 1
        if self.calls <= self.fail_times:
            raise TransientBackendError("down")
        return ["ok"] * spec.sampling.n

    def embed(self, text):
        return np.ones(self.dim)


def test_retry_succeeds_within_budget():
    backend = FlakyBackend(fail_times=2)
    gw = Gateway(backend, retry_budget=2, backoff_base=0.0)
    assert gw.complete(spec()).texts == ("ok",)
    assert backend.calls == 3
    assert gw.counters["retries"] == 2


def test_retry_budget_exhausted():
    backend = FlakyBackend(fail_times=10)
    gw = Gateway(backend, retry_budget=2, backoff_base=0.0)
    with pytest.raises(BackendExhausted):
        gw.complete(spec())
    assert backend.calls == 3  # 1 initial + 2 retries, never more
    assert gw.counters["retries"] == 2


def test_replay_miss_without_transcript(tmp_path):
    gw = Gateway(ReplayBackend(), store_dir=tmp_path)
    with pytest.raises(ReplayMiss):
        gw.complete(spec())


def test_record_then_replay_round_trip(tmp_path):
    recorder = scripted_gateway({"question_gen": "recorded text"}, store_dir=tmp_path)
    recorded = recorder.complete(spec())
    replayer = Gateway(ReplayBackend(), store_dir=tmp_path)
    replayed = replayer.complete(spec())
    assert replayed.texts == recorded.texts
    assert replayed.cache_hit is True
    assert replayer.counters["network_requests"] == 0


def test_no_network_calls_for_scripted_and_replay(tmp_path):
    gw = scripted_gateway({"question_gen": "t"}, store_dir=tmp_path)
    gw.complete(spec())
    gw.embed("anything")
    assert gw.counters["network_requests"] == 0
    replayer = Gateway(ReplayBackend(), store_dir=tmp_path)
    replayer.complete(spec())
    assert replayer.counters["network_requests"] == 0


# --- embeddings -------------------------------------------------------------


def test_embed_deterministic_and_unit_norm():
    gw = scripted_gateway(dim=6)
    v1 = gw.embed("some text")
    v2 = gw.embed("some text")
    assert np.array_equal(v1, v2)
    assert abs(float(np.linalg.norm(v1)) - 1.0) < 1e-6


def test_embed_scripted_orthogonal_table():
    gw = scripted_gateway(embedder={"a": (1.0, 0.0), "b": (0.0, 1.0)}, dim=2)
    cos = float(np.dot(gw.embed("a"), gw.embed("b")))
    assert abs(cos) < 1e-12


def test_embed_rejects_empty_text():
    gw = scripted_gateway()
    with pytest.raises(ValueError):
        gw.embed("")


def test_embed_replay_round_trip(tmp_path):
    rec = scripted_gateway(embedder={"t": (0.0, 2.0)}, dim=2, store_dir=tmp_path)
    v = rec.embed("t")
    replayer = Gateway(ReplayBackend(), store_dir=tmp_path)
    assert np.allclose(replayer.embed("t"), v)


# --- captions --------------------------------------------------------------


def test_caption_scripted_verbatim():
    gw = scripted_gateway({"caption": "a fixed caption"})
    assert gw.caption_image("img/x.png", "what shape?") == "a fixed caption"


def test_caption_cache_keyed_by_uri_and_question():
    gw = scripted_gateway({"caption": lambda s: f"cap for {s.slots['question']}"})
    first = gw.caption_image("img/x.png", "what shape?")
    second = gw.caption_image("img/x.png", "what color?")
    assert first != second
    assert gw.counters["complete.backend"] == 2
    # same (uri, question) again is served from cache
    gw.caption_image("img/x.png", "what shape?")
    assert gw.counters["complete.backend"] == 2
    assert gw.counters["caption_requests"] == 3


def test_caption_conditioned_on_question_content():
    def script(s):
        return "the towers are square" if "shape" in s.slots["question"] else "a watchtower"

    gw = scripted_gateway({"caption": script})
    assert "square" in gw.caption_image("img/tower.png", "what geometric shape is used?")
