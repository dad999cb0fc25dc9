"""Desk-scale demo corpus and the scripted backend that drives it.

The committed 12-document pool pairs up through hyperlinks (flag photo /
battle, tower / engineer, wall / emperor, mission / astronaut) and through
shared topics (two albums, two bridges). The scripted backend below answers
every pipeline call for those six groups as a pure function of the prompt
spec, so recording it once yields transcripts that replay byte-identically.

Four groups run the full happy path; the tower group is rejected by the
single-modality gate and the bridge group by a 4/5 vote split, so a demo
run also exercises the rejection ledger.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .corpus import Document, parse_document
from .gateway import PromptSpec, ScriptedBackend
from .pipeline import PipelineConfig
from .prompts import TASK_ENTITIES, TASK_PROJECTION, TASK_RELATIONS, TASK_SINGLE_DOC
from .question import Exemplar

__all__ = [
    "DEMO_DIM",
    "build_demo_backend",
    "demo_config",
    "demo_embedder",
    "demo_exemplars",
    "load_pool",
]

DEMO_DIM = 16

# keyword -> embedding axis; first match wins
_TOPIC_AXES = [
    (("iwo jima",), 0),
    (("album",), 1),
    (("eiffel",), 2),
    (("great wall", "qin"), 3),
    (("bridge",), 4),
    (("apollo", "armstrong"), 5),
]


def demo_embedder(text: str) -> np.ndarray:
    """Route texts onto orthogonal topic axes by keyword."""
    lowered = text.lower()
    vec = np.zeros(DEMO_DIM)
    for keywords, axis in _TOPIC_AXES:
        if any(kw in lowered for kw in keywords):
            vec[axis] = 1.0
            return vec
    vec[6 + (sum(map(ord, lowered)) % (DEMO_DIM - 6))] = 1.0
    return vec


def load_pool(pool_dir: str | Path) -> list[Document]:
    """Parse the fixture pool listed in its manifest."""
    pool_dir = Path(pool_dir)
    manifest = json.loads((pool_dir / "manifest.json").read_text(encoding="utf-8"))
    docs = []
    for entry in manifest["documents"]:
        raw = (pool_dir / entry["file"]).read_text(encoding="utf-8")
        docs.append(parse_document(raw, entry["id"]))
    return docs


def demo_exemplars() -> list[Exemplar]:
    return [
        Exemplar(
            id="ex-volcano",
            documents=(
                "# Mount Mazama\nMount Mazama erupted about 7,700 years ago, collapsing into a caldera.",
                "# Crater Lake\nCrater Lake fills the caldera left by Mount Mazama and is 592 metres deep.",
            ),
            question="How deep is the lake that fills the caldera left by the eruption of Mount Mazama?",
            answer="592 metres",
        ),
        Exemplar(
            id="ex-painting",
            documents=(
                "# The Night Watch\nThe Night Watch was painted in 1642 for a militia hall.",
                "# Rijksmuseum\nThe Rijksmuseum in Amsterdam exhibits The Night Watch in its Gallery of Honour.",
            ),
            question="In which city is the militia painting finished in 1642 exhibited today?",
            answer="Amsterdam",
        ),
    ]


def demo_config() -> PipelineConfig:
    return PipelineConfig(seed=42, shots=1, topic_k=6)


# ---------------------------------------------------------------------------
# Scenario tables, keyed on prompt content only (stateless, replay-safe)
# ---------------------------------------------------------------------------

_Q_FLAG = (
    "How many personnel from the nation whose flag appears in the famous Mount Suribachi "
    "photograph were killed in the battle where it was raised?"
)
_Q_MUSIC = (
    "Which album was released first: the one whose cover photograph shows a man bending "
    "over a piano, or the one that features the song I Don't Wanna Be a Soldier?"
)
_Q_EIFFEL = (
    "What engineering innovation allowed the Eiffel Tower to surpass every earlier "
    "structure in height?"
)
_Q_WALL = (
    "In the most important construction project commissioned by the first emperor of the "
    "Qin dynasty, what geometric shape do the watchtowers reveal when viewed from inside?"
)
_Q_BRIDGE = (
    "Which bridge opened earlier: the span crossing the Golden Gate strait or the bridge "
    "connecting Manhattan and Brooklyn?"
)
_Q_APOLLO = (
    "In which year did the astronaut who commanded the mission shown in the flag-salute "
    "photograph fly his first space mission?"
)

_QUESTIONS = [
    (frozenset({"Raising the Flag on Iwo Jima", "Battle of Iwo Jima"}), _Q_FLAG),
    (frozenset({"Music from Big Pink", "Imagine (album)"}), _Q_MUSIC),
    (frozenset({"Eiffel Tower", "Gustave Eiffel"}), _Q_EIFFEL),
    (frozenset({"Great Wall of China", "Qin Shi Huang"}), _Q_WALL),
    (frozenset({"Golden Gate Bridge", "Brooklyn Bridge"}), _Q_BRIDGE),
    (frozenset({"Apollo 11", "Neil Armstrong"}), _Q_APOLLO),
]

_DECOMPOSE = {
    _Q_FLAG: [
        "Which nation's flag appears in the Mount Suribachi photograph?",
        "How many personnel from that nation were killed in the battle?",
    ],
    _Q_MUSIC: [
        "Which album's cover photograph shows a man bending over a piano?",
        "Which album features the song I Don't Wanna Be a Soldier?",
        "Which of the two albums was released first?",
    ],
    _Q_EIFFEL: [_Q_EIFFEL],
    _Q_WALL: [
        "What was the most important construction project commissioned by the first emperor of the Qin dynasty?",
        "What geometric shape do the project's watchtowers reveal when viewed from inside?",
    ],
    _Q_BRIDGE: [
        "When did the bridge crossing the Golden Gate strait open?",
        "When did the bridge connecting Manhattan and Brooklyn open?",
        "Which of the two bridges opened earlier?",
    ],
    _Q_APOLLO: [
        "Which mission is shown in the photograph of an astronaut saluting the flag on the lunar surface?",
        "Who commanded that mission?",
        "In which year did that astronaut fly his first space mission?",
    ],
}

# sub-question -> titles of documents that can answer it alone
_SINGLE_DOC_YES = {
    _DECOMPOSE[_Q_FLAG][0]: {"Raising the Flag on Iwo Jima"},
    _DECOMPOSE[_Q_MUSIC][0]: {"Music from Big Pink"},
    _DECOMPOSE[_Q_MUSIC][1]: {"Imagine (album)"},
    _DECOMPOSE[_Q_WALL][0]: {"Qin Shi Huang"},
    _DECOMPOSE[_Q_BRIDGE][0]: {"Golden Gate Bridge"},
    _DECOMPOSE[_Q_BRIDGE][1]: {"Brooklyn Bridge"},
    _DECOMPOSE[_Q_APOLLO][0]: {"Apollo 11"},
}

# question -> context phrases marking a projection that suffices alone
_PROJECTION_YES = {
    _Q_EIFFEL: ("wrought-iron lattice",),
}

_MODALITY_PROBE = {
    _Q_FLAG: "image, table",
    _Q_MUSIC: "text, image",
    _Q_WALL: "text, image",
    _Q_BRIDGE: "text, table",
    _Q_APOLLO: "image, table",
}

_CAPTIONS = {
    "images/flag_raising.jpg": "Six United States Marines raising the United States flag on Mount Suribachi during the Iwo Jima battle.",
    "images/iwo_map.png": "Map of the landing beaches on Iwo Jima.",
    "images/big_pink_cover.jpg": "An album cover painting of a man bending over a piano.",
    "images/imagine_cover.jpg": "An album cover portrait softened by clouds.",
    "images/eiffel.jpg": "The Eiffel Tower rising over the Champ de Mars.",
    "images/gustave.jpg": "Portrait of the engineer Gustave Eiffel.",
    "images/watchtower.jpg": "Seen from inside, a Great Wall watchtower reveals a circular plan.",
    "images/terracotta.jpg": "Terracotta warriors at the tomb of Qin Shi Huang.",
    "images/golden_gate.jpg": "Art-deco towers of the Golden Gate Bridge above the strait.",
    "images/brooklyn.jpg": "Stone towers of the Brooklyn Bridge over the East River.",
    "images/lunar_flag.jpg": "An Apollo 11 astronaut saluting the United States flag on the lunar surface.",
    "images/armstrong.jpg": "Official portrait of astronaut Neil Armstrong.",
}

_ANSWER_FLAG = (
    "Long: The photograph shows the flag of the United States, and the Battle of Iwo Jima "
    "casualty table records 539 United States personnel killed.\nShort: 539"
)
_ANSWER_MUSIC = (
    "Long: Music from Big Pink, whose album cover shows a man bending over a piano, was "
    "released on July 1, 1968, three years before the album that features I Don't Wanna Be "
    "a Soldier appeared in September 1971.\nShort: Music from Big Pink"
)
_ANSWER_WALL = (
    "Long: The most important project of Qin Shi Huang was the Great Wall, and seen from "
    "inside its watchtowers reveal a circular plan.\nShort: Circular"
)
_ANSWER_BRIDGE_MAIN = (
    "Long: The bridge connecting Manhattan and Brooklyn opened in 1883, half a century "
    "before the Golden Gate strait bridge opened in 1937.\nShort: Brooklyn Bridge"
)
_ANSWER_BRIDGE_SPLIT = (
    "Long: The Golden Gate strait bridge opened first according to my reading of the "
    "tables.\nShort: Golden Gate Bridge"
)
_ANSWER_APOLLO = (
    "Long: The flag-salute photograph shows Apollo 11, commanded by Neil Armstrong, whose "
    "first spaceflight Gemini 8 flew in 1966.\nShort: 1966"
)

# question -> (single generation, five voting generations)
_ANSWERS = {
    _Q_FLAG: (_ANSWER_FLAG, [_ANSWER_FLAG] * 5),
    _Q_MUSIC: (_ANSWER_MUSIC, [_ANSWER_MUSIC] * 5),
    _Q_WALL: (_ANSWER_WALL, [_ANSWER_WALL] * 5),
    _Q_BRIDGE: (
        _ANSWER_BRIDGE_MAIN,
        [_ANSWER_BRIDGE_MAIN] * 2 + [_ANSWER_BRIDGE_SPLIT] + [_ANSWER_BRIDGE_MAIN] * 2,
    ),
    _Q_APOLLO: (_ANSWER_APOLLO, [_ANSWER_APOLLO] * 5),
}

# short answer text -> entity extractor lines
_ENTITY_LINES = {
    "Music from Big Pink": "Music from Big Pink | work",
    "Brooklyn Bridge": "Brooklyn Bridge | location",
}

# long-answer keyword -> relation extractor line
_RELATION_LINES = [
    ("539 United States personnel", "(United States, personnel killed, 539)"),
    ("bending over a piano", "(Music from Big Pink, release date, July 1 1968)"),
    ("circular plan", "(Great Wall, watchtower shape, circular)"),
    ("Gemini 8 flew in 1966", "(Neil Armstrong, first mission year, 1966)"),
]

_QUERIES = {
    _Q_FLAG: (
        "1. Raising the Flag on Iwo Jima | image | Identify the nation whose flag is raised in the Mount Suribachi photograph from Iwo Jima.\n"
        "2. Battle of Iwo Jima | table | Read the personnel killed figure for that nation in the Battle of Iwo Jima casualty table."
    ),
    _Q_MUSIC: (
        "1. Music from Big Pink | image | Find the album cover painting that shows a man bending over a piano.\n"
        "2. Imagine (album) | text | Find the album that features I Don't Wanna Be a Soldier and note the album release date.\n"
        "3. Music from Big Pink | text | Compare the two album release dates and keep the earlier album."
    ),
    _Q_WALL: (
        "1. Qin Shi Huang | text | Find the most important project commissioned by Qin Shi Huang.\n"
        "2. Great Wall of China | image | Examine the Great Wall watchtower photograph for the shape seen from inside."
    ),
    _Q_APOLLO: (
        "1. Apollo 11 | image | Identify the mission from the photograph of an astronaut saluting the flag on the lunar surface.\n"
        "2. Apollo 11 | table | Find the commander of Apollo 11 in the crew table.\n"
        "3. Neil Armstrong | table | Look up the year of Neil Armstrong's first mission in the missions table."
    ),
}


def _match_question(documents: str) -> str:
    for titles, question in _QUESTIONS:
        if all(f"# {title}" in documents for title in titles):
            return question
    raise LookupError("no scripted question for this document group")


def _on_question_gen(spec: PromptSpec) -> str:
    return _match_question(spec.slots["documents"])


def _on_decompose(spec: PromptSpec) -> str:
    return "\n".join(_DECOMPOSE[spec.slots["question"]])


def _context_title(context: str) -> str:
    first = context.splitlines()[0] if context else ""
    return first[2:] if first.startswith("# ") else first


def _on_judge(spec: PromptSpec) -> str:
    task = spec.slots["task"]
    context = spec.slots["context"]
    if task == TASK_SINGLE_DOC:
        sub = spec.slots.get("question", "")
        return "Yes" if _context_title(context) in _SINGLE_DOC_YES.get(sub, set()) else "No"
    if task == TASK_PROJECTION:
        question = spec.slots.get("question", "")
        phrases = _PROJECTION_YES.get(question, ())
        return "Yes" if any(p in context for p in phrases) else "No"
    if task == TASK_ENTITIES:
        return _ENTITY_LINES.get(context.strip(), "")
    if task == TASK_RELATIONS:
        for keyword, line in _RELATION_LINES:
            if keyword in context:
                return line
        return ""
    return "No"


def _on_answer(spec: PromptSpec) -> list[str]:
    single, votes = _ANSWERS[spec.slots["question"]]
    return votes if spec.sampling.n > 1 else [single]


def _on_caption(spec: PromptSpec) -> str:
    return _CAPTIONS[spec.slots["image_uri"]]


def _on_modality_probe(spec: PromptSpec) -> str:
    return _MODALITY_PROBE[spec.slots["question"]]


def _on_query(spec: PromptSpec) -> str:
    return _QUERIES[spec.slots["question"]]


def build_demo_backend() -> ScriptedBackend:
    return ScriptedBackend(
        script={
            "question_gen": _on_question_gen,
            "decompose": _on_decompose,
            "judge": _on_judge,
            "answer_gen": _on_answer,
            "caption": _on_caption,
            "modality_probe": _on_modality_probe,
            "query_gen": _on_query,
        },
        embedder=demo_embedder,
        dim=DEMO_DIM,
        backend_id="demo-scripted",
    )
