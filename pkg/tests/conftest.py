from __future__ import annotations

import os

import pytest

from minprompt.corpus import Sentence
from minprompt.entities import EntityMention, normalize_key

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


def make_sentence(sid: int, text: str, doc_id: str = "doc", origin: str = "corpus") -> Sentence:
    return Sentence(
        sentence_id=sid,
        doc_id=doc_id,
        char_span=(0, len(text.encode("utf-8"))),
        text=text,
        origin=origin,
    )


def mention_at(text: str, surface: str, entity_type: str, occurrence: int = 0) -> EntityMention:
    """Mention for the nth occurrence of `surface` in ASCII-safe test text."""
    data = text.encode("utf-8")
    needle = surface.encode("utf-8")
    pos = -1
    for _ in range(occurrence + 1):
        pos = data.find(needle, pos + 1)
        assert pos != -1, f"{surface!r} not found in {text!r}"
    return EntityMention(
        surface=surface,
        entity_type=entity_type,
        char_span=(pos, pos + len(needle)),
        normalized_key=normalize_key(surface),
    )


@pytest.fixture
def lakers_sentences():
    """Four sentences wired like the shared-entity illustration: the first
    three share 'Lakers', the last shares 'Crypto.com Arena' with the third."""
    texts = [
        "The Lakers were founded in 1947.",
        "The Lakers have won many titles.",
        "The Lakers play home games at Crypto.com Arena.",
        "Crypto.com Arena also hosts concerts.",
    ]
    sentences = [make_sentence(i, t, doc_id=f"d{i}") for i, t in enumerate(texts)]
    mentions = {
        0: [mention_at(texts[0], "Lakers", "ORG")],
        1: [mention_at(texts[1], "Lakers", "ORG")],
        2: [
            mention_at(texts[2], "Lakers", "ORG"),
            mention_at(texts[2], "Crypto.com Arena", "FAC"),
        ],
        3: [mention_at(texts[3], "Crypto.com Arena", "FAC")],
    }
    return sentences, mentions
