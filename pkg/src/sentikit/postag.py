"""Rule-plus-lexicon part-of-speech tagger over {NOUN, ADJ, ADV, VERB, OTHER}.

Deliberately coarse: the mining stage only needs "is this an adjective or
adverb" (polarity candidates) and "is this a noun" (aspect candidates).
Precedence: lexicon entry, then suffix rules, then NOUN for unknown
alphabetic tokens. Non-alphabetic tokens are OTHER.
"""
from __future__ import annotations

import importlib.resources

from .errors import FormatError

TAGS = ("NOUN", "ADJ", "ADV", "VERB", "OTHER")

_ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "less", "ish")


def load_tag_lexicon(path=None) -> dict[str, str]:
    """word -> tag map; defaults to the lexicon shipped with the package."""
    if path is None:
        ref = importlib.resources.files("sentikit.data").joinpath("pos_lexicon.tsv")
        text = ref.read_text(encoding="utf-8")
        src = "pos_lexicon.tsv"
    else:
        with open(path, encoding="utf-8") as f:
            text = f.read()
        src = str(path)
    table = {}
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{src}:{n}: expected word<TAB>tag")
        word, tag = parts
        if tag not in TAGS:
            raise FormatError(f"{src}:{n}: unknown tag {tag!r}")
        if word in table and table[word] != tag:
            raise FormatError(f"{src}:{n}: conflicting tags for {word!r}")
        table[word] = tag
    return table


class Tagger:
    def __init__(self, lexicon: dict[str, str] | None = None):
        self.lexicon = load_tag_lexicon() if lexicon is None else lexicon

    def tag_token(self, token: str) -> str:
        if not token.replace("'", "").isalpha():
            return "OTHER"
        hit = self.lexicon.get(token)
        if hit is not None:
            return hit
        if token.endswith("ly") and len(token) > 4:
            return "ADV"
        if any(token.endswith(s) for s in _ADJ_SUFFIXES) and len(token) > 5:
            return "ADJ"
        return "NOUN"

    def tag(self, tokens) -> list[str]:
        return [self.tag_token(t) for t in tokens]
