#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Text Normalization, Stop-word Removal and Stemming
文字標準化、停用詞移除與詞幹化
"""

import re
import unicodedata
from functools import lru_cache
from typing import List

from nltk.stem.porter import PorterStemmer

# Bundled list so extraction never depends on a corpus download.
STOP_WORDS = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by can could did do does doing down during
each few for from further had has have having he her here hers herself him
himself his how i if in into is it its itself just me more most my myself no
nor not now of off on once only or other our ours ourselves out over own same
she should so some such than that the their theirs them themselves then there
these they this those through to too under until up very was we were what when
where which while who whom why will with would you your yours yourself
yourselves also however may might must shall upon via yet
""".split())

_PUNCT_RE = re.compile(r"[^\w\s]|_", re.UNICODE)
_WS_RE = re.compile(r"\s+")
_stemmer = PorterStemmer()


def normalize_text(text: str) -> str:
    """NFC-normalize, lowercase, strip punctuation, collapse whitespace."""
    if not text:
        return ""
    text = unicodedata.normalize("NFC", text).lower()
    text = _PUNCT_RE.sub(" ", text)
    return _WS_RE.sub(" ", text).strip()


@lru_cache(maxsize=200_000)
def stem(word: str) -> str:
    return _stemmer.stem(word)


def analyze(text: str) -> List[str]:
    """Normalized, stop-word-free, stemmed terms in text order."""
    terms = []
    for word in normalize_text(text).split(" "):
        if not word or word in STOP_WORDS or word.isdigit():
            continue
        term = stem(word)
        if term and term not in STOP_WORDS:
            terms.append(term)
    return terms
