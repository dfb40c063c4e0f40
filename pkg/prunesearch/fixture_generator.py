#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Synthetic Topic Corpus Generator
合成主題語料產生器

Builds a corpus with recoverable topic structure: per topic one signature
keyword (the only keyword of a few short documents, so it becomes that
topic's centroid), a pool of taxonomy words and out-of-taxonomy words, and
per-document pseudo-word filler that never ranks as a keyword.
"""

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Set, Tuple

from .corpus_core import Document
from .semantics_core import Taxonomy
from .text_processing import STOP_WORDS, stem

logger = logging.getLogger(__name__)

CONSONANTS = "bcdfghjklmnprstvwz"
VOWELS = "aeiou"
HEX_LETTERS = set("abcdef")
TOPICS_PER_DOMAIN = 5
WORDS_PER_SUBFAMILY = 4
SUBFAMILIES_PER_FAMILY = 2
FIELDS_PER_DOMAIN = 2
FILLER = ("the", "of", "and", "to", "in", "a", "with", "for", "on", "is")


@dataclass
class FixtureSpec:
    """語料參數"""
    seed: int = 42
    topics: int = 10
    docs_per_topic: int = 20
    short_docs: int = 7
    signature_long_docs: int = 6
    taxonomy_words: int = 16
    oov_words: int = 16
    keywords_per_doc: int = 15
    noise_words: int = 320
    min_keyword_len: int = 8


@dataclass
class TopicPlan:
    topic: int
    signature: str
    taxonomy_words: List[str]
    oov_words: List[str]

    @property
    def pool(self) -> List[str]:
        return self.taxonomy_words + self.oov_words


@dataclass
class GeneratedFixture:
    spec: FixtureSpec
    documents: List[Document]
    taxonomy_edges: List[Tuple[str, str]]
    topics: List[TopicPlan]
    doc_topics: Dict[str, int] = field(default_factory=dict)

    def taxonomy(self) -> Taxonomy:
        return Taxonomy.from_edges(self.taxonomy_edges)

    def keywords(self) -> Set[str]:
        words: Set[str] = set()
        for plan in self.topics:
            words.add(plan.signature)
            words.update(plan.pool)
        return words

    def write(self, out_dir: Path) -> Dict[str, Path]:
        out = Path(out_dir)
        corpus_dir = out / "corpus"
        corpus_dir.mkdir(parents=True, exist_ok=True)
        for doc in self.documents:
            (corpus_dir / f"{doc.doc_id}.txt").write_text(doc.text, encoding="utf-8")
        taxonomy_path = out / "taxonomy.tsv"
        taxonomy_path.write_text("".join(f"{c}\t{p}\n" for c, p in self.taxonomy_edges), encoding="utf-8")
        manifest_path = out / "manifest.json"
        manifest_path.write_text(json.dumps({
            "seed": self.spec.seed,
            "topics": [
                {
                    "topic": t.topic,
                    "signature": t.signature,
                    "taxonomy_words": t.taxonomy_words,
                    "oov_words": t.oov_words,
                }
                for t in self.topics
            ],
            "doc_topics": self.doc_topics,
        }, indent=2), encoding="utf-8")
        logger.info(f"Wrote {len(self.documents)} documents and a {len(self.taxonomy_edges)}-edge taxonomy to {out}")
        return {"corpus": corpus_dir, "taxonomy": taxonomy_path, "manifest": manifest_path}


class _WordFactory:
    """Stem-stable pseudo-words, unique across the whole fixture."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.used: Set[str] = set()

    def make(self, min_len: int) -> str:
        while True:
            syllables = self.rng.randint(max(3, min_len // 2), max(4, min_len // 2 + 2))
            word = "".join(self.rng.choice(CONSONANTS) + self.rng.choice(VOWELS) for _ in range(syllables))
            word += self.rng.choice(CONSONANTS)
            if len(word) < min_len or word in self.used or word in STOP_WORDS:
                continue
            if not (set(word) - HEX_LETTERS) or stem(word) != word:
                continue
            self.used.add(word)
            return word


def _render(words: List[str], rng: random.Random) -> str:
    rng.shuffle(words)
    lines = []
    for start in range(0, len(words), 12):
        chunk = words[start:start + 12]
        spaced = []
        for word in chunk:
            spaced.append(word)
            if rng.random() < 0.3:
                spaced.append(rng.choice(FILLER))
        lines.append(" ".join(spaced).capitalize() + ".")
    return "\n".join(lines) + "\n"


def generate_fixture(spec: FixtureSpec = FixtureSpec()) -> GeneratedFixture:
    rng = random.Random(spec.seed)
    words = _WordFactory(rng)
    per_sig_doc = spec.keywords_per_doc - 1
    if spec.taxonomy_words % (WORDS_PER_SUBFAMILY * SUBFAMILIES_PER_FAMILY):
        raise ValueError("taxonomy_words must be a multiple of 8")
    if spec.signature_long_docs * per_sig_doc < spec.taxonomy_words + spec.oov_words:
        raise ValueError("signature documents cannot cover the topic pool")

    edges: List[Tuple[str, str]] = []
    domains = (spec.topics + TOPICS_PER_DOMAIN - 1) // TOPICS_PER_DOMAIN
    for d in range(domains):
        edges.append((f"dom{d}", "-"))
        for f in range(FIELDS_PER_DOMAIN):
            edges.append((f"fld{d}x{f}", f"dom{d}"))

    topics: List[TopicPlan] = []
    families = spec.taxonomy_words // (WORDS_PER_SUBFAMILY * SUBFAMILIES_PER_FAMILY)
    for t in range(spec.topics):
        domain, local = divmod(t, TOPICS_PER_DOMAIN)
        taxonomy_words = []
        for j in range(families):
            family = f"fam{t}x{j}"
            edges.append((family, f"fld{domain}x{(local + j) % FIELDS_PER_DOMAIN}"))
            for s in range(SUBFAMILIES_PER_FAMILY):
                sub = f"sub{t}x{j}x{s}"
                edges.append((sub, family))
                for _ in range(WORDS_PER_SUBFAMILY):
                    word = words.make(spec.min_keyword_len)
                    edges.append((word, sub))
                    taxonomy_words.append(word)
        oov = [words.make(spec.min_keyword_len) for _ in range(spec.oov_words)]
        topics.append(TopicPlan(t, words.make(spec.min_keyword_len), taxonomy_words, oov))

    documents: List[Document] = []
    doc_topics: Dict[str, int] = {}
    long_docs = spec.docs_per_topic - spec.short_docs
    for plan in topics:
        pool = list(plan.pool)
        rng.shuffle(pool)
        for n in range(spec.docs_per_topic):
            doc_id = f"d{len(documents):04d}"
            if n < spec.short_docs:
                sig = plan.signature
                text = f"{sig} and {sig}, {sig} of the {sig}; {sig}.\n"
            else:
                j = n - spec.short_docs
                tokens: List[str] = []
                if j < spec.signature_long_docs:
                    chosen = [pool[(j * per_sig_doc + i) % len(pool)] for i in range(per_sig_doc)]
                    tokens.extend([plan.signature] * 5)
                else:
                    chosen = rng.sample(pool, spec.keywords_per_doc)
                for word in chosen:
                    tokens.extend([word] * rng.randint(2, 4))
                tokens.extend(words.make(7) for _ in range(spec.noise_words))
                text = _render(tokens, rng)
            documents.append(Document(doc_id=doc_id, text=text))
            doc_topics[doc_id] = plan.topic
        if long_docs < spec.signature_long_docs:
            raise ValueError("not enough long documents per topic")

    logger.info(f"Generated {len(documents)} documents over {spec.topics} topics (seed={spec.seed})")
    return GeneratedFixture(spec, documents, edges, topics, doc_topics)


def materialize_fixture(out_dir: Path, seed: int = 42) -> Dict[str, Path]:
    return generate_fixture(FixtureSpec(seed=seed)).write(out_dir)
