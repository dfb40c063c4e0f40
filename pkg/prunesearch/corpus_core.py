#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Core Corpus Logic: keyword extraction, term tokens and document encryption
語料核心邏輯 - 關鍵字擷取、詞彙權杖與文件加密
"""

import base64
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Protocol, Set, Tuple

from Cryptodome.Cipher import AES
from Cryptodome.Hash import HMAC, SHA256
from Cryptodome.Random import get_random_bytes

from .exceptions import CipherError, CorpusError, TokenizationError
from .text_processing import analyze, normalize_text

logger = logging.getLogger(__name__)

KEY_SIZE = 32
TOKEN_SIZE = 32
NONCE_SIZE = 12
TAG_SIZE = 16


@dataclass(frozen=True)
class Document:
    """上傳前的明文文件"""
    doc_id: str
    text: str
    source_path: str = ""


@dataclass(frozen=True)
class KeywordRecord:
    """擷取出的關鍵字"""
    term: str
    frequency: int
    doc_ids: FrozenSet[str]


@dataclass(frozen=True, order=True)
class TermToken:
    """Deterministic 32-byte stand-in for an encrypted term."""
    value: bytes

    def __post_init__(self):
        if len(self.value) != TOKEN_SIZE:
            raise TokenizationError(f"token must be {TOKEN_SIZE} bytes, got {len(self.value)}")

    @property
    def hex(self) -> str:
        return self.value.hex()

    @classmethod
    def from_hex(cls, text: str) -> "TermToken":
        try:
            raw = bytes.fromhex(text)
        except ValueError as e:
            raise TokenizationError(f"invalid token hex: {text!r}") from e
        return cls(raw)

    def __repr__(self) -> str:
        return f"TermToken({self.hex[:12]}…)"


@dataclass
class UploadBatch:
    """Encrypted documents plus token postings; never carries plaintext terms."""
    encrypted_docs: List[Tuple[str, bytes]] = field(default_factory=list)
    postings: Dict[TermToken, Set[str]] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not self.encrypted_docs and not self.postings

    def iter_jsonl(self) -> Iterator[str]:
        for doc_id, ciphertext in self.encrypted_docs:
            yield json.dumps({
                "type": "doc",
                "doc_id": doc_id,
                "ciphertext": base64.b64encode(ciphertext).decode("ascii"),
            }, sort_keys=True)
        for token in sorted(self.postings):
            yield json.dumps({
                "type": "posting",
                "token": token.hex,
                "doc_ids": sorted(self.postings[token]),
            }, sort_keys=True)

    def to_jsonl(self) -> str:
        return "".join(line + "\n" for line in self.iter_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "UploadBatch":
        batch = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                kind = record["type"]
                if kind == "doc":
                    batch.encrypted_docs.append(
                        (str(record["doc_id"]), base64.b64decode(record["ciphertext"], validate=True))
                    )
                elif kind == "posting":
                    token = TermToken.from_hex(record["token"])
                    batch.postings.setdefault(token, set()).update(str(d) for d in record["doc_ids"])
                else:
                    raise CorpusError(f"line {lineno}: unknown record type {kind!r}")
            except CorpusError:
                raise
            except (ValueError, KeyError, TypeError, TokenizationError) as e:
                raise CorpusError(f"line {lineno}: malformed upload record: {e}") from e
        doc_ids = {doc_id for doc_id, _ in batch.encrypted_docs}
        dangling = {d for ids in batch.postings.values() for d in ids} - doc_ids
        if dangling:
            raise CorpusError("postings reference documents missing from the batch",
                              details={"doc_ids": sorted(dangling)[:10]})
        return batch


@dataclass
class IngestResult:
    """Upload batch plus what the edge keeps on its side of the boundary."""
    batch: UploadBatch
    seed_terms: Dict[TermToken, str]
    keywords: Dict[str, List[KeywordRecord]]


class DocumentCipher(Protocol):
    """Pluggable authenticated document cipher."""

    def encrypt(self, plaintext: bytes, key: bytes) -> bytes: ...

    def decrypt(self, payload: bytes, key: bytes) -> bytes: ...


class AesGcmCipher:
    """AES-256-GCM with a random nonce per document; payload = nonce || tag || ciphertext."""

    def encrypt(self, plaintext: bytes, key: bytes) -> bytes:
        nonce = get_random_bytes(NONCE_SIZE)
        cipher = AES.new(derive_subkey(key, b"document-cipher"), AES.MODE_GCM, nonce=nonce)
        ciphertext, tag = cipher.encrypt_and_digest(plaintext)
        return nonce + tag + ciphertext

    def decrypt(self, payload: bytes, key: bytes) -> bytes:
        if len(payload) < NONCE_SIZE + TAG_SIZE:
            raise CipherError("ciphertext too short")
        nonce = payload[:NONCE_SIZE]
        tag = payload[NONCE_SIZE:NONCE_SIZE + TAG_SIZE]
        cipher = AES.new(derive_subkey(key, b"document-cipher"), AES.MODE_GCM, nonce=nonce)
        try:
            return cipher.decrypt_and_verify(payload[NONCE_SIZE + TAG_SIZE:], tag)
        except ValueError as e:
            raise CipherError("ciphertext failed authentication") from e


DEFAULT_CIPHER = AesGcmCipher()


def _check_key(key: bytes) -> None:
    if not isinstance(key, (bytes, bytearray)) or len(key) != KEY_SIZE:
        raise CipherError(f"key must be {KEY_SIZE} bytes")


def derive_subkey(key: bytes, label: bytes) -> bytes:
    _check_key(key)
    return HMAC.new(bytes(key), msg=label, digestmod=SHA256).digest()


def generate_key() -> bytes:
    return get_random_bytes(KEY_SIZE)


def load_key(path: Path) -> bytes:
    """Read a key file holding 32 raw bytes or 64 hex characters."""
    raw = Path(path).read_bytes()
    if len(raw) == KEY_SIZE:
        return raw
    text = raw.decode("ascii", errors="replace").strip()
    if len(text) == 2 * KEY_SIZE:
        try:
            return bytes.fromhex(text)
        except ValueError:
            pass
    raise CipherError(f"key file {path} must hold 32 raw bytes or 64 hex chars")


def extract_keywords(doc: Document, k: int) -> List[KeywordRecord]:
    """Top-k terms by frequency after stop-word removal and stemming."""
    if k < 1:
        raise CorpusError("k must be >= 1", doc.doc_id)
    counts = Counter(analyze(doc.text))
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))[:k]
    doc_ids = frozenset([doc.doc_id])
    return [KeywordRecord(term, freq, doc_ids) for term, freq in ranked]


def tokenize_term(term: str, key: bytes) -> TermToken:
    """Keyed PRF image of a term (HMAC-SHA256)."""
    if not term:
        raise TokenizationError("empty term")
    _check_key(key)
    mac = HMAC.new(bytes(key), digestmod=SHA256)
    mac.update(b"term\x00")
    mac.update(term.encode("utf-8"))
    return TermToken(mac.digest())


def encrypt_document(doc: Document, key: bytes, cipher: Optional[DocumentCipher] = None) -> Tuple[str, bytes]:
    _check_key(key)
    cipher = cipher or DEFAULT_CIPHER
    return doc.doc_id, cipher.encrypt(doc.text.encode("utf-8"), key)


def decrypt_document(payload: bytes, key: bytes, cipher: Optional[DocumentCipher] = None) -> str:
    _check_key(key)
    cipher = cipher or DEFAULT_CIPHER
    return cipher.decrypt(payload, key).decode("utf-8")


def ingest_documents(docs: Iterable[Document], k_per_doc: int, key: bytes,
                     cipher: Optional[DocumentCipher] = None) -> IngestResult:
    """Extract, tokenize and encrypt; also return the edge-side seed terms."""
    batch = UploadBatch()
    seed_terms: Dict[TermToken, str] = {}
    keywords: Dict[str, List[KeywordRecord]] = {}
    seen: Set[str] = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise CorpusError(f"duplicate doc_id: {doc.doc_id}", doc.doc_id)
        seen.add(doc.doc_id)
        records = extract_keywords(doc, k_per_doc)
        keywords[doc.doc_id] = records
        for record in records:
            token = tokenize_term(record.term, key)
            seed_terms[token] = record.term
            batch.postings.setdefault(token, set()).add(doc.doc_id)
        batch.encrypted_docs.append(encrypt_document(doc, key, cipher))
    logger.info(f"Prepared upload: {len(batch.encrypted_docs)} documents, {len(batch.postings)} tokens")
    return IngestResult(batch=batch, seed_terms=seed_terms, keywords=keywords)


def build_upload(docs: Iterable[Document], k_per_doc: int, key: bytes,
                 cipher: Optional[DocumentCipher] = None) -> UploadBatch:
    return ingest_documents(docs, k_per_doc, key, cipher).batch


def load_corpus_dir(path: Path) -> List[Document]:
    """Load every .txt file in a directory; the file stem is the doc_id."""
    root = Path(path)
    if not root.is_dir():
        raise CorpusError(f"corpus directory not found: {root}")
    docs = []
    for file_path in sorted(root.glob("*.txt")):
        text = file_path.read_text(encoding="utf-8")
        if not normalize_text(text):
            logger.warning(f"Skipping empty document {file_path.name}")
            continue
        docs.append(Document(doc_id=file_path.stem, text=text, source_path=str(file_path)))
    logger.info(f"Loaded {len(docs)} documents from {root}")
    return docs
