"""Ingest raw posts into a clean, deduplicated document collection.

Cleaning removes URLs, @-mentions, and retweet-marker prefixes, collapses
whitespace, and keeps everything else (emojis included). Deduplication keys
on the cleaned text, byte-equal after NFC normalization.
"""
from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional

# Maximal runs of letters, digits, and apostrophes. [^\W_] is "word char
# minus underscore", i.e. Unicode letters and digits.
TOKEN_RE = re.compile(r"(?:[^\W_]|')+")

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+:?")
_RT_PREFIX_RE = re.compile(r"^RT\s+", re.IGNORECASE)
_RT_RAW_RE = re.compile(r"^\s*RT\s", re.IGNORECASE)


@dataclass(frozen=True)
class Document:
    """One post with stable identity and cleaned text."""

    doc_id: str
    text: str
    user_id: Optional[str] = None
    gold_label: Optional[int] = None
    created_at: Optional[str] = None


class DocumentCollection:
    """Ordered, immutable set of documents with unique ids and unique texts."""

    def __init__(self, documents: Iterable[Document], source_note: str = ""):
        self.documents: list[Document] = list(documents)
        self.source_note = source_note
        self._by_id: dict[str, Document] = {}
        seen_text: set[str] = set()
        for doc in self.documents:
            if doc.doc_id in self._by_id:
                raise ValueError(f"duplicate doc_id {doc.doc_id!r}")
            if doc.text in seen_text:
                raise ValueError(f"duplicate cleaned text for {doc.doc_id!r}")
            self._by_id[doc.doc_id] = doc
            seen_text.add(doc.text)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __getitem__(self, doc_id: str) -> Document:
        return self._by_id[doc_id]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self.documents]


@dataclass
class HateLexicon:
    """User-supplied list of known hate terms, used for analysis only."""

    terms: set[str]
    source_note: str = ""

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("lexicon must be non-empty")
        for term in self.terms:
            if term != term.lower():
                raise ValueError(f"lexicon term not lowercase: {term!r}")


def tokenize_basic(text: str) -> list[str]:
    """Lowercased tokens: maximal letter/digit/apostrophe runs."""
    return [m.group().lower() for m in TOKEN_RE.finditer(text)]


def token_spans(text: str) -> list[tuple[int, int]]:
    """Character offsets (start inclusive, end exclusive) of each token."""
    return [(m.start(), m.end()) for m in TOKEN_RE.finditer(text)]


def clean_text(raw: str) -> str:
    """Normalize a raw post: NFC, drop URLs and @-mentions, collapse
    whitespace, strip any leading retweet markers. Emojis are kept.

    Idempotent: applying it to its own output changes nothing. The
    retweet-marker strip runs last and loops, so markers exposed by the
    mention removal ("@bob RT hi") are still caught.
    """
    s = unicodedata.normalize("NFC", raw)
    s = _URL_RE.sub(" ", s)
    s = _MENTION_RE.sub(" ", s)
    s = " ".join(s.split())
    while True:
        m = _RT_PREFIX_RE.match(s)
        if m is None:
            return s
        s = s[m.end():]


def is_retweet(raw: str) -> bool:
    """True when the raw (uncleaned) post starts with a retweet marker."""
    return _RT_RAW_RE.match(raw) is not None


@dataclass
class IngestConfig:
    # Predicate on cleaned text; None accepts every document. Shipping
    # language-ID models is out of scope, so this stays pluggable.
    language_predicate: Optional[Callable[[str], bool]] = None
    drop_retweets: bool = True


@dataclass
class IngestReport:
    collection: DocumentCollection
    counts: dict[str, int] = field(default_factory=dict)


_ID_KEYS = ("id", "doc_id")
_USER_KEYS = ("user", "user_id")
_LABEL_KEYS = ("label", "gold_label")


def _first_key(record: dict, keys: tuple[str, ...]):
    for k in keys:
        if k in record and record[k] is not None:
            return record[k]
    return None


def ingest(records: Iterable, config: Optional[IngestConfig] = None,
           source_note: str = "") -> IngestReport:
    """Build a collection from raw records (dicts or JSON lines).

    Malformed records are counted and skipped, never abort the stream.
    Count keys: kept, empty, duplicate, filtered, malformed.
    """
    cfg = config or IngestConfig()
    counts = {"kept": 0, "empty": 0, "duplicate": 0, "filtered": 0, "malformed": 0}
    docs: list[Document] = []
    seen_text: set[str] = set()
    seen_ids: set[str] = set()

    for rec in records:
        if isinstance(rec, (bytes, str)):
            line = rec.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except (json.JSONDecodeError, UnicodeDecodeError):
                counts["malformed"] += 1
                continue
        if not isinstance(rec, dict):
            counts["malformed"] += 1
            continue
        raw_id = _first_key(rec, _ID_KEYS)
        raw_text = rec.get("text")
        if raw_id is None or not isinstance(raw_text, str):
            counts["malformed"] += 1
            continue
        label = _first_key(rec, _LABEL_KEYS)
        if label is not None:
            if label not in (0, 1, True, False):
                counts["malformed"] += 1
                continue
            label = int(label)
        if cfg.drop_retweets and is_retweet(raw_text):
            counts["filtered"] += 1
            continue
        text = clean_text(raw_text)
        if not text:
            counts["empty"] += 1
            continue
        if cfg.language_predicate is not None and not cfg.language_predicate(text):
            counts["filtered"] += 1
            continue
        doc_id = str(raw_id)
        if text in seen_text or doc_id in seen_ids:
            counts["duplicate"] += 1
            continue
        user = _first_key(rec, _USER_KEYS)
        docs.append(Document(
            doc_id=doc_id,
            text=text,
            user_id=str(user) if user is not None else None,
            gold_label=label,
            created_at=rec.get("created_at"),
        ))
        seen_text.add(text)
        seen_ids.add(doc_id)
        counts["kept"] += 1

    return IngestReport(DocumentCollection(docs, source_note=source_note), counts)


def contains_hate_word(doc: Document, lexicon: HateLexicon) -> bool:
    """Whole-token match for single terms; contiguous token subsequence for
    multiword terms. Case-insensitive via the shared tokenizer."""
    doc_tokens = tokenize_basic(doc.text)
    token_set = set(doc_tokens)
    for term in lexicon.terms:
        term_tokens = tokenize_basic(term)
        if not term_tokens:
            continue
        if len(term_tokens) == 1:
            if term_tokens[0] in token_set:
                return True
            continue
        k = len(term_tokens)
        for i in range(len(doc_tokens) - k + 1):
            if doc_tokens[i:i + k] == term_tokens:
                return True
    return False


def write_collection(collection: DocumentCollection, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in collection:
            row = {"doc_id": doc.doc_id, "text": doc.text}
            if doc.user_id is not None:
                row["user_id"] = doc.user_id
            if doc.gold_label is not None:
                row["gold_label"] = doc.gold_label
            if doc.created_at is not None:
                row["created_at"] = doc.created_at
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_collection(path, source_note: str = "") -> DocumentCollection:
    """Read a collection file back. Accepts both the raw-input key names
    (id/user/label) and the output names (doc_id/user_id/gold_label), so an
    ingested file can itself be re-ingested or read directly."""
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            label = _first_key(rec, _LABEL_KEYS)
            user = _first_key(rec, _USER_KEYS)
            docs.append(Document(
                doc_id=str(_first_key(rec, _ID_KEYS)),
                text=rec["text"],
                user_id=str(user) if user is not None else None,
                gold_label=int(label) if label is not None else None,
                created_at=rec.get("created_at"),
            ))
    return DocumentCollection(docs, source_note=source_note)


def load_lexicon(path, source_note: str = "") -> HateLexicon:
    """Plain-text lexicon: one term per line, '#' starts a comment."""
    terms: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                terms.add(line.lower())
    return HateLexicon(terms=terms, source_note=source_note)
