"""Feature extraction: sparse TF-IDF over word n-grams, and dense vectors
loaded from precomputed embedding files.

Weighting: tf is the raw in-document count, idf(i) = ln((1+N)/(1+df(i))) + 1,
and the final vector is L2-normalized. Vocabulary indices are assigned
lexicographically over the n-gram strings, so identical inputs always
produce identical vocabularies and vectors.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy import sparse

from ._porter import porter_stem
from .corpus import Document, DocumentCollection, tokenize_basic


def tokenize(text: str, stem: bool = False) -> list[str]:
    """Lowercase tokens; optionally Porter-stemmed."""
    tokens = tokenize_basic(text)
    if stem:
        return [porter_stem(t) for t in tokens]
    return tokens


def _ngrams(tokens: list[str], orders: Iterable[int]) -> list[str]:
    grams: list[str] = []
    for n in sorted(orders):
        if n == 1:
            grams.extend(tokens)
        else:
            grams.extend(" ".join(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    return grams


@dataclass
class Vocabulary:
    ngram_to_index: dict[str, int]
    document_frequency: list[int]
    n_documents: int
    ngram_orders: frozenset[int]
    stemmed: bool = True
    min_df: int = 1

    def __post_init__(self) -> None:
        if not self.ngram_orders <= {1, 2, 3}:
            raise ValueError("ngram orders must be a subset of {1, 2, 3}")
        if len(self.document_frequency) != len(self.ngram_to_index):
            raise ValueError("document_frequency length mismatch")

    def __len__(self) -> int:
        return len(self.ngram_to_index)

    def idf(self, index: int) -> float:
        return math.log((1 + self.n_documents) / (1 + self.document_frequency[index])) + 1.0

    def to_json(self) -> str:
        return json.dumps({
            "ngram_to_index": self.ngram_to_index,
            "document_frequency": self.document_frequency,
            "n_documents": self.n_documents,
            "ngram_orders": sorted(self.ngram_orders),
            "stemmed": self.stemmed,
            "min_df": self.min_df,
        }, ensure_ascii=False)

    @classmethod
    def from_json(cls, payload: str) -> "Vocabulary":
        raw = json.loads(payload)
        return cls(
            ngram_to_index=raw["ngram_to_index"],
            document_frequency=raw["document_frequency"],
            n_documents=raw["n_documents"],
            ngram_orders=frozenset(raw["ngram_orders"]),
            stemmed=raw.get("stemmed", True),
            min_df=raw.get("min_df", 1),
        )


@dataclass
class FeatureVector:
    """Sparse (index, weight) pairs or a dense fixed-length vector."""

    dimension: int
    indices: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()
    dense: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.dense is not None:
            if len(self.dense) != self.dimension:
                raise ValueError("dense length must equal dimension")
            if not np.all(np.isfinite(self.dense)):
                raise ValueError("non-finite weight")
            return
        if len(self.indices) != len(self.weights):
            raise ValueError("indices/weights length mismatch")
        prev = -1
        for i in self.indices:
            if not (prev < i < self.dimension):
                raise ValueError("sparse indices must be strictly increasing and < dimension")
            prev = i
        if any(not math.isfinite(w) for w in self.weights):
            raise ValueError("non-finite weight")

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return np.asarray(self.dense, dtype=float)
        out = np.zeros(self.dimension)
        if self.indices:
            out[list(self.indices)] = self.weights
        return out

    def l2_norm(self) -> float:
        if self.dense is not None:
            return float(np.linalg.norm(self.dense))
        return math.sqrt(sum(w * w for w in self.weights))


def fit_vocabulary(collection: DocumentCollection, orders: Iterable[int] = (1, 2, 3),
                   min_df: int = 1, stem: bool = True) -> Vocabulary:
    """Collect all n-grams of the requested orders with df >= min_df."""
    if len(collection) == 0:
        raise ValueError("empty collection")
    orders = frozenset(orders)
    if not orders or not orders <= {1, 2, 3}:
        raise ValueError("ngram orders must be a non-empty subset of {1, 2, 3}")
    df: Counter[str] = Counter()
    for doc in collection:
        tokens = tokenize(doc.text, stem=stem)
        df.update(set(_ngrams(tokens, orders)))
    kept = sorted(g for g, c in df.items() if c >= min_df)
    return Vocabulary(
        ngram_to_index={g: i for i, g in enumerate(kept)},
        document_frequency=[df[g] for g in kept],
        n_documents=len(collection),
        ngram_orders=orders,
        stemmed=stem,
        min_df=min_df,
    )


def _term_counts(doc: Document, vocab: Vocabulary) -> Counter:
    tokens = tokenize(doc.text, stem=vocab.stemmed)
    counts: Counter[int] = Counter()
    for gram in _ngrams(tokens, vocab.ngram_orders):
        idx = vocab.ngram_to_index.get(gram)
        if idx is not None:
            counts[idx] += 1
    return counts


def vectorize_tfidf(doc: Document, vocab: Vocabulary) -> FeatureVector:
    """tf * idf, L2-normalized; out-of-vocabulary n-grams are ignored."""
    counts = _term_counts(doc, vocab)
    if not counts:
        return FeatureVector(dimension=len(vocab))
    items = sorted(counts.items())
    raw = [tf * vocab.idf(i) for i, tf in items]
    norm = math.sqrt(sum(w * w for w in raw))
    return FeatureVector(
        dimension=len(vocab),
        indices=tuple(i for i, _ in items),
        weights=tuple(w / norm for w in raw),
    )


def vectorize_counts(doc: Document, vocab: Vocabulary) -> FeatureVector:
    """Raw n-gram counts (no idf, no normalization); naive Bayes input."""
    counts = _term_counts(doc, vocab)
    items = sorted(counts.items())
    return FeatureVector(
        dimension=len(vocab),
        indices=tuple(i for i, _ in items),
        weights=tuple(float(c) for _, c in items),
    )


def build_tfidf_matrix(collection: DocumentCollection, vocab: Vocabulary):
    """CSR matrix of TF-IDF rows in collection order, plus the row doc_ids."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    doc_ids = []
    for doc in collection:
        vec = vectorize_tfidf(doc, vocab)
        indices.extend(vec.indices)
        data.extend(vec.weights)
        indptr.append(len(indices))
        doc_ids.append(doc.doc_id)
    matrix = sparse.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int32), np.asarray(indptr, dtype=np.int32)),
        shape=(len(collection), len(vocab)),
    )
    return matrix, doc_ids


def load_embeddings(path, expected_dim: int) -> dict[str, FeatureVector]:
    """JSON Lines of {"doc_id", "vector"}; every vector must have the
    expected dimension and finite entries."""
    out: dict[str, FeatureVector] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            doc_id = str(row["doc_id"])
            vec = np.asarray(row["vector"], dtype=float)
            if vec.ndim != 1 or len(vec) != expected_dim:
                raise ValueError(f"dimension mismatch for doc_id {doc_id!r}: "
                                 f"got {vec.size}, expected {expected_dim}")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"non-finite value for doc_id {doc_id!r}")
            if doc_id in out:
                raise ValueError(f"duplicate embedding for doc_id {doc_id!r}")
            out[doc_id] = FeatureVector(dimension=expected_dim, dense=vec)
    return out


def build_embedding_matrix(collection: DocumentCollection,
                           embeddings: dict[str, FeatureVector]):
    """Dense matrix in collection order; every document must be covered."""
    rows = []
    doc_ids = []
    for doc in collection:
        if doc.doc_id not in embeddings:
            raise KeyError(f"no embedding for doc_id {doc.doc_id!r}")
        rows.append(embeddings[doc.doc_id].to_dense())
        doc_ids.append(doc.doc_id)
    return np.vstack(rows), doc_ids
