"""Ensemble pooling: every document any model scores at or above the
threshold joins the candidate set, and a seeded uniform sample of at most
budget_b unique candidates becomes the selection.

Lower thresholds only grow the candidate set, trading precision for
randomness; that monotonicity is part of the contract and tested.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .corpus import Document, DocumentCollection, HateLexicon, contains_hate_word
from .features import FeatureVector
from .models import ExternalScoresModel


@dataclass
class PoolConfig:
    threshold_t: float = 0.5
    budget_b: int = 1
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.threshold_t <= 1.0):
            raise ValueError("threshold_t must lie in [0, 1]")
        if self.budget_b < 1:
            raise ValueError("budget_b must be >= 1")


@dataclass
class PooledModel:
    """A named scorer: Document -> probability, or None when the model
    cannot score the document (missing external score)."""

    name: str
    score: Callable[[Document], Optional[float]]


def scorer_from_vector_model(name: str, model,
                             featurize: Callable[[Document], FeatureVector]) -> PooledModel:
    return PooledModel(name=name, score=lambda doc: model.predict(featurize(doc)))


def scorer_from_external(name: str, model: ExternalScoresModel) -> PooledModel:
    return PooledModel(name=name, score=lambda doc: model.get(doc.doc_id))


@dataclass
class PoolResult:
    selected: list[str]
    candidate_count: int
    per_model_hit_counts: dict[str, int]
    per_model_hits: dict[str, list[str]] = field(default_factory=dict)
    unscored_counts: dict[str, int] = field(default_factory=dict)
    note: str = ""


def build_pool(collection: DocumentCollection, models: Sequence[PooledModel],
               config: PoolConfig) -> PoolResult:
    """Candidate set S = union over models of {doc : score >= t}; the
    selection is a uniform sample of min(budget_b, |S|) unique documents,
    reproducible from rng_seed."""
    if len(collection) == 0:
        raise ValueError("empty collection")
    if not models:
        raise ValueError("model set must be non-empty")
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ValueError("model names must be unique")

    candidates: set[str] = set()
    hits: dict[str, list[str]] = {m.name: [] for m in models}
    unscored: dict[str, int] = {m.name: 0 for m in models}
    for doc in collection:
        for model in models:
            score = model.score(doc)
            if score is None:
                unscored[model.name] += 1
                continue
            if score >= config.threshold_t:
                hits[model.name].append(doc.doc_id)
                candidates.add(doc.doc_id)

    ordered = sorted(candidates)
    k = min(config.budget_b, len(ordered))
    rng = random.Random(config.rng_seed)
    selected = rng.sample(ordered, k) if k else []
    return PoolResult(
        selected=selected,
        candidate_count=len(ordered),
        per_model_hit_counts={name: len(ids) for name, ids in hits.items()},
        per_model_hits={name: sorted(ids) for name, ids in hits.items()},
        unscored_counts=unscored,
        note="empty candidate set: threshold exceeds every model score" if not ordered else "",
    )


def stratify_report(result: PoolResult, collection: DocumentCollection,
                    lexicon: HateLexicon) -> dict:
    """Diagnostics over a pooling result: how much of the selection the
    lexicon already covers, per-model hit counts, and the pairwise overlap
    of the models' above-threshold sets."""
    selected_docs = [collection[d] for d in result.selected]
    matches = sum(1 for d in selected_docs if contains_hate_word(d, lexicon))
    names = sorted(result.per_model_hits)
    hit_sets = {name: set(result.per_model_hits[name]) for name in names}
    overlap = {
        a: {b: len(hit_sets[a] & hit_sets[b]) for b in names}
        for a in names
    }
    return {
        "selected_count": len(result.selected),
        "candidate_count": result.candidate_count,
        "lexicon_fraction": matches / len(selected_docs) if selected_docs else 0.0,
        "per_model_hit_counts": dict(result.per_model_hit_counts),
        "unscored_counts": dict(result.unscored_counts),
        "overlap": overlap,
    }
