"""Seeded iterative selection loop with three strategies.

CAL takes the documents the current model scores most positive, SAL the
ones nearest the decision boundary (probability 0.5), SPL a uniform random
baseline. After each labeled batch the model is retrained from scratch on
everything judged so far; retraining is deterministic, so a whole run is
reproducible from its config.

Randomness is derived per iteration from (rng_seed, iteration), which makes
checkpointed runs resumable without serializing generator state.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .corpus import DocumentCollection
from .features import (
    build_embedding_matrix,
    build_tfidf_matrix,
    fit_vocabulary,
    load_embeddings,
)
from .models import BinaryClassifier, ExternalScoresModel, TrainingConfig, fit_logistic

STRATEGIES = ("CAL", "SAL", "SPL")
FEATURE_MODES = ("tfidf", "embedding")


@dataclass
class ALConfig:
    strategy: str
    budget_b: int
    seed_doc_ids: list[str]
    batch_size_u: int = 1
    rng_seed: int = 0
    feature_mode: str = "tfidf"
    training: TrainingConfig = field(default_factory=TrainingConfig)
    ngram_orders: tuple[int, ...] = (1, 2, 3)
    embedding_path: Optional[str] = None
    embedding_dim: Optional[int] = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")
        if self.batch_size_u < 1:
            raise ValueError("batch_size_u must be >= 1")
        if self.budget_b < 1:
            raise ValueError("budget_b must be >= 1")
        if len(set(self.seed_doc_ids)) != len(self.seed_doc_ids):
            raise ValueError("seed_doc_ids must be unique")
        if len(self.seed_doc_ids) > self.budget_b:
            raise ValueError("seed set cannot exceed the budget")


@dataclass
class ALState:
    judged: list[tuple[str, int, int]]  # (doc_id, label, iteration); seeds at 0
    remaining_budget: int
    model: Optional[BinaryClassifier] = None
    history: list[dict] = field(default_factory=list)
    aborted_reason: Optional[str] = None

    def judged_ids(self) -> set[str]:
        return {doc_id for doc_id, _, _ in self.judged}

    def labels(self) -> dict[str, int]:
        return {doc_id: label for doc_id, label, _ in self.judged}

    def to_json(self) -> str:
        return json.dumps({
            "judged": self.judged,
            "remaining_budget": self.remaining_budget,
            "history": self.history,
            "aborted_reason": self.aborted_reason,
        })

    @classmethod
    def from_json(cls, payload: str) -> "ALState":
        raw = json.loads(payload)
        return cls(
            judged=[(str(d), int(l), int(i)) for d, l, i in raw["judged"]],
            remaining_budget=int(raw["remaining_budget"]),
            history=raw.get("history", []),
            aborted_reason=raw.get("aborted_reason"),
        )


def entropy(p: float) -> float:
    """Binary entropy in bits, with 0 log 0 taken as 0."""
    if not (0.0 <= p <= 1.0):
        raise ValueError("probability out of [0, 1]")
    total = 0.0
    for q in (p, 1.0 - p):
        if q > 0.0:
            total -= q * math.log2(q)
    return total


def iteration_rng(rng_seed: int, iteration: int) -> random.Random:
    """Deterministic per-iteration generator; string seeding is stable
    across runs and platforms."""
    return random.Random(f"{rng_seed}:{iteration}")


def select_from_scores(scores: Mapping[str, float], judged: set[str],
                       strategy: str, batch_size_u: int,
                       rng: random.Random) -> list[str]:
    """Pick up to batch_size_u unjudged doc_ids. Ties break by ascending
    doc_id; SPL samples uniformly using the supplied generator."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    unjudged = sorted(d for d in scores if d not in judged)
    if not unjudged:
        return []
    k = min(batch_size_u, len(unjudged))
    if strategy == "SPL":
        return rng.sample(unjudged, k)
    if strategy == "CAL":
        ranked = sorted(unjudged, key=lambda d: (-scores[d], d))
    else:  # SAL
        ranked = sorted(unjudged, key=lambda d: (abs(scores[d] - 0.5), d))
    return ranked[:k]


def select_next(state: ALState, collection: DocumentCollection, strategy: str,
                batch_size_u: int, rng: random.Random,
                scores: Optional[Mapping[str, float]] = None) -> list[str]:
    """Strategy selection over the collection's unjudged documents.

    scores maps doc_id to the current model's probability; when omitted the
    state's model must be an external-scores adapter covering the pool.
    """
    if scores is None:
        if not isinstance(state.model, ExternalScoresModel):
            raise ValueError("scores are required unless the model is an "
                             "external-scores adapter")
        scores = {d.doc_id: state.model.predict(d.doc_id) for d in collection}
    else:
        scores = {d.doc_id: scores[d.doc_id] for d in collection}
    return select_from_scores(scores, state.judged_ids(), strategy, batch_size_u, rng)


def _build_features(collection: DocumentCollection, config: ALConfig):
    if config.feature_mode == "tfidf":
        vocab = fit_vocabulary(collection, orders=config.ngram_orders)
        return build_tfidf_matrix(collection, vocab)
    if config.embedding_path is None or config.embedding_dim is None:
        raise ValueError("embedding_path and embedding_dim required in embedding mode")
    emb = load_embeddings(config.embedding_path, config.embedding_dim)
    return build_embedding_matrix(collection, emb)


def run_loop(collection: DocumentCollection, oracle: Callable[[str], int],
             config: ALConfig,
             feature_matrix=None,
             on_update: Optional[Callable[[ALState], None]] = None,
             resume_from: Optional[ALState] = None) -> ALState:
    """Run the selection loop to budget exhaustion.

    The oracle maps doc_id to a binary label. Seeds are labeled first and
    the model trained on them; each iteration scores the pool, selects a
    batch, collects labels, retrains on everything judged, and decrements
    the budget. An oracle failure inside the loop aborts with the state
    preserved at the previous iteration boundary; pass that state back via
    resume_from to continue. on_update fires after every (re)training.
    """
    if feature_matrix is None:
        feature_matrix = _build_features(collection, config)
    X, doc_ids = feature_matrix
    row_of = {d: i for i, d in enumerate(doc_ids)}
    missing = [d for d in config.seed_doc_ids if d not in row_of]
    if missing:
        raise ValueError(f"seed documents not in collection: {missing[:3]}")

    def retrain(judged: list[tuple[str, int, int]]) -> BinaryClassifier:
        rows = [row_of[d] for d, _, _ in judged]
        y = np.asarray([label for _, label, _ in judged], dtype=float)
        return fit_logistic(X[rows], y, config.training)

    if resume_from is not None:
        state = ALState(
            judged=list(resume_from.judged),
            remaining_budget=config.budget_b - len(resume_from.judged),
            history=list(resume_from.history),
        )
        iteration = max(it for _, _, it in state.judged) if state.judged else 0
    else:
        if not config.seed_doc_ids:
            raise ValueError("seed_doc_ids must be non-empty")
        seed_labels = [(d, int(oracle(d)), 0) for d in config.seed_doc_ids]
        if {label for _, label, _ in seed_labels} != {0, 1}:
            raise ValueError("degenerate training set: seeds must contain both classes")
        state = ALState(judged=seed_labels,
                        remaining_budget=config.budget_b - len(seed_labels))
        iteration = 0

    state.model = retrain(state.judged)
    if on_update is not None:
        on_update(state)

    u = config.batch_size_u
    while state.remaining_budget >= u:
        iteration += 1
        probs = state.model.predict_matrix(X)
        judged_ids = state.judged_ids()
        scores = {d: float(probs[i]) for d, i in row_of.items() if d not in judged_ids}
        batch = select_from_scores(scores, judged_ids, config.strategy, u,
                                   iteration_rng(config.rng_seed, iteration))
        if not batch:
            break
        try:
            labels = [int(oracle(d)) for d in batch]
        except Exception as exc:  # noqa: BLE001 - any oracle failure must preserve state
            state.aborted_reason = f"oracle failure at iteration {iteration}: {exc}"
            return state
        state.judged.extend((d, label, iteration) for d, label in zip(batch, labels))
        state.remaining_budget -= len(batch)
        state.history.append({"iteration": iteration, "selected": list(batch)})
        state.model = retrain(state.judged)
        if on_update is not None:
            on_update(state)
    return state
