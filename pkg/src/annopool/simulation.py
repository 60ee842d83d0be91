"""Retrospective cost-effectiveness harness.

Replays the selection loop against a gold-labeled collection, answering the
oracle from the gold labels, and records how quickly each strategy finds the
positive class and how good the hybrid labeling is at fixed human cost.
Curves are sampled at configurable cost fractions plus an implicit starting
point right after seed training; AUC integrates the recorded points only,
with no extrapolation toward zero cost.
"""
from __future__ import annotations

import csv
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

from .active_learning import ALConfig, ALState, run_loop
from .corpus import Document, DocumentCollection
from .features import build_tfidf_matrix, fit_vocabulary
from .metrics import hybrid_f1, trapezoid_auc

DEFAULT_CHECKPOINTS = tuple(round(0.1 * k, 1) for k in range(1, 11))


@dataclass(frozen=True)
class SyntheticSpec:
    """Frozen generator settings for the desk-scale synthetic corpus.

    Positive documents draw each token from the signal vocabulary with
    probability signal_strength; ordinary negatives do so at
    signal_strength * negative_overlap. A small hard-negative tier draws at
    signal_strength * hard_negative_overlap, planting genuinely ambiguous
    documents near the decision boundary. All rates scale with
    signal_strength, so strength 0 collapses every class to identical noise.
    """
    n_signal_tokens: int = 12
    n_noise_tokens: int = 80
    doc_length: int = 12
    signal_strength: float = 0.6
    negative_overlap: float = 0.15
    hard_negative_fraction: float = 0.12
    hard_negative_overlap: float = 0.5

    def __post_init__(self) -> None:
        if self.n_signal_tokens < 1 or self.n_noise_tokens < 1:
            raise ValueError("degenerate vocabulary size")
        if self.doc_length < 1:
            raise ValueError("degenerate document length")
        for name in ("signal_strength", "negative_overlap",
                     "hard_negative_fraction", "hard_negative_overlap"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


def make_synthetic_corpus(n_docs: int, positive_rate: float,
                          vocab_spec: Optional[SyntheticSpec] = None,
                          rng_seed: int = 0) -> DocumentCollection:
    """Deterministic labeled corpus with class-indicative token mixtures."""
    spec = vocab_spec if vocab_spec is not None else SyntheticSpec()
    if n_docs < 2:
        raise ValueError("degenerate corpus size")
    if not 0.0 < positive_rate < 1.0:
        raise ValueError("positive_rate must be in (0, 1)")
    n_pos = round(n_docs * positive_rate)
    if n_pos < 1 or n_pos >= n_docs:
        raise ValueError("degenerate class split")
    rng = random.Random(rng_seed)
    positive_ids = set(rng.sample(range(n_docs), n_pos))
    negative_ids = sorted(set(range(n_docs)) - positive_ids)
    n_hard = round(spec.hard_negative_fraction * len(negative_ids))
    hard_ids = set(rng.sample(negative_ids, n_hard))
    signal = [f"sig{i:02d}" for i in range(spec.n_signal_tokens)]
    noise = [f"w{i:03d}" for i in range(spec.n_noise_tokens)]
    seen_texts: set[str] = set()
    docs: list[Document] = []
    for i in range(n_docs):
        label = 1 if i in positive_ids else 0
        if label:
            overlap = 1.0
        elif i in hard_ids:
            overlap = spec.hard_negative_overlap
        else:
            overlap = spec.negative_overlap
        p_signal = spec.signal_strength * overlap
        for _ in range(10000):  # redraw on text collision, deterministically
            tokens = [rng.choice(signal) if rng.random() < p_signal else rng.choice(noise)
                      for _ in range(spec.doc_length)]
            text = " ".join(tokens)
            if text not in seen_texts:
                break
        else:
            raise RuntimeError("could not generate a unique document text")
        seen_texts.add(text)
        docs.append(Document(doc_id=f"s{i:05d}", text=text, gold_label=label))
    return DocumentCollection(docs)


def pick_seed_docs(collection: DocumentCollection, n_positive: int,
                   n_negative: int, rng_seed: int) -> list[str]:
    """Draw a balanced seed set from the gold labels, positives first."""
    positives = sorted(d.doc_id for d in collection if d.gold_label == 1)
    negatives = sorted(d.doc_id for d in collection if d.gold_label == 0)
    if len(positives) < n_positive or len(negatives) < n_negative:
        raise ValueError("not enough labeled documents for the seed set")
    rng = random.Random(f"seeds:{rng_seed}")
    return rng.sample(positives, n_positive) + rng.sample(negatives, n_negative)


@dataclass(frozen=True)
class CurvePoint:
    strategy: str
    feature_mode: str
    seed: int
    cost_fraction: float
    f1_hybrid: float
    hate_found_fraction: float

    def __post_init__(self) -> None:
        for name in ("cost_fraction", "f1_hybrid", "hate_found_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} out of [0, 1]: {value}")


@dataclass
class SimulationSpec:
    dataset: DocumentCollection
    strategies: Sequence[str] = ("CAL", "SAL", "SPL")
    feature_modes: Sequence[str] = ("tfidf",)
    checkpoints: Sequence[float] = DEFAULT_CHECKPOINTS
    repetitions: int = 1
    al_template: ALConfig = field(default_factory=lambda: ALConfig(
        strategy="CAL", budget_b=1, seed_doc_ids=[], batch_size_u=10))
    seed_positives: int = 5
    seed_negatives: int = 5
    oracle_noise: float = 0.0  # label-flip probability; off by default

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.checkpoints:
            raise ValueError("checkpoints must be non-empty")
        pairs = zip(self.checkpoints, list(self.checkpoints)[1:])
        if any(a >= b for a, b in pairs):
            raise ValueError("checkpoints must be strictly increasing")
        if not all(0.0 < c <= 1.0 for c in self.checkpoints):
            raise ValueError("checkpoints must lie in (0, 1]")
        if not 0.0 <= self.oracle_noise < 1.0:
            raise ValueError("oracle_noise must be in [0, 1)")
        unknown = set(self.strategies) - {"CAL", "SAL", "SPL"}
        if unknown or not self.strategies:
            raise ValueError(f"bad strategy set: {sorted(unknown)}")


@dataclass
class SimulationResult:
    curves: list[CurvePoint]
    auc_per_run: list[dict]   # strategy, feature_mode, seed, metric, auc
    auc_mean: list[dict]      # strategy, feature_mode, metric, auc


def curve_auc(points: Sequence[CurvePoint], metric: str) -> float:
    return trapezoid_auc([(p.cost_fraction, getattr(p, metric)) for p in points])


def _run_one(dataset: DocumentCollection, gold: dict[str, int], total_pos: int,
             feature_matrix, config: ALConfig, checkpoints: Sequence[float],
             oracle: Callable[[str], int]) -> list[CurvePoint]:
    n = len(dataset)
    _, doc_ids = feature_matrix
    targets = [max(1, round(c * n)) for c in checkpoints]
    points: list[CurvePoint] = []

    def emit(state: ALState) -> None:
        judged = state.labels()
        probs = state.model.predict_matrix(feature_matrix[0])
        score_of = dict(zip(doc_ids, (float(p) for p in probs)))
        points.append(CurvePoint(
            strategy=config.strategy,
            feature_mode=config.feature_mode,
            seed=config.rng_seed,
            cost_fraction=len(judged) / n,
            f1_hybrid=hybrid_f1(judged, score_of.__getitem__, gold),
            hate_found_fraction=sum(gold[d] for d in judged) / total_pos,
        ))

    def on_update(state: ALState) -> None:
        count = len(state.judged)
        if not points:  # implicit starting point at the seed-set cost
            emit(state)
            while targets and targets[0] <= count:
                targets.pop(0)
            return
        if targets and count >= targets[0]:
            while targets and targets[0] <= count:
                targets.pop(0)
            emit(state)

    state = run_loop(dataset, oracle, config, feature_matrix=feature_matrix,
                     on_update=on_update)
    if state.aborted_reason:
        raise RuntimeError(f"simulated run aborted: {state.aborted_reason}")
    return points


def simulate(spec: SimulationSpec, max_workers: int = 1) -> SimulationResult:
    """Run every (strategy, feature_mode, seed) combination and tabulate AUC."""
    dataset = spec.dataset
    unlabeled = [d.doc_id for d in dataset if d.gold_label is None]
    if unlabeled:
        raise ValueError(f"unlabeled documents in dataset: {unlabeled[:3]}")
    gold = {d.doc_id: int(d.gold_label) for d in dataset}
    total_pos = sum(gold.values())
    if total_pos == 0:
        raise ValueError("dataset has no positive documents")
    n = len(dataset)

    matrices = {}
    for mode in spec.feature_modes:
        if mode == "tfidf":
            vocab = fit_vocabulary(dataset, orders=spec.al_template.ngram_orders)
            matrices[mode] = build_tfidf_matrix(dataset, vocab)
        elif mode == "embedding":
            from .features import build_embedding_matrix, load_embeddings
            template = spec.al_template
            if template.embedding_path is None or template.embedding_dim is None:
                raise ValueError("embedding mode needs embedding_path and embedding_dim")
            emb = load_embeddings(template.embedding_path, template.embedding_dim)
            matrices[mode] = build_embedding_matrix(dataset, emb)
        else:
            raise ValueError(f"unknown feature_mode {mode!r}")

    def make_oracle(run_seed: int) -> Callable[[str], int]:
        if spec.oracle_noise == 0.0:
            return gold.__getitem__
        noise_rng = random.Random(f"noise:{run_seed}")
        return lambda doc_id: (1 - gold[doc_id]
                               if noise_rng.random() < spec.oracle_noise
                               else gold[doc_id])

    jobs = []
    for mode in spec.feature_modes:
        for strategy in spec.strategies:
            for r in range(spec.repetitions):
                run_seed = spec.al_template.rng_seed + r
                seed_docs = spec.al_template.seed_doc_ids or pick_seed_docs(
                    dataset, spec.seed_positives, spec.seed_negatives, run_seed)
                config = replace(spec.al_template, strategy=strategy,
                                 feature_mode=mode, budget_b=n,
                                 seed_doc_ids=list(seed_docs), rng_seed=run_seed)
                jobs.append(((mode, strategy, r), config))

    def execute(job):
        key, config = job
        return key, _run_one(dataset, gold, total_pos, matrices[config.feature_mode],
                             config, spec.checkpoints, make_oracle(config.rng_seed))

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = dict(pool.map(execute, jobs))
    else:
        results = dict(execute(job) for job in jobs)

    curves: list[CurvePoint] = []
    auc_per_run: list[dict] = []
    grouped: dict[tuple[str, str, str], list[float]] = {}
    for key in sorted(results):
        points = results[key]
        curves.extend(points)
        for metric in ("f1_hybrid", "hate_found_fraction"):
            auc = curve_auc(points, metric)
            auc_per_run.append({
                "strategy": points[0].strategy,
                "feature_mode": points[0].feature_mode,
                "seed": points[0].seed,
                "metric": metric,
                "auc": auc,
            })
            grouped.setdefault((points[0].strategy, points[0].feature_mode, metric),
                               []).append(auc)
    auc_mean = [
        {"strategy": s, "feature_mode": m, "metric": metric,
         "auc": sum(values) / len(values)}
        for (s, m, metric), values in sorted(grouped.items())
    ]
    return SimulationResult(curves=curves, auc_per_run=auc_per_run, auc_mean=auc_mean)


def mean_curve_value(curves: Sequence[CurvePoint], strategy: str, metric: str,
                     cost_fraction: float, tol: float = 1e-9) -> float:
    """Average a metric across seeds at one sampled cost fraction."""
    values = [getattr(p, metric) for p in curves
              if p.strategy == strategy and abs(p.cost_fraction - cost_fraction) <= tol]
    if not values:
        raise ValueError(f"no curve points for {strategy} at cost {cost_fraction}")
    return sum(values) / len(values)


def write_curves_csv(curves: Sequence[CurvePoint], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "feature_mode", "seed", "cost_fraction",
                         "f1_hybrid", "hate_found_fraction"])
        for p in curves:
            writer.writerow([p.strategy, p.feature_mode, p.seed,
                             repr(p.cost_fraction), repr(p.f1_hybrid),
                             repr(p.hate_found_fraction)])


def write_auc_json(result: SimulationResult, path: str) -> None:
    payload = {"per_run": result.auc_per_run, "mean": result.auc_mean}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
