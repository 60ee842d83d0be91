"""Quantitative instruments for corpus quality and selection efficiency:
prevalence, relative coverage beyond a lexicon, chance-corrected agreement
(Fleiss kappa, Gwet AC1), one-vs-rest classification metrics, hybrid
human+machine F1, and trapezoid AUC for cost-effectiveness curves.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .corpus import Document, HateLexicon, contains_hate_word


def _validate_table(table) -> np.ndarray:
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
        raise ValueError("agreement table must be items x categories with >= 2 categories")
    if np.any(arr < 0):
        raise ValueError("agreement table entries must be nonnegative")
    row_sums = arr.sum(axis=1)
    r = row_sums[0]
    if not np.all(row_sums == r):
        raise ValueError("every item must have the same number of raters")
    if r < 2:
        raise ValueError("need at least 2 raters per item")
    return arr


def prevalence(labels: Sequence[int]) -> float:
    """Fraction of positive labels."""
    if len(labels) == 0:
        raise ValueError("prevalence of an empty label list is undefined")
    return sum(1 for v in labels if v) / len(labels)


def relative_coverage(n_total_hateful: int, n_hateful_with_lexicon: int,
                      prose_variant: bool = False) -> float:
    """100 * (N_T - N_TH) / N_TH: how far the corpus reaches beyond posts
    containing known lexicon terms. The prose_variant flag divides by N_T
    instead (share of hateful posts without lexicon terms); the two
    readings disagree, so both are exposed and the ratio form is default.
    """
    if n_total_hateful < n_hateful_with_lexicon:
        raise ValueError("lexicon-matching count cannot exceed total")
    if prose_variant:
        if n_total_hateful == 0:
            raise ValueError("relative coverage undefined: no hateful posts")
        return 100.0 * (n_total_hateful - n_hateful_with_lexicon) / n_total_hateful
    if n_hateful_with_lexicon == 0:
        raise ValueError("relative coverage undefined: no hateful posts match the lexicon")
    return 100.0 * (n_total_hateful - n_hateful_with_lexicon) / n_hateful_with_lexicon


def raw_agreement(table) -> float:
    """Mean over items of the fraction of agreeing rater pairs."""
    arr = _validate_table(table)
    r = arr.sum(axis=1)[0]
    per_item = (arr * (arr - 1)).sum(axis=1) / (r * (r - 1))
    return float(per_item.mean())


def _column_mass(arr: np.ndarray) -> np.ndarray:
    return arr.sum(axis=0) / arr.sum()


def fleiss_kappa(table) -> float:
    """(P - Pe) / (1 - Pe) with Pe the sum of squared category masses.
    Perfect agreement returns 1.0 by convention, covering the degenerate
    single-category case where Pe = 1."""
    arr = _validate_table(table)
    p_bar = raw_agreement(arr)
    if p_bar == 1.0:
        return 1.0
    p_e = float((_column_mass(arr) ** 2).sum())
    return (p_bar - p_e) / (1.0 - p_e)


def gwet_ac1(table) -> float:
    """(P - Pe) / (1 - Pe) with Pe = (1/(Q-1)) * sum_q pi_q (1 - pi_q)."""
    arr = _validate_table(table)
    p_bar = raw_agreement(arr)
    q = arr.shape[1]
    pi = _column_mass(arr)
    p_e = float((pi * (1.0 - pi)).sum() / (q - 1))
    if p_bar == 1.0:
        return 1.0
    return (p_bar - p_e) / (1.0 - p_e)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


def class_metrics(predictions: Sequence, gold: Sequence, cls) -> ClassMetrics:
    """One-vs-rest precision/recall/F1 for the named class; zero
    denominators yield 0 by convention."""
    if len(predictions) != len(gold):
        raise ValueError("predictions and gold must have equal length")
    tp = sum(1 for p, g in zip(predictions, gold) if p == cls and g == cls)
    fp = sum(1 for p, g in zip(predictions, gold) if p == cls and g != cls)
    fn = sum(1 for p, g in zip(predictions, gold) if p != cls and g == cls)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassMetrics(precision=precision, recall=recall, f1=f1, support=tp + fn)


def partition_by_lexicon(docs: Sequence[Document], lexicon: HateLexicon
                         ) -> tuple[list[Document], list[Document]]:
    """(without lexicon terms, with lexicon terms), exhaustive and disjoint."""
    without: list[Document] = []
    with_terms: list[Document] = []
    for doc in docs:
        (with_terms if contains_hate_word(doc, lexicon) else without).append(doc)
    return without, with_terms


PredictFn = Union[Callable[[str], float], object]


def hybrid_f1(judged: Mapping[str, int], predict: PredictFn,
              gold: Mapping[str, int], threshold: float = 0.5) -> float:
    """F1 of the positive class from human labels where available and
    thresholded model predictions everywhere else."""
    unknown = set(judged) - set(gold)
    if unknown:
        raise ValueError(f"judged documents missing from gold: {sorted(unknown)[:3]}")
    predict_fn = predict if callable(predict) else predict.predict
    doc_ids = sorted(gold)
    assembled = [
        judged[d] if d in judged else (1 if predict_fn(d) >= threshold else 0)
        for d in doc_ids
    ]
    return class_metrics(assembled, [gold[d] for d in doc_ids], 1).f1


def trapezoid_auc(points: Sequence[tuple[float, float]]) -> float:
    """Trapezoid-rule area under a curve given as (x, y) samples."""
    if len(points) < 2:
        raise ValueError("need at least 2 points")
    xs = [p[0] for p in points]
    for a, b in zip(xs, xs[1:]):
        if b <= a:
            raise ValueError("x values must be strictly increasing (unsorted or duplicate x)")
    return sum(
        (x2 - x1) * (y1 + y2) / 2.0
        for (x1, y1), (x2, y2) in zip(points, points[1:])
    )
