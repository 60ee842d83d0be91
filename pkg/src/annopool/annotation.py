"""Structured annotation records and their aggregation.

An annotation decomposes the judgment into highlighted evidence (violent or
derogatory action spans, target spans), implicit fallbacks for both, a
targeted-group category, and the annotator's direct final call. The final
call can disagree with the evidence; that inconsistency is computed here,
never blocked at storage time.

Character offsets are Unicode scalar-value offsets into the cleaned text,
the bit-exact contract shared with any frontend.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .corpus import Document, token_spans

TARGET_GROUPS = frozenset({
    "BODY", "GENDER", "IDEOLOGY", "RACE", "RELIGION", "SEXUAL_ORIENTATION", "OTHER",
})
IMPLICIT_ACTIONS = frozenset({"inciting_violence", "derogatory_language"})
UNDECIDED = "UNDECIDED"
HATEFUL = "hateful"
NON_HATEFUL = "non_hateful"

SPAN_FIELDS = ("violence_spans", "derogatory_spans", "target_spans")


@dataclass(frozen=True)
class Span:
    start: int  # inclusive
    end: int    # exclusive

    def __post_init__(self) -> None:
        if self.start < 0 or self.end <= self.start:
            raise ValueError(f"invalid span ({self.start}, {self.end})")


def _check_spans(spans: Sequence[Span], text_len: int, field_name: str) -> None:
    for span in spans:
        if span.end > text_len:
            raise ValueError(
                f"{field_name} span ({span.start}, {span.end}) out of bounds "
                f"for text of length {text_len}")
    ordered = sorted(spans, key=lambda s: s.start)
    for a, b in zip(ordered, ordered[1:]):
        if a.end > b.start:
            raise ValueError(f"overlapping {field_name} spans")


@dataclass
class Annotation:
    doc_id: str
    worker_id: str
    final_hateful: bool
    violence_spans: list[Span] = field(default_factory=list)
    derogatory_spans: list[Span] = field(default_factory=list)
    implicit_action: Optional[str] = None
    target_spans: list[Span] = field(default_factory=list)
    implicit_target_name: Optional[str] = None
    target_group: Optional[str] = None
    explanation: Optional[str] = None
    pornographic: bool = False

    def __post_init__(self) -> None:
        if self.implicit_action is not None and self.implicit_action not in IMPLICIT_ACTIONS:
            raise ValueError(f"unknown implicit_action {self.implicit_action!r}")
        if self.target_group is not None and self.target_group not in TARGET_GROUPS:
            raise ValueError(f"unknown target_group {self.target_group!r}")

    def validate_spans(self, text: str) -> None:
        for name in SPAN_FIELDS:
            _check_spans(getattr(self, name), len(text), name)


@dataclass
class AggregatedLabel:
    doc_id: str
    final_label: str                 # hateful / non_hateful
    consistent: bool
    annotator_count: int
    target_group: Optional[str] = None   # category, UNDECIDED, or None
    explicitness: Optional[str] = None   # explicit, implicit, UNDECIDED, or None


def infer_hateful(a: Annotation) -> bool:
    """A labeling implies hateful only when it carries both action evidence
    and target evidence (explicit spans or the implicit fallback)."""
    has_action = bool(a.violence_spans or a.derogatory_spans or a.implicit_action)
    has_target = bool(a.target_spans or a.implicit_target_name)
    return has_action and has_target


def self_consistent(a: Annotation) -> bool:
    return a.final_hateful == infer_hateful(a)


def _strict_majority(votes: Sequence, total: int):
    """The vote value held by more than half of `total` raters, else None."""
    counts: dict = {}
    for v in votes:
        if v is not None:
            counts[v] = counts.get(v, 0) + 1
    for value, count in counts.items():
        if count * 2 > total:
            return value
    return None


def aggregate(doc: Document, annotations: Sequence[Annotation],
              strict: bool = False) -> AggregatedLabel:
    """Consensus label for one document.

    final_label is the strict majority of the direct final judgments; an
    even split falls back to non_hateful. The consistency flag compares
    the final-vote majority against the inferred-vote majority; in strict
    mode a single self-inconsistent annotator marks the whole document
    inconsistent. Target group and explicitness are resolved only for
    hateful outcomes, each by strict majority with UNDECIDED fallback.
    """
    if not annotations:
        raise ValueError("need at least one annotation")
    for a in annotations:
        if a.doc_id != doc.doc_id:
            raise ValueError(f"annotation for {a.doc_id!r} does not match document "
                             f"{doc.doc_id!r}")
        a.validate_spans(doc.text)

    r = len(annotations)
    final_majority = _strict_majority([a.final_hateful for a in annotations], r)
    final_label = HATEFUL if final_majority is True else NON_HATEFUL
    inferred_majority = _strict_majority([infer_hateful(a) for a in annotations], r)
    inferred_label = HATEFUL if inferred_majority is True else NON_HATEFUL
    if strict:
        consistent = all(self_consistent(a) for a in annotations)
    else:
        consistent = final_label == inferred_label

    target_group = None
    explicitness = None
    if final_label == HATEFUL:
        group = _strict_majority([a.target_group for a in annotations], r)
        target_group = group if group is not None else UNDECIDED
        votes = []
        for a in annotations:
            if a.target_spans:
                votes.append("explicit")
            elif a.implicit_target_name:
                votes.append("implicit")
            else:
                votes.append(None)
        majority = _strict_majority(votes, r)
        explicitness = majority if majority is not None else UNDECIDED

    return AggregatedLabel(
        doc_id=doc.doc_id,
        final_label=final_label,
        consistent=consistent,
        annotator_count=r,
        target_group=target_group,
        explicitness=explicitness,
    )


def filter_consistent(labels: Sequence[AggregatedLabel]
                      ) -> tuple[list[AggregatedLabel], list[AggregatedLabel]]:
    """Exact partition into (kept, discarded) by the consistency flag."""
    kept = [l for l in labels if l.consistent]
    discarded = [l for l in labels if not l.consistent]
    return kept, discarded


def rationale_token_labels(doc: Document, a: Annotation, span_field: str) -> list[int]:
    """Binary vector over the document's tokens: 1 only when every character
    of the token lies inside the field's highlighted spans. No spans (the
    implicit cases) yield an all-zero vector of full token length."""
    if span_field not in SPAN_FIELDS:
        raise ValueError(f"unknown span field {span_field!r}")
    spans: list[Span] = getattr(a, span_field)
    _check_spans(spans, len(doc.text), span_field)
    tokens = token_spans(doc.text)
    if not spans:
        return [0] * len(tokens)
    covered = [False] * len(doc.text)
    for span in spans:
        for i in range(span.start, span.end):
            covered[i] = True
    return [
        1 if all(covered[i] for i in range(start, end)) else 0
        for start, end in tokens
    ]


def annotation_to_dict(a: Annotation) -> dict:
    return {
        "doc_id": a.doc_id,
        "worker_id": a.worker_id,
        "violence_spans": [{"start": s.start, "end": s.end} for s in a.violence_spans],
        "derogatory_spans": [{"start": s.start, "end": s.end} for s in a.derogatory_spans],
        "implicit_action": a.implicit_action,
        "target_spans": [{"start": s.start, "end": s.end} for s in a.target_spans],
        "implicit_target_name": a.implicit_target_name,
        "target_group": a.target_group,
        "final_hateful": a.final_hateful,
        "explanation": a.explanation,
        "pornographic": a.pornographic,
    }


def annotation_from_dict(d: dict) -> Annotation:
    def _spans(key: str) -> list[Span]:
        return [Span(int(s["start"]), int(s["end"])) for s in d.get(key) or []]

    return Annotation(
        doc_id=str(d["doc_id"]),
        worker_id=str(d["worker_id"]),
        final_hateful=bool(d["final_hateful"]),
        violence_spans=_spans("violence_spans"),
        derogatory_spans=_spans("derogatory_spans"),
        implicit_action=d.get("implicit_action"),
        target_spans=_spans("target_spans"),
        implicit_target_name=d.get("implicit_target_name"),
        target_group=d.get("target_group"),
        explanation=d.get("explanation"),
        pornographic=bool(d.get("pornographic", False)),
    )


def aggregated_to_dict(label: AggregatedLabel) -> dict:
    return {
        "doc_id": label.doc_id,
        "final_label": label.final_label,
        "consistent": label.consistent,
        "annotator_count": label.annotator_count,
        "target_group": label.target_group,
        "explicitness": label.explicitness,
    }


def read_annotations(path) -> list[Annotation]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(annotation_from_dict(json.loads(line)))
    return out


def write_annotations(annotations: Sequence[Annotation], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in annotations:
            fh.write(json.dumps(annotation_to_dict(a), ensure_ascii=False) + "\n")
