from __future__ import annotations

import itertools

import pytest

from annopool.annotation import (
    UNDECIDED,
    AggregatedLabel,
    Annotation,
    Span,
    aggregate,
    annotation_from_dict,
    annotation_to_dict,
    filter_consistent,
    infer_hateful,
    rationale_token_labels,
    read_annotations,
    self_consistent,
    write_annotations,
)
from annopool.corpus import Document

DOC = Document("d1", "you are trash")


def _ann(worker="w1", final=True, violence=(), derog=(), action=None,
         targets=(), target_name=None, group=None, doc_id="d1"):
    return Annotation(
        doc_id=doc_id, worker_id=worker, final_hateful=final,
        violence_spans=[Span(*s) for s in violence],
        derogatory_spans=[Span(*s) for s in derog],
        implicit_action=action,
        target_spans=[Span(*s) for s in targets],
        implicit_target_name=target_name,
        target_group=group,
    )


def test_infer_hateful_needs_action_and_target():
    assert infer_hateful(_ann(derog=[(8, 13)], targets=[(0, 3)]))
    assert not infer_hateful(_ann(derog=[(8, 13)]))          # no target
    assert not infer_hateful(_ann(targets=[(0, 3)]))         # no action
    assert not infer_hateful(_ann())                          # empty
    assert infer_hateful(_ann(action="derogatory_language", target_name="group x"))


def test_self_consistent():
    assert self_consistent(_ann(final=True, derog=[(8, 13)], targets=[(0, 3)]))
    assert not self_consistent(_ann(final=True, derog=[(8, 13)]))  # yes without target
    assert self_consistent(_ann(final=False))
    assert not self_consistent(_ann(final=False, derog=[(8, 13)], targets=[(0, 3)]))


def test_aggregate_majority_with_group():
    anns = [
        _ann("w1", final=True, derog=[(8, 13)], targets=[(0, 3)], group="RACE"),
        _ann("w2", final=True, derog=[(8, 13)], targets=[(0, 3)], group="RACE"),
        _ann("w3", final=False, group="GENDER"),
    ]
    label = aggregate(DOC, anns)
    assert label.final_label == "hateful"
    assert label.consistent
    assert label.target_group == "RACE"
    assert label.annotator_count == 3


def test_aggregate_undecided_when_all_groups_differ():
    anns = [
        _ann("w1", final=True, derog=[(8, 13)], targets=[(0, 3)], group="RACE"),
        _ann("w2", final=True, derog=[(8, 13)], targets=[(0, 3)], group="GENDER"),
        _ann("w3", final=True, derog=[(8, 13)], targets=[(0, 3)], group="IDEOLOGY"),
    ]
    assert aggregate(DOC, anns).target_group == UNDECIDED


def test_aggregate_inconsistent_final_vs_inferred():
    # two vote hateful with zero evidence; inferred majority says no
    anns = [
        _ann("w1", final=True),
        _ann("w2", final=True),
        _ann("w3", final=False),
    ]
    label = aggregate(DOC, anns)
    assert label.final_label == "hateful"
    assert not label.consistent


def test_aggregate_even_split_defaults_non_hateful():
    anns = [
        _ann("w1", final=True, derog=[(8, 13)], targets=[(0, 3)]),
        _ann("w2", final=False),
    ]
    label = aggregate(DOC, anns)
    assert label.final_label == "non_hateful"
    assert label.target_group is None and label.explicitness is None


def test_aggregate_explicitness_resolution():
    explicit = [
        _ann(w, final=True, derog=[(8, 13)], targets=[(0, 3)], group="OTHER")
        for w in ("w1", "w2", "w3")
    ]
    assert aggregate(DOC, explicit).explicitness == "explicit"

    implicit = [
        _ann(w, final=True, action="derogatory_language", target_name="them",
             group="OTHER")
        for w in ("w1", "w2", "w3")
    ]
    assert aggregate(DOC, implicit).explicitness == "implicit"

    mixed = [
        _ann("w1", final=True, derog=[(8, 13)], targets=[(0, 3)]),
        _ann("w2", final=True, action="derogatory_language", target_name="them"),
        _ann("w3", final=True, derog=[(8, 13)]),
    ]
    assert aggregate(DOC, mixed).explicitness == UNDECIDED


def test_aggregate_strict_mode():
    anns = [
        _ann("w1", final=True, derog=[(8, 13)], targets=[(0, 3)]),
        _ann("w2", final=True, derog=[(8, 13)], targets=[(0, 3)]),
        _ann("w3", final=True),  # self-inconsistent (no evidence)
    ]
    assert aggregate(DOC, anns).consistent is True
    assert aggregate(DOC, anns, strict=True).consistent is False


def test_aggregate_permutation_invariant():
    anns = [
        _ann("w1", final=True, derog=[(8, 13)], targets=[(0, 3)], group="RACE"),
        _ann("w2", final=False),
        _ann("w3", final=True, derog=[(8, 13)], targets=[(0, 3)], group="RACE"),
    ]
    results = {
        (lab.final_label, lab.consistent, lab.target_group, lab.explicitness)
        for perm in itertools.permutations(anns)
        if (lab := aggregate(DOC, list(perm)))
    }
    assert len(results) == 1


def test_aggregate_three_copies_of_consistent_annotation():
    a = _ann("w1", final=True, derog=[(8, 13)], targets=[(0, 3)], group="RELIGION")
    assert infer_hateful(a)
    label = aggregate(DOC, [a, a, a])
    assert label.final_label == "hateful" and label.consistent


def test_aggregate_errors():
    with pytest.raises(ValueError):
        aggregate(DOC, [])
    with pytest.raises(ValueError, match="does not match"):
        aggregate(DOC, [_ann(doc_id="other")])
    with pytest.raises(ValueError, match="out of bounds"):
        aggregate(DOC, [_ann(derog=[(0, 99)])])


def test_filter_consistent_partition():
    labels = [
        AggregatedLabel(f"d{i}", "hateful", consistent=(i not in (3, 7)),
                        annotator_count=3)
        for i in range(10)
    ]
    kept, discarded = filter_consistent(labels)
    assert len(kept) == 8 and len(discarded) == 2
    assert {l.doc_id for l in kept} | {l.doc_id for l in discarded} == {
        f"d{i}" for i in range(10)}
    assert not ({l.doc_id for l in kept} & {l.doc_id for l in discarded})
    assert filter_consistent([])[0] == []


def test_rationale_token_labels_exact_cover():
    # "you are trash": tokens at (0,3), (4,7), (8,13)
    a = _ann(derog=[(8, 13)])
    assert rationale_token_labels(DOC, a, "derogatory_spans") == [0, 0, 1]


def test_rationale_token_labels_partial_cover_excluded():
    a = _ann(derog=[(8, 11)])  # covers "tra" only
    assert rationale_token_labels(DOC, a, "derogatory_spans") == [0, 0, 0]


def test_rationale_token_labels_no_spans_all_zero():
    a = _ann(action="derogatory_language", target_name="them")
    assert rationale_token_labels(DOC, a, "derogatory_spans") == [0, 0, 0]
    assert rationale_token_labels(DOC, a, "target_spans") == [0, 0, 0]


def test_rationale_token_labels_union_coverage():
    # two touching spans jointly cover the token "trash"
    a = _ann(derog=[(8, 10), (10, 13)])
    assert rationale_token_labels(DOC, a, "derogatory_spans") == [0, 0, 1]


def test_rationale_token_labels_length_matches_tokens():
    doc = Document("d1", "one two three four five")
    a = _ann(targets=[(0, 3)])
    assert len(rationale_token_labels(doc, a, "target_spans")) == 5


def test_rationale_token_labels_errors():
    with pytest.raises(ValueError, match="out of bounds"):
        rationale_token_labels(DOC, _ann(derog=[(0, 999)]), "derogatory_spans")
    with pytest.raises(ValueError, match="unknown span field"):
        rationale_token_labels(DOC, _ann(), "explanation")


def test_span_validation():
    with pytest.raises(ValueError):
        Span(3, 3)
    with pytest.raises(ValueError):
        Span(-1, 2)
    with pytest.raises(ValueError, match="overlapping"):
        aggregate(DOC, [_ann(derog=[(0, 5), (3, 8)])])


def test_annotation_field_validation():
    with pytest.raises(ValueError, match="implicit_action"):
        _ann(action="shouting")
    with pytest.raises(ValueError, match="target_group"):
        _ann(group="ALIENS")


def test_annotation_round_trip(tmp_path):
    anns = [
        _ann("w1", final=True, violence=[(0, 3)], derog=[(8, 13)],
             targets=[(4, 7)], group="BODY"),
        _ann("w2", final=False, action="inciting_violence", target_name="x"),
    ]
    anns[0].explanation = "emoji \U0001f600 text"
    path = tmp_path / "ann.jsonl"
    write_annotations(anns, path)
    back = read_annotations(path)
    assert [annotation_to_dict(a) for a in back] == [annotation_to_dict(a) for a in anns]
    round_trip = annotation_from_dict(annotation_to_dict(anns[0]))
    assert round_trip.violence_spans == anns[0].violence_spans
