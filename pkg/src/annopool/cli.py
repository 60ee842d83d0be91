"""Command-line front door wiring the pipeline end to end.

Every command stages its outputs with a ".partial" suffix and renames them
only when everything succeeded, then drops a RunManifest JSON beside the
primary output so the run can be reproduced. Options may come from a JSON
config file (--config); explicit flags win.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import __version__
from .active_learning import ALConfig
from .annotation import (
    aggregate,
    aggregated_to_dict,
    filter_consistent,
    read_annotations,
)
from .corpus import (
    IngestConfig,
    ingest,
    load_lexicon,
    read_collection,
    write_collection,
)
from .metrics import (
    class_metrics,
    fleiss_kappa,
    gwet_ac1,
    partition_by_lexicon,
    prevalence,
    raw_agreement,
    relative_coverage,
)
from .models import TrainingConfig, load_external_scores
from .pooling import PoolConfig, build_pool, scorer_from_external
from .simulation import (
    SimulationSpec,
    make_synthetic_corpus,
    simulate,
    write_auc_json,
    write_curves_csv,
)


class CliError(Exception):
    """Validation failure surfaced as a one-line message and exit code 1."""


class OutputSet:
    """Atomic multi-file output: stage to .partial, rename all on commit."""

    def __init__(self) -> None:
        self._staged: list[tuple[str, str]] = []

    def stage(self, final_path: str) -> str:
        partial = f"{final_path}.partial"
        self._staged.append((partial, final_path))
        return partial

    def commit(self) -> None:
        for partial, final in self._staged:
            os.replace(partial, final)

    def finals(self) -> list[str]:
        return [final for _, final in self._staged]


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(primary_output: str, command: str, config_echo: dict,
                    inputs: dict, outputs: list[str], seeds: dict,
                    started: float) -> None:
    manifest = {
        "command": command,
        "config": config_echo,
        "inputs": inputs,
        "outputs": outputs,
        "rng_seeds": seeds,
        "toolkit_version": __version__,
        "duration_seconds": round(time.time() - started, 6),
    }
    path = f"{primary_output}.manifest.json"
    partial = f"{path}.partial"
    _write_json(partial, manifest)
    os.replace(partial, path)


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise CliError("config file must hold a JSON object")
    return config


def _pick(args: argparse.Namespace, config: dict, key: str, default=None,
          required: bool = False):
    """Effective option value: explicit flag beats config beats default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    if required and default is None:
        raise CliError(f"missing required option --{key.replace('_', '-')}")
    return default


# ------------------------------------------------------------------ ingest

def cmd_ingest(args: argparse.Namespace) -> None:
    started = time.time()
    config = _load_config_file(args.config)
    input_path = _pick(args, config, "input", required=True)
    output_path = _pick(args, config, "output", required=True)
    drop_retweets = _pick(args, config, "drop_retweets", default=True)

    try:
        with open(input_path, "r", encoding="utf-8") as fh:
            lines = [line for line in fh if line.strip()]
    except OSError as exc:
        raise CliError(f"cannot read {input_path}: {exc}") from exc
    report = ingest(lines, IngestConfig(drop_retweets=bool(drop_retweets)),
                    source_note=str(input_path))

    outputs = OutputSet()
    write_collection(report.collection, outputs.stage(output_path))
    outputs.commit()
    _write_manifest(output_path, "ingest",
                    {"drop_retweets": bool(drop_retweets),
                     "counts": report.counts},
                    {"input": str(input_path)}, outputs.finals(), {}, started)


# -------------------------------------------------------------------- pool

def _parse_score_specs(specs) -> dict[str, str]:
    named = {}
    for spec in specs or []:
        if "=" not in spec:
            raise CliError(f"--scores expects NAME=PATH, got {spec!r}")
        name, path = spec.split("=", 1)
        if not name or name in named:
            raise CliError(f"bad or duplicate score model name {name!r}")
        named[name] = path
    if not named:
        raise CliError("at least one --scores NAME=PATH is required")
    return named


def cmd_pool(args: argparse.Namespace) -> None:
    started = time.time()
    config = _load_config_file(args.config)
    collection_path = _pick(args, config, "collection", required=True)
    output_path = _pick(args, config, "output", required=True)
    report_path = _pick(args, config, "report",
                        default=f"{output_path}.report.json")
    threshold = float(_pick(args, config, "threshold", default=0.5))
    budget = int(_pick(args, config, "budget", required=True))
    rng_seed = int(_pick(args, config, "rng_seed", default=0))
    score_specs = _pick(args, config, "scores", required=True)

    collection = read_collection(collection_path)
    models = [scorer_from_external(name, load_external_scores(path))
              for name, path in _parse_score_specs(score_specs).items()]
    result = build_pool(collection, models,
                        PoolConfig(threshold_t=threshold, budget_b=budget,
                                   rng_seed=rng_seed))

    outputs = OutputSet()
    with open(outputs.stage(output_path), "w", encoding="utf-8") as fh:
        for doc_id in result.selected:
            fh.write(doc_id + "\n")
    _write_json(outputs.stage(report_path), {
        "selected_count": len(result.selected),
        "candidate_count": result.candidate_count,
        "per_model_hit_counts": result.per_model_hit_counts,
        "unscored_counts": result.unscored_counts,
        "note": result.note,
    })
    outputs.commit()
    _write_manifest(output_path, "pool",
                    {"threshold": threshold, "budget": budget},
                    {"collection": str(collection_path),
                     "scores": dict(_parse_score_specs(score_specs))},
                    outputs.finals(), {"rng_seed": rng_seed}, started)


# ---------------------------------------------------------------- simulate

def cmd_simulate(args: argparse.Namespace) -> None:
    started = time.time()
    config = _load_config_file(args.config)
    collection_path = _pick(args, config, "collection")
    curves_path = _pick(args, config, "curves", required=True)
    auc_path = _pick(args, config, "auc", required=True)
    strategies = _pick(args, config, "strategies", default="CAL,SAL,SPL")
    feature_mode = _pick(args, config, "feature_mode", default="tfidf")
    repetitions = int(_pick(args, config, "repetitions", default=1))
    batch_size = int(_pick(args, config, "batch_size", default=10))
    rng_seed = int(_pick(args, config, "rng_seed", default=0))
    seed_positives = int(_pick(args, config, "seed_positives", default=5))
    seed_negatives = int(_pick(args, config, "seed_negatives", default=5))
    epochs = int(_pick(args, config, "epochs", default=100))
    synthetic_docs = _pick(args, config, "synthetic_docs")
    synthetic_rate = _pick(args, config, "synthetic_rate")
    corpus_seed = int(_pick(args, config, "corpus_seed", default=0))

    if collection_path is not None:
        dataset = read_collection(collection_path)
        dataset_note = str(collection_path)
    elif synthetic_docs is not None and synthetic_rate is not None:
        dataset = make_synthetic_corpus(int(synthetic_docs),
                                        float(synthetic_rate),
                                        rng_seed=corpus_seed)
        dataset_note = f"synthetic({synthetic_docs}, {synthetic_rate}, seed={corpus_seed})"
    else:
        raise CliError("need --collection or both --synthetic-docs and "
                       "--synthetic-rate")

    if isinstance(strategies, str):
        strategies = tuple(s.strip() for s in strategies.split(",") if s.strip())
    template = ALConfig(strategy="CAL", budget_b=1, seed_doc_ids=[],
                        batch_size_u=batch_size, rng_seed=rng_seed,
                        training=TrainingConfig(epochs=epochs))
    spec = SimulationSpec(dataset=dataset, strategies=strategies,
                          feature_modes=(feature_mode,),
                          repetitions=repetitions, al_template=template,
                          seed_positives=seed_positives,
                          seed_negatives=seed_negatives)
    result = simulate(spec)

    outputs = OutputSet()
    write_curves_csv(result.curves, outputs.stage(curves_path))
    write_auc_json(result, outputs.stage(auc_path))
    outputs.commit()
    _write_manifest(curves_path, "simulate",
                    {"strategies": list(strategies), "repetitions": repetitions,
                     "batch_size": batch_size, "epochs": epochs,
                     "seed_positives": seed_positives,
                     "seed_negatives": seed_negatives},
                    {"dataset": dataset_note}, outputs.finals(),
                    {"rng_seed": rng_seed, "corpus_seed": corpus_seed}, started)


# --------------------------------------------------------------- aggregate

def _grouped_annotations(collection, annotations):
    grouped: dict[str, list] = {}
    for ann in annotations:
        if ann.doc_id not in collection:
            raise CliError(f"annotation references unknown document {ann.doc_id!r}")
        grouped.setdefault(ann.doc_id, []).append(ann)
    return grouped


def cmd_aggregate(args: argparse.Namespace) -> None:
    started = time.time()
    config = _load_config_file(args.config)
    collection_path = _pick(args, config, "collection", required=True)
    annotations_path = _pick(args, config, "annotations", required=True)
    output_path = _pick(args, config, "output", required=True)
    report_path = _pick(args, config, "report",
                        default=f"{output_path}.report.json")
    strict = bool(_pick(args, config, "strict", default=False))

    collection = read_collection(collection_path)
    grouped = _grouped_annotations(collection,
                                   read_annotations(annotations_path))
    labels = [aggregate(collection[doc_id], anns, strict=strict)
              for doc_id, anns in sorted(grouped.items())]
    kept, discarded = filter_consistent(labels)

    outputs = OutputSet()
    with open(outputs.stage(output_path), "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(json.dumps(aggregated_to_dict(label), sort_keys=True) + "\n")
    _write_json(outputs.stage(report_path), {
        "total": len(labels),
        "kept": len(kept),
        "discarded": len(discarded),
        "discarded_doc_ids": [l.doc_id for l in discarded],
        "strict": strict,
    })
    outputs.commit()
    _write_manifest(output_path, "aggregate", {"strict": strict},
                    {"collection": str(collection_path),
                     "annotations": str(annotations_path)},
                    outputs.finals(), {}, started)


# ------------------------------------------------------------------ metrics

def cmd_metrics(args: argparse.Namespace) -> None:
    started = time.time()
    config = _load_config_file(args.config)
    collection_path = _pick(args, config, "collection", required=True)
    annotations_path = _pick(args, config, "annotations", required=True)
    output_path = _pick(args, config, "output", required=True)
    lexicon_path = _pick(args, config, "lexicon")
    scores_path = _pick(args, config, "scores")
    annotator_count = _pick(args, config, "annotator_count")

    collection = read_collection(collection_path)
    grouped = _grouped_annotations(collection,
                                   read_annotations(annotations_path))
    if not grouped:
        raise CliError("no annotations to evaluate")
    labels = {doc_id: aggregate(collection[doc_id], anns)
              for doc_id, anns in sorted(grouped.items())}
    hateful = {doc_id: int(label.final_label == "hateful")
               for doc_id, label in labels.items()}
    report: dict = {
        "documents": len(labels),
        "prevalence_hateful": prevalence(list(hateful.values())),
    }

    # agreement over docs with a uniform annotator count
    counts = {doc_id: len(anns) for doc_id, anns in grouped.items()}
    if annotator_count is None:
        annotator_count = max(set(counts.values()),
                              key=lambda c: sum(1 for v in counts.values() if v == c))
    annotator_count = int(annotator_count)
    table_docs = sorted(d for d, c in counts.items() if c == annotator_count)
    if annotator_count >= 2 and table_docs:
        table = []
        for doc_id in table_docs:
            yes = sum(1 for a in grouped[doc_id] if a.final_hateful)
            table.append([annotator_count - yes, yes])
        report["agreement"] = {
            "annotator_count": annotator_count,
            "documents": len(table_docs),
            "raw": raw_agreement(table),
            "fleiss_kappa": fleiss_kappa(table),
            "gwet_ac1": gwet_ac1(table),
        }
    else:
        report["agreement"] = None

    if lexicon_path is not None:
        lexicon = load_lexicon(lexicon_path)
        docs = [collection[d] for d in sorted(labels)]
        without, with_terms = partition_by_lexicon(docs, lexicon)
        n_total = sum(hateful.values())
        n_with = sum(hateful[d.doc_id] for d in with_terms)
        report["relative_coverage"] = (relative_coverage(n_total, n_with)
                                       if n_with else None)
        report["hateful_total"] = n_total
        report["hateful_with_lexicon"] = n_with

        if scores_path is not None:
            scorer = load_external_scores(scores_path)
            sections = {"all": docs, "without_lexicon": without,
                        "with_lexicon": with_terms}
            per_partition = {}
            for name, part in sections.items():
                if not part:
                    per_partition[name] = None
                    continue
                gold = [hateful[d.doc_id] for d in part]
                preds = []
                for d in part:
                    score = scorer.get(d.doc_id)
                    if score is None:
                        raise CliError(f"no score for document {d.doc_id!r}")
                    preds.append(int(score >= 0.5))
                m = class_metrics(preds, gold, 1)
                per_partition[name] = {"precision": m.precision,
                                       "recall": m.recall, "f1": m.f1,
                                       "documents": len(part)}
            report["partitioned_metrics"] = per_partition

    outputs = OutputSet()
    _write_json(outputs.stage(output_path), report)
    outputs.commit()
    _write_manifest(output_path, "metrics",
                    {"annotator_count": annotator_count},
                    {"collection": str(collection_path),
                     "annotations": str(annotations_path),
                     "lexicon": str(lexicon_path) if lexicon_path else None,
                     "scores": str(scores_path) if scores_path else None},
                    outputs.finals(), {}, started)


# -------------------------------------------------------------------- serve

def cmd_serve(args: argparse.Namespace) -> None:
    started = time.time()
    config = _load_config_file(args.config)
    data_dir = _pick(args, config, "data_dir", required=True)
    host = _pick(args, config, "host", default="127.0.0.1")
    port = int(_pick(args, config, "port", default=8000))

    import uvicorn

    from .service import create_app

    app = create_app(data_dir)
    _write_manifest(os.path.join(str(data_dir), "serve"), "serve",
                    {"host": host, "port": port}, {"data_dir": str(data_dir)},
                    [], {}, started)
    uvicorn.run(app, host=host, port=port, log_level="warning")


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annopool",
        description="Rare-class corpus building: pooling, iterative "
                    "selection, annotation service, and evaluation.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; flags win")
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "clean and deduplicate raw posts")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--drop-retweets", dest="drop_retweets",
                   action="store_true", default=None)
    p.add_argument("--keep-retweets", dest="drop_retweets",
                   action="store_false", default=None)

    p = add("pool", cmd_pool, "threshold-union-downsample selection")
    p.add_argument("--collection")
    p.add_argument("--scores", action="append", metavar="NAME=PATH")
    p.add_argument("--threshold", type=float)
    p.add_argument("--budget", type=int)
    p.add_argument("--rng-seed", dest="rng_seed", type=int)
    p.add_argument("--output")
    p.add_argument("--report")

    p = add("simulate", cmd_simulate, "cost-effectiveness curves and AUC")
    p.add_argument("--collection")
    p.add_argument("--synthetic-docs", dest="synthetic_docs", type=int)
    p.add_argument("--synthetic-rate", dest="synthetic_rate", type=float)
    p.add_argument("--corpus-seed", dest="corpus_seed", type=int)
    p.add_argument("--strategies")
    p.add_argument("--feature-mode", dest="feature_mode")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--rng-seed", dest="rng_seed", type=int)
    p.add_argument("--seed-positives", dest="seed_positives", type=int)
    p.add_argument("--seed-negatives", dest="seed_negatives", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--curves")
    p.add_argument("--auc")

    p = add("aggregate", cmd_aggregate, "majority labels and discard report")
    p.add_argument("--collection")
    p.add_argument("--annotations")
    p.add_argument("--output")
    p.add_argument("--report")
    p.add_argument("--strict", action="store_true", default=None)

    p = add("metrics", cmd_metrics, "agreement, prevalence, coverage, P/R/F1")
    p.add_argument("--collection")
    p.add_argument("--annotations")
    p.add_argument("--lexicon")
    p.add_argument("--scores")
    p.add_argument("--annotator-count", dest="annotator_count", type=int)
    p.add_argument("--output")

    p = add("serve", cmd_serve, "run the annotation HTTP service")
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--host")
    p.add_argument("--port", type=int)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        print(f"annopool {args.command}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"annopool {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
