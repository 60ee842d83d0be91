"""HTTP annotation service.

Hosts live sessions of the selection loop: humans are the oracle, each
completed batch retrains the model that picks the next batch. All state
changes go through an append-only JSON Lines event log (fsynced before the
ack), and a restarted server reconstructs every session by replaying its
log through the same code path that handled the live traffic. Training is
deterministic, so the reconstruction is exact.
"""
from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .active_learning import ALConfig, iteration_rng, select_from_scores
from .annotation import (
    HATEFUL,
    Annotation,
    aggregate,
    aggregated_to_dict,
    annotation_from_dict,
    annotation_to_dict,
    infer_hateful,
    self_consistent,
)
from .corpus import DocumentCollection, read_collection
from .features import (
    build_embedding_matrix,
    build_tfidf_matrix,
    fit_vocabulary,
    load_embeddings,
)
from .models import TrainingConfig, fit_logistic

CONTENT_WARNING = (
    "Content warning: this task shows real social media posts that may "
    "contain hateful, offensive, or otherwise upsetting language. Continue "
    "only if you are comfortable reviewing such material."
)

LABEL_SOURCES = ("final", "inferred")


class ServiceError(Exception):
    def __init__(self, status_code: int, reason: str):
        super().__init__(reason)
        self.status_code = status_code
        self.reason = reason


def config_to_dict(config: ALConfig) -> dict:
    raw = asdict(config)
    raw["ngram_orders"] = list(config.ngram_orders)
    return raw


def config_from_dict(raw: dict) -> ALConfig:
    raw = dict(raw)
    training = raw.pop("training", None) or {}
    if "ngram_orders" in raw and raw["ngram_orders"] is not None:
        raw["ngram_orders"] = tuple(int(n) for n in raw["ngram_orders"])
    return ALConfig(training=TrainingConfig(**training), **raw)


class _LiveSession:
    """One annotation session: collection, config, model, event log.

    Mutations are serialized by self.lock. The outstanding batch is never
    stored; it is a pure function of (model, judged set, iteration), which
    makes repeated next_documents calls stable and replay trivial.
    """

    def __init__(self, session_id: str, collection_name: str,
                 collection: DocumentCollection, config: ALConfig,
                 seed_labels: dict[str, int], annotators_per_doc: int,
                 label_source: str, log_path: Path):
        self.session_id = session_id
        self.collection_name = collection_name
        self.collection = collection
        self.config = config
        self.annotators_per_doc = annotators_per_doc
        self.label_source = label_source
        self.log_path = log_path
        self.lock = threading.Lock()

        if config.budget_b > len(collection):
            raise ServiceError(400, "budget exceeds collection size")
        missing = [d for d in config.seed_doc_ids if d not in collection]
        if missing:
            raise ServiceError(400, f"seed documents not in collection: {missing[:3]}")
        unlabeled = [d for d in config.seed_doc_ids if d not in seed_labels]
        if unlabeled:
            raise ServiceError(400, f"no label for seed documents: {unlabeled[:3]}")
        if {int(seed_labels[d]) for d in config.seed_doc_ids} != {0, 1}:
            raise ServiceError(400, "seed labels must include both classes")

        if config.feature_mode == "tfidf":
            vocab = fit_vocabulary(collection, orders=config.ngram_orders)
            self.X, self.doc_ids = build_tfidf_matrix(collection, vocab)
        else:
            if config.embedding_path is None or config.embedding_dim is None:
                raise ServiceError(400, "embedding mode needs embedding_path "
                                        "and embedding_dim")
            emb = load_embeddings(config.embedding_path, config.embedding_dim)
            self.X, self.doc_ids = build_embedding_matrix(collection, emb)
        self.row_of = {d: i for i, d in enumerate(self.doc_ids)}

        self.judged: list[tuple[str, int, int]] = [
            (d, int(seed_labels[d]), 0) for d in config.seed_doc_ids]
        self.remaining = config.budget_b - len(self.judged)
        self.iteration = 0  # completed post-seed batches
        self.annotations: dict[tuple[str, str], Annotation] = {}
        self.submission_order: list[tuple[str, str]] = []
        self.batch_events: list[dict] = []
        self.model = self._retrain()

    # ------------------------------------------------------------ internals

    def _retrain(self):
        rows = [self.row_of[d] for d, _, _ in self.judged]
        y = np.asarray([label for _, label, _ in self.judged], dtype=float)
        return fit_logistic(self.X[rows], y, self.config.training)

    def _judged_ids(self) -> set[str]:
        return {d for d, _, _ in self.judged}

    def outstanding(self) -> list[str]:
        """Current batch awaiting labels; [] when the session is exhausted."""
        if self.remaining < self.config.batch_size_u:
            return []
        judged_ids = self._judged_ids()
        probs = self.model.predict_matrix(self.X)
        scores = {d: float(probs[i]) for d, i in self.row_of.items()
                  if d not in judged_ids}
        return select_from_scores(
            scores, judged_ids, self.config.strategy, self.config.batch_size_u,
            iteration_rng(self.config.rng_seed, self.iteration + 1))

    def status(self) -> str:
        return "active" if self.outstanding() else "exhausted"

    def _doc_count(self, doc_id: str) -> int:
        return sum(1 for d, _ in self.annotations if d == doc_id)

    def _doc_label(self, doc_id: str) -> int:
        votes = []
        for (d, _), ann in self.annotations.items():
            if d == doc_id:
                flag = ann.final_hateful if self.label_source == "final" \
                    else infer_hateful(ann)
                votes.append(bool(flag))
        # strict majority; an even split counts as non-hateful
        return 1 if sum(votes) * 2 > len(votes) else 0

    def apply_annotation(self, ann: Annotation, log: bool = True) -> dict:
        """Shared mutation path for live submissions and log replay."""
        doc = self.collection[ann.doc_id] if ann.doc_id in self.collection else None
        if doc is None:
            raise ServiceError(400, f"unknown document {ann.doc_id!r}")
        batch = self.outstanding()
        if ann.doc_id not in batch:
            raise ServiceError(409, f"document {ann.doc_id!r} is not in the "
                                    "outstanding batch")
        key = (ann.doc_id, ann.worker_id)
        if key in self.annotations:
            raise ServiceError(409, f"worker {ann.worker_id!r} already "
                                    f"annotated {ann.doc_id!r}")
        if self._doc_count(ann.doc_id) >= self.annotators_per_doc:
            raise ServiceError(409, f"document {ann.doc_id!r} already has "
                                    "the configured number of annotations")
        try:
            ann.validate_spans(doc.text)
        except ValueError as exc:
            raise ServiceError(400, f"invalid spans: {exc}") from exc

        if log:
            self._append_event({"event": "annotation",
                                "payload": annotation_to_dict(ann)})
        self.annotations[key] = ann
        self.submission_order.append(key)

        complete = all(self._doc_count(d) >= self.annotators_per_doc
                       for d in batch)
        if complete:
            self.iteration += 1
            labels = {d: self._doc_label(d) for d in batch}
            self.judged.extend((d, labels[d], self.iteration) for d in batch)
            self.remaining -= len(batch)
            event = {"event": "batch_complete", "iteration": self.iteration,
                     "doc_ids": list(batch), "labels": labels}
            self.batch_events.append(event)
            if log:
                self._append_event(event)
            self.model = self._retrain()
        return {"consistent": self_consistent(ann), "batch_complete": complete,
                "status": self.status()}

    def _append_event(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True)
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    # ------------------------------------------------------------- queries

    def state(self) -> dict:
        counts = {}
        for d, _ in self.annotations:
            counts[d] = counts.get(d, 0) + 1
        complete_docs = sorted(d for d, c in counts.items()
                               if c >= self.annotators_per_doc)
        hateful = 0
        for d in complete_docs:
            anns = [a for (doc, _), a in self.annotations.items() if doc == d]
            if aggregate(self.collection[d], anns).final_label == HATEFUL:
                hateful += 1
        consistent = sum(1 for a in self.annotations.values() if self_consistent(a))
        return {
            "session_id": self.session_id,
            "collection": self.collection_name,
            "strategy": self.config.strategy,
            "status": self.status(),
            "batch_size": self.config.batch_size_u,
            "budget_total": self.config.budget_b,
            "budget_spent": len(self.judged),
            "budget_remaining": self.remaining,
            "iteration": self.iteration,
            "annotated_docs": len(complete_docs),
            "prevalence_hateful": (hateful / len(complete_docs)
                                   if complete_docs else 0.0),
            "consistency": {
                "consistent": consistent,
                "inconsistent": len(self.annotations) - consistent,
            },
            "annotators_per_doc": self.annotators_per_doc,
            "label_source": self.label_source,
            "content_warning": CONTENT_WARNING,
        }

    def export_lines(self) -> list[str]:
        """Timestamp-free export: seed labels, raw annotations in submission
        order, then aggregates for fully annotated docs."""
        lines = []
        for d in self.config.seed_doc_ids:
            label = next(lab for doc, lab, it in self.judged
                         if doc == d and it == 0)
            lines.append({"type": "seed", "doc_id": d, "label": label})
        for key in self.submission_order:
            lines.append({"type": "annotation",
                          **annotation_to_dict(self.annotations[key])})
        counts = {}
        for d, _ in self.annotations:
            counts[d] = counts.get(d, 0) + 1
        for d in sorted(d for d, c in counts.items()
                        if c >= self.annotators_per_doc):
            anns = [a for (doc, _), a in self.annotations.items() if doc == d]
            lines.append({"type": "aggregate",
                          **aggregated_to_dict(aggregate(self.collection[d], anns))})
        return [json.dumps(line, sort_keys=True) for line in lines]


# ------------------------------------------------------------- app factory

class CreateSessionRequest(BaseModel):
    collection: str
    config: dict
    seed_labels: Optional[dict[str, int]] = None
    annotators_per_doc: int = 1
    label_source: str = "final"
    session_id: Optional[str] = None


def _load_collection(data_dir: Path, name: str) -> DocumentCollection:
    path = data_dir / "collections" / f"{name}.jsonl"
    if not path.exists():
        raise ServiceError(400, f"unknown collection {name!r}")
    return read_collection(str(path))


def _build_session(data_dir: Path, session_id: str, created: dict,
                   log_path: Path) -> _LiveSession:
    try:
        config = config_from_dict(created["config"])
    except (TypeError, ValueError) as exc:
        raise ServiceError(400, f"invalid config: {exc}") from exc
    collection = _load_collection(data_dir, created["collection"])
    label_source = created.get("label_source", "final")
    if label_source not in LABEL_SOURCES:
        raise ServiceError(400, f"label_source must be one of {LABEL_SOURCES}")
    annotators = int(created.get("annotators_per_doc", 1))
    if annotators < 1:
        raise ServiceError(400, "annotators_per_doc must be >= 1")
    seed_labels = created.get("seed_labels")
    if seed_labels is None:
        # fall back to gold labels referenced from the collection
        seed_labels = {d: collection[d].gold_label for d in config.seed_doc_ids
                       if d in collection and collection[d].gold_label is not None}
    seed_labels = {str(k): int(v) for k, v in seed_labels.items()}
    return _LiveSession(session_id, created["collection"], collection, config,
                        seed_labels, annotators, label_source, log_path)


def replay_session(data_dir: Path, log_path: Path) -> _LiveSession:
    """Rebuild a session from its event log via the live mutation path."""
    with open(log_path, encoding="utf-8") as fh:
        events = [json.loads(line) for line in fh if line.strip()]
    if not events or events[0].get("event") != "created":
        raise RuntimeError(f"event log {log_path} does not start with creation")
    created = events[0]
    session = _build_session(data_dir, created["session_id"], created, log_path)
    logged_batches = []
    for event in events[1:]:
        if event["event"] == "annotation":
            session.apply_annotation(annotation_from_dict(event["payload"]),
                                     log=False)
        elif event["event"] == "batch_complete":
            logged_batches.append(event)
        else:
            raise RuntimeError(f"unknown event {event['event']!r} in {log_path}")
    if logged_batches != session.batch_events:
        raise RuntimeError(f"event log {log_path} is inconsistent with "
                           "deterministic replay")
    return session


def create_app(data_dir) -> FastAPI:
    data_dir = Path(data_dir)
    sessions_dir = data_dir / "sessions"
    sessions_dir.mkdir(parents=True, exist_ok=True)
    (data_dir / "collections").mkdir(parents=True, exist_ok=True)

    sessions: dict[str, _LiveSession] = {}
    for log_path in sorted(sessions_dir.glob("*.jsonl")):
        session = replay_session(data_dir, log_path)
        sessions[session.session_id] = session

    app = FastAPI(title="annopool service")
    app.state.sessions = sessions

    @app.exception_handler(ServiceError)
    async def _service_error(_, exc: ServiceError):
        return JSONResponse(status_code=exc.status_code,
                            content={"detail": exc.reason})

    def get_session(session_id: str) -> _LiveSession:
        if session_id not in sessions:
            raise HTTPException(status_code=404,
                                detail=f"unknown session {session_id!r}")
        return sessions[session_id]

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        session_id = req.session_id or uuid.uuid4().hex
        if session_id in sessions:
            raise HTTPException(status_code=409,
                                detail=f"session {session_id!r} already exists")
        created = {
            "event": "created",
            "session_id": session_id,
            "collection": req.collection,
            "config": req.config,
            "seed_labels": req.seed_labels,
            "annotators_per_doc": req.annotators_per_doc,
            "label_source": req.label_source,
        }
        log_path = sessions_dir / f"{session_id}.jsonl"
        try:
            session = _build_session(data_dir, session_id, created, log_path)
        except ServiceError as exc:
            raise HTTPException(status_code=exc.status_code,
                                detail=exc.reason) from exc
        # persist only after the config proved valid
        session._append_event(created)
        sessions[session_id] = session
        return {
            "session_id": session_id,
            "status": session.status(),
            "budget_remaining": session.remaining,
            "seed_count": len(session.config.seed_doc_ids),
            "content_warning": CONTENT_WARNING,
        }

    @app.get("/sessions/{session_id}/next")
    def next_documents(session_id: str, worker: str = Query(default="w0")):
        session = get_session(session_id)
        with session.lock:
            batch = session.outstanding()
            docs = [d for d in batch
                    if (d, worker) not in session.annotations
                    and session._doc_count(d) < session.annotators_per_doc]
            return {
                "documents": [{"doc_id": d, "text": session.collection[d].text}
                              for d in docs],
                "status": session.status(),
                "iteration": session.iteration + 1 if batch else session.iteration,
            }

    @app.post("/sessions/{session_id}/annotations")
    def submit_annotation(session_id: str, payload: dict):
        session = get_session(session_id)
        try:
            ann = annotation_from_dict(payload)
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=400,
                                detail=f"invalid annotation: {exc}") from exc
        with session.lock:
            try:
                return session.apply_annotation(ann)
            except ServiceError as exc:
                raise HTTPException(status_code=exc.status_code,
                                    detail=exc.reason) from exc

    @app.get("/sessions/{session_id}/state")
    def session_state(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return session.state()

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str):
        session = get_session(session_id)
        with session.lock:
            body = "\n".join(session.export_lines())
        if body:
            body += "\n"
        return PlainTextResponse(body, media_type="application/x-ndjson")

    return app
