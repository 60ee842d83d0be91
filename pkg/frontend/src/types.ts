/**
 * Wire types shared with the annotation service.
 *
 * Offsets in Span are Unicode scalar values (what Python's len() counts),
 * NOT UTF-16 code units. Convert at the boundary; see offsets.ts.
 */

export interface Span {
  start: number;
  end: number;
}

export type ImplicitAction = "inciting_violence" | "derogatory_language";

export const TARGET_GROUPS = [
  "BODY",
  "GENDER",
  "IDEOLOGY",
  "RACE",
  "RELIGION",
  "SEXUAL_ORIENTATION",
  "OTHER",
] as const;

export type TargetGroup = (typeof TARGET_GROUPS)[number];

/** One worker's structured labeling of one document, as POSTed. */
export interface AnnotationPayload {
  doc_id: string;
  worker_id: string;
  final_hateful: boolean;
  violence_spans: Span[];
  derogatory_spans: Span[];
  implicit_action: ImplicitAction | null;
  target_spans: Span[];
  implicit_target_name: string | null;
  target_group: TargetGroup | null;
  explanation: string | null;
  pornographic: boolean;
}

export interface SessionDocument {
  doc_id: string;
  text: string;
}

export interface CreateSessionResponse {
  session_id: string;
  status: "active" | "exhausted";
  budget_remaining: number;
  seed_count: number;
  content_warning: string;
}

export interface NextBatchResponse {
  documents: SessionDocument[];
  status: "active" | "exhausted";
  iteration: number;
}

export interface SubmitResponse {
  consistent: boolean;
  batch_complete: boolean;
  status: "active" | "exhausted";
}

export interface SessionStateResponse {
  session_id: string;
  collection: string;
  strategy: string;
  status: "active" | "exhausted";
  batch_size: number;
  budget_total: number;
  budget_spent: number;
  budget_remaining: number;
  iteration: number;
  annotated_docs: number;
  prevalence_hateful: number;
  consistency: { consistent: number; inconsistent: number };
  annotators_per_doc: number;
  label_source: "final" | "inferred";
  content_warning: string;
}
