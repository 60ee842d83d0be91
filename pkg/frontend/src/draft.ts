/**
 * The in-progress annotation for one document, stepped through the guided
 * schema:
 *
 *   1 highlight calls to violence          2 highlight derogatory language
 *   3 implicit action (if nothing to highlight)
 *   4 highlight the intended target        5 implicit target + group
 *   6 final judgment                       7 optional explanation
 *
 * The final judgment control stays disabled until steps 1 through 5 have
 * each been visited, and a draft cannot be submitted while any guardrail
 * violation is outstanding.
 */

import type {
  AnnotationPayload,
  ImplicitAction,
  Span,
  TargetGroup,
} from "./types.js";

export const FINAL_STEP = 6;
export const GATED_STEPS = [1, 2, 3, 4, 5] as const;

export type SpanField = "violence_spans" | "derogatory_spans" | "target_spans";

export interface AnnotationDraft {
  docId: string;
  workerId: string;
  text: string;
  violence_spans: Span[];
  derogatory_spans: Span[];
  target_spans: Span[];
  implicitAction: ImplicitAction | null;
  implicitTargetName: string | null;
  targetGroup: TargetGroup | null;
  finalHateful: boolean | null; // null until step 6 answered
  explanation: string | null;
  pornographic: boolean;
  visitedSteps: Set<number>;
  currentStep: number;
}

export function newDraft(docId: string, text: string, workerId: string): AnnotationDraft {
  return {
    docId,
    workerId,
    text,
    violence_spans: [],
    derogatory_spans: [],
    target_spans: [],
    implicitAction: null,
    implicitTargetName: null,
    targetGroup: null,
    finalHateful: null,
    explanation: null,
    pornographic: false,
    visitedSteps: new Set([1]),
    currentStep: 1,
  };
}

/** Move to a step, marking it visited. Step 6 is gated on 1-5. */
export function visitStep(draft: AnnotationDraft, step: number): boolean {
  if (step < 1 || step > 7) throw new RangeError(`no step ${step}`);
  if (step === FINAL_STEP && !finalStepEnabled(draft)) return false;
  draft.visitedSteps.add(step);
  draft.currentStep = step;
  return true;
}

export function finalStepEnabled(draft: AnnotationDraft): boolean {
  return GATED_STEPS.every((s) => draft.visitedSteps.has(s));
}

export function setFinalJudgment(draft: AnnotationDraft, hateful: boolean): boolean {
  if (!finalStepEnabled(draft)) return false;
  draft.visitedSteps.add(FINAL_STEP);
  draft.finalHateful = hateful;
  return true;
}

/** Wire payload; callers must have checked guardrails first. */
export function draftToPayload(draft: AnnotationDraft): AnnotationPayload {
  if (draft.finalHateful === null) {
    throw new Error("final judgment not made");
  }
  return {
    doc_id: draft.docId,
    worker_id: draft.workerId,
    final_hateful: draft.finalHateful,
    violence_spans: draft.violence_spans.map((s) => ({ ...s })),
    derogatory_spans: draft.derogatory_spans.map((s) => ({ ...s })),
    implicit_action: draft.implicitAction,
    target_spans: draft.target_spans.map((s) => ({ ...s })),
    implicit_target_name: draft.implicitTargetName,
    target_group: draft.targetGroup,
    explanation: draft.explanation,
    pornographic: draft.pornographic,
  };
}
