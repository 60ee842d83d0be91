/**
 * Guideline rules checked before a draft may be submitted. These mirror the
 * rejection rules annotators are warned about: a hateful verdict needs both
 * action evidence and a target, and blanket highlighting is not evidence.
 */

import type { AnnotationDraft, SpanField } from "./draft.js";
import { scalarLength } from "./offsets.js";
import type { Span } from "./types.js";

export const VIOLATIONS = {
  missingAction: "missing action",
  missingTarget: "missing target",
  fullTextHighlight: "full-text highlight",
  pornographicHateful: "pornographic with hateful",
} as const;

const SPAN_FIELDS: SpanField[] = [
  "violence_spans",
  "derogatory_spans",
  "target_spans",
];

export function guardrails(draft: AnnotationDraft): string[] {
  const violations: string[] = [];
  if (draft.finalHateful === true) {
    const hasAction =
      draft.violence_spans.length > 0 ||
      draft.derogatory_spans.length > 0 ||
      draft.implicitAction !== null;
    if (!hasAction) violations.push(VIOLATIONS.missingAction);
    const hasTarget =
      draft.target_spans.length > 0 || draft.implicitTargetName !== null;
    if (!hasTarget) violations.push(VIOLATIONS.missingTarget);
    if (draft.pornographic) violations.push(VIOLATIONS.pornographicHateful);
  }
  for (const field of SPAN_FIELDS) {
    if (coversAllWords(draft.text, draft[field])) {
      violations.push(VIOLATIONS.fullTextHighlight);
      break; // one violation regardless of how many fields are blanketed
    }
  }
  return violations;
}

/**
 * True when the union of spans covers every non-whitespace character, i.e.
 * the annotator highlighted the whole post rather than the evidence.
 */
function coversAllWords(text: string, spans: readonly Span[]): boolean {
  if (spans.length === 0) return false;
  const n = scalarLength(text);
  const covered = new Array<boolean>(n).fill(false);
  for (const s of spans) {
    for (let i = s.start; i < s.end && i < n; i++) covered[i] = true;
  }
  let scalar = 0;
  let sawWord = false;
  for (const ch of text) {
    if (!/\s/.test(ch)) {
      sawWord = true;
      if (!covered[scalar]) return false;
    }
    scalar++;
  }
  return sawWord;
}
