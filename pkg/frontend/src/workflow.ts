/**
 * Session workflow for a single annotator tab.
 *
 * The content warning from the session metadata must be acknowledged before
 * the first document is shown. Submissions that hit a conflict (the batch
 * moved on under us) refresh the batch; network failures keep the draft so
 * nothing typed is lost. The server is the source of truth for conflicts.
 */

import { ConflictError, ServiceClient } from "./client.js";
import type { AnnotationDraft } from "./draft.js";
import { draftToPayload, newDraft } from "./draft.js";
import { guardrails } from "./guardrails.js";
import type { SessionDocument, SubmitResponse } from "./types.js";

export class GuardrailError extends Error {
  constructor(public readonly violations: string[]) {
    super(`guideline violations: ${violations.join(", ")}`);
    this.name = "GuardrailError";
  }
}

export type SubmitOutcome =
  | { kind: "accepted"; ack: SubmitResponse }
  | { kind: "conflict"; refreshed: true }
  | { kind: "offline"; draftKept: true };

export class AnnotatorWorkflow {
  private queue: SessionDocument[] = [];
  private warningText: string;
  private warningAcknowledged = false;
  private drafts = new Map<string, AnnotationDraft>();
  private exhausted = false;

  constructor(
    private readonly client: ServiceClient,
    private readonly sessionId: string,
    private readonly workerId: string,
    contentWarning: string,
  ) {
    this.warningText = contentWarning;
  }

  contentWarning(): string {
    return this.warningText;
  }

  acknowledgeWarning(): void {
    this.warningAcknowledged = true;
  }

  isExhausted(): boolean {
    return this.exhausted;
  }

  /** The document currently up for annotation; null before acknowledgment. */
  currentDocument(): SessionDocument | null {
    if (!this.warningAcknowledged) return null;
    return this.queue[0] ?? null;
  }

  /** Draft for the current document, created on first access. */
  currentDraft(): AnnotationDraft | null {
    const doc = this.currentDocument();
    if (doc === null) return null;
    let draft = this.drafts.get(doc.doc_id);
    if (!draft) {
      draft = newDraft(doc.doc_id, doc.text, this.workerId);
      this.drafts.set(doc.doc_id, draft);
    }
    return draft;
  }

  async refreshBatch(): Promise<void> {
    const batch = await this.client.nextBatch(this.sessionId, this.workerId);
    this.queue = batch.documents;
    this.exhausted = batch.status === "exhausted";
  }

  /**
   * Submit the current draft. Guardrail violations throw before anything
   * touches the network; service conflicts refresh the batch; network
   * errors preserve the draft for retry.
   */
  async submit(draft: AnnotationDraft): Promise<SubmitOutcome> {
    const violations = guardrails(draft);
    if (violations.length > 0 || draft.finalHateful === null) {
      throw new GuardrailError(
        violations.length > 0 ? violations : ["no final judgment"],
      );
    }
    let ack: SubmitResponse;
    try {
      ack = await this.client.submitAnnotation(this.sessionId, draftToPayload(draft));
    } catch (err) {
      if (err instanceof ConflictError) {
        await this.refreshBatch();
        return { kind: "conflict", refreshed: true };
      }
      if (err instanceof TypeError) {
        // fetch rejects with TypeError on network failure; draft stays local
        return { kind: "offline", draftKept: true };
      }
      throw err;
    }
    this.drafts.delete(draft.docId);
    this.queue = this.queue.filter((d) => d.doc_id !== draft.docId);
    if (ack.batch_complete || this.queue.length === 0) {
      await this.refreshBatch();
    }
    this.exhausted = ack.status === "exhausted" || this.exhausted;
    return { kind: "accepted", ack };
  }
}
