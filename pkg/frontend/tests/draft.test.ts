import { describe, expect, it } from "vitest";

import {
  draftToPayload,
  finalStepEnabled,
  newDraft,
  setFinalJudgment,
  visitStep,
} from "../src/draft.js";

describe("step gating", () => {
  it("disables the final judgment until steps 1-5 are visited", () => {
    const d = newDraft("d0", "you are trash", "w0");
    expect(finalStepEnabled(d)).toBe(false);
    expect(visitStep(d, 6)).toBe(false);
    expect(setFinalJudgment(d, true)).toBe(false);
    expect(d.finalHateful).toBeNull();

    for (const step of [2, 3, 4]) visitStep(d, step);
    expect(finalStepEnabled(d)).toBe(false); // step 5 still unvisited
    visitStep(d, 5);
    expect(finalStepEnabled(d)).toBe(true);
    expect(visitStep(d, 6)).toBe(true);
    expect(setFinalJudgment(d, true)).toBe(true);
    expect(d.finalHateful).toBe(true);
  });

  it("starts on step 1 and tracks the current step", () => {
    const d = newDraft("d0", "text", "w0");
    expect(d.currentStep).toBe(1);
    visitStep(d, 3);
    expect(d.currentStep).toBe(3);
    expect(d.visitedSteps.has(2)).toBe(false);
  });

  it("rejects step numbers outside the schema", () => {
    const d = newDraft("d0", "text", "w0");
    expect(() => visitStep(d, 0)).toThrow(RangeError);
    expect(() => visitStep(d, 8)).toThrow(RangeError);
  });
});

describe("draftToPayload", () => {
  it("refuses a draft with no final judgment", () => {
    const d = newDraft("d0", "text", "w0");
    expect(() => draftToPayload(d)).toThrow("final judgment");
  });

  it("produces the exact wire shape", () => {
    const d = newDraft("d7", "you are trash", "w3");
    for (const step of [2, 3, 4, 5]) visitStep(d, step);
    d.derogatory_spans = [{ start: 8, end: 13 }];
    d.target_spans = [{ start: 0, end: 3 }];
    d.targetGroup = "OTHER";
    setFinalJudgment(d, true);
    expect(draftToPayload(d)).toEqual({
      doc_id: "d7",
      worker_id: "w3",
      final_hateful: true,
      violence_spans: [],
      derogatory_spans: [{ start: 8, end: 13 }],
      implicit_action: null,
      target_spans: [{ start: 0, end: 3 }],
      implicit_target_name: null,
      target_group: "OTHER",
      explanation: null,
      pornographic: false,
    });
  });
});
