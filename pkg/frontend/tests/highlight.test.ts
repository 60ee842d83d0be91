import { describe, expect, it } from "vitest";

import {
  highlightedText,
  mergeSpan,
  removeSpanAt,
  renderSegments,
  selectionToSpan,
} from "../src/highlight.js";

describe("selectionToSpan", () => {
  it("maps a plain ASCII selection directly", () => {
    expect(selectionToSpan("you are trash", 8, 13)).toEqual({ start: 8, end: 13 });
  });

  it("is a no-op for whitespace-only selections", () => {
    expect(selectionToSpan("you are trash", 3, 4)).toBeNull();
    expect(selectionToSpan("you are trash", 7, 7)).toBeNull();
  });

  it("accepts reversed anchor and focus", () => {
    expect(selectionToSpan("you are trash", 13, 8)).toEqual({ start: 8, end: 13 });
  });

  it("trims whitespace at the selection edges", () => {
    expect(selectionToSpan("you are trash", 3, 13)).toEqual({ start: 4, end: 13 });
  });

  it("returns scalar offsets when the text contains emoji", () => {
    const text = "I 💖 cats 🐱 ok";
    // utf16 5..12 covers "cats 🐱"
    expect(selectionToSpan(text, 5, 12)).toEqual({ start: 4, end: 10 });
  });

  it("snaps selection endpoints off surrogate halves", () => {
    const text = "I 💖 cats 🐱 ok";
    // utf16 11 is the low half of 🐱; snapping must widen, not truncate
    expect(selectionToSpan(text, 5, 11)).toEqual({ start: 4, end: 10 });
    expect(selectionToSpan(text, 3, 4)).toEqual({ start: 2, end: 3 }); // the heart itself
  });
});

describe("mergeSpan", () => {
  it("keeps disjoint spans sorted", () => {
    expect(mergeSpan([{ start: 0, end: 1 }, { start: 6, end: 8 }], { start: 2, end: 3 }))
      .toEqual([{ start: 0, end: 1 }, { start: 2, end: 3 }, { start: 6, end: 8 }]);
  });

  it("merges an overlapping selection into the existing span", () => {
    expect(mergeSpan([{ start: 2, end: 5 }], { start: 4, end: 9 }))
      .toEqual([{ start: 2, end: 9 }]);
  });

  it("merges touching spans", () => {
    expect(mergeSpan([{ start: 0, end: 2 }], { start: 2, end: 4 }))
      .toEqual([{ start: 0, end: 4 }]);
  });

  it("swallows several spans bridged by one selection", () => {
    expect(mergeSpan([{ start: 0, end: 2 }, { start: 4, end: 6 }], { start: 1, end: 5 }))
      .toEqual([{ start: 0, end: 6 }]);
  });

  it("rejects empty spans", () => {
    expect(() => mergeSpan([], { start: 3, end: 3 })).toThrow(RangeError);
  });
});

describe("removeSpanAt", () => {
  it("removes exactly the span under the offset", () => {
    const spans = [{ start: 0, end: 2 }, { start: 4, end: 6 }];
    expect(removeSpanAt(spans, 5)).toEqual([{ start: 0, end: 2 }]);
    expect(removeSpanAt(spans, 6)).toEqual(spans); // end is exclusive
  });
});

describe("renderSegments", () => {
  it("reassembles the original text", () => {
    const text = "I 💖 cats 🐱 ok";
    const segs = renderSegments(text, [{ start: 4, end: 10 }]);
    expect(segs.map((s) => s.text).join("")).toBe(text);
    expect(segs).toEqual([
      { text: "I 💖 ", highlighted: false },
      { text: "cats 🐱", highlighted: true },
      { text: " ok", highlighted: false },
    ]);
  });

  it("handles spans at both ends and multiple spans", () => {
    const segs = renderSegments("abcdef", [
      { start: 0, end: 2 },
      { start: 4, end: 6 },
    ]);
    expect(segs).toEqual([
      { text: "ab", highlighted: true },
      { text: "cd", highlighted: false },
      { text: "ef", highlighted: true },
    ]);
  });

  it("renders empty span lists as one plain segment", () => {
    expect(renderSegments("abc", [])).toEqual([{ text: "abc", highlighted: false }]);
  });
});

describe("highlightedText", () => {
  it("recovers the exact highlighted characters", () => {
    const text = "I 💖 cats 🐱 ok";
    expect(highlightedText(text, [{ start: 2, end: 3 }, { start: 4, end: 10 }]))
      .toEqual(["💖", "cats 🐱"]);
  });
});
