/**
 * Turning browser selections into service spans and back.
 *
 * Offsets are always derived from the displayed text; the client never
 * re-tokenizes. Spans within one field are kept sorted and non-overlapping
 * (the service rejects overlapping spans), so a selection that crosses an
 * existing span merges with it.
 */

import { scalarSlice, scalarToUtf16, utf16ToScalar } from "./offsets.js";
import type { Span } from "./types.js";

/**
 * Convert a selection (UTF-16 indices into the displayed text) to a Span.
 * Whitespace at the selection edges is dropped; a selection that contains
 * nothing else returns null (no-op per the guidelines).
 */
export function selectionToSpan(
  text: string,
  anchorUtf16: number,
  focusUtf16: number,
): Span | null {
  let lo = Math.min(anchorUtf16, focusUtf16);
  let hi = Math.max(anchorUtf16, focusUtf16);
  // snap endpoints off a surrogate half before converting
  if (lo > 0 && isLowSurrogate(text.charCodeAt(lo))) lo--;
  if (hi < text.length && isLowSurrogate(text.charCodeAt(hi))) hi++;
  while (lo < hi && isWhitespace(text.slice(lo, lo + 1))) lo++;
  while (hi > lo && isWhitespace(text.slice(hi - 1, hi))) hi--;
  if (lo >= hi) return null;
  return { start: utf16ToScalar(text, lo), end: utf16ToScalar(text, hi) };
}

function isLowSurrogate(code: number): boolean {
  return code >= 0xdc00 && code <= 0xdfff;
}

function isWhitespace(ch: string): boolean {
  return /\s/.test(ch);
}

/**
 * Insert a span into a field's span list, merging anything it overlaps or
 * touches. Result is sorted by start and non-overlapping.
 */
export function mergeSpan(spans: readonly Span[], added: Span): Span[] {
  if (added.start >= added.end) throw new RangeError("empty span");
  const out: Span[] = [];
  let cur = { ...added };
  for (const s of [...spans].sort((a, b) => a.start - b.start)) {
    if (s.end < cur.start || s.start > cur.end) {
      out.push(s);
    } else {
      cur = { start: Math.min(cur.start, s.start), end: Math.max(cur.end, s.end) };
    }
  }
  out.push(cur);
  return out.sort((a, b) => a.start - b.start);
}

/** Remove the span containing the given scalar offset, if any. */
export function removeSpanAt(spans: readonly Span[], scalar: number): Span[] {
  return spans.filter((s) => !(s.start <= scalar && scalar < s.end));
}

export interface Segment {
  text: string;
  highlighted: boolean;
}

/**
 * Split the text into contiguous segments for rendering, given a field's
 * (sorted, non-overlapping) spans in scalar offsets.
 */
export function renderSegments(text: string, spans: readonly Span[]): Segment[] {
  const segs: Segment[] = [];
  let cursorScalar = 0;
  let cursorUtf16 = 0;
  for (const s of [...spans].sort((a, b) => a.start - b.start)) {
    if (s.start > cursorScalar) {
      const upTo = scalarToUtf16(text, s.start);
      segs.push({ text: text.slice(cursorUtf16, upTo), highlighted: false });
      cursorUtf16 = upTo;
    }
    const endUtf16 = scalarToUtf16(text, s.end);
    segs.push({ text: text.slice(cursorUtf16, endUtf16), highlighted: true });
    cursorUtf16 = endUtf16;
    cursorScalar = s.end;
  }
  if (cursorUtf16 < text.length) {
    segs.push({ text: text.slice(cursorUtf16), highlighted: false });
  }
  return segs;
}

/** The exact characters a span highlights, for round-trip checks. */
export function highlightedText(text: string, spans: readonly Span[]): string[] {
  return spans.map((s) => scalarSlice(text, s.start, s.end));
}
