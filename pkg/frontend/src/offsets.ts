/**
 * UTF-16 <-> Unicode scalar offset conversion.
 *
 * JS string indices count UTF-16 code units; the service counts Unicode
 * scalar values (one per code point, so an emoji is one unit, not two).
 * This is the single cross-language bit-exactness hazard in the whole
 * pipeline, so every offset crosses through these two functions and
 * nothing else does index arithmetic on mixed units.
 */

/** Number of Unicode scalar values in the string. */
export function scalarLength(text: string): number {
  let n = 0;
  for (const _ of text) n++;
  return n;
}

/**
 * Convert a UTF-16 index into a scalar offset.
 * Throws if the index lands inside a surrogate pair or past the end.
 */
export function utf16ToScalar(text: string, utf16Index: number): number {
  if (utf16Index < 0 || utf16Index > text.length) {
    throw new RangeError(`utf16 index ${utf16Index} out of range`);
  }
  let scalars = 0;
  let i = 0;
  while (i < utf16Index) {
    const code = text.codePointAt(i);
    if (code === undefined) throw new RangeError("index past end of text");
    i += code > 0xffff ? 2 : 1;
    scalars++;
  }
  if (i !== utf16Index) {
    throw new RangeError(`utf16 index ${utf16Index} splits a surrogate pair`);
  }
  return scalars;
}

/** Convert a scalar offset back into a UTF-16 index. */
export function scalarToUtf16(text: string, scalarIndex: number): number {
  if (scalarIndex < 0) throw new RangeError(`scalar index ${scalarIndex} out of range`);
  let i = 0;
  for (let s = 0; s < scalarIndex; s++) {
    const code = text.codePointAt(i);
    if (code === undefined) {
      throw new RangeError(`scalar index ${scalarIndex} out of range`);
    }
    i += code > 0xffff ? 2 : 1;
  }
  return i;
}

/** Slice by scalar offsets (the service's Span semantics). */
export function scalarSlice(text: string, start: number, end: number): string {
  return text.slice(scalarToUtf16(text, start), scalarToUtf16(text, end));
}
