export * from "./types.js";
export * from "./offsets.js";
export * from "./highlight.js";
export * from "./draft.js";
export * from "./guardrails.js";
export * from "./client.js";
export * from "./workflow.js";
