// Input records: one JSON object per line with the text pair, a numeric
// target, and a split label. Validation happens up front so a bad line
// fails with its line number instead of surfacing later as a cryptic
// tokenizer or manifest error.

export const SPLITS = ["train", "val", "test"] as const;
export type Split = (typeof SPLITS)[number];

export interface InputRecord {
  id: string;
  text_a: string;
  text_b: string;
  target: number;
  split: Split;
}

export class RecordError extends Error {}

function asString(obj: Record<string, unknown>, key: string, line: number): string {
  const value = obj[key];
  if (typeof value !== "string") {
    throw new RecordError(`line ${line}: field '${key}' must be a string`);
  }
  return value;
}

export function parseRecords(text: string): InputRecord[] {
  const records: InputRecord[] = [];
  const seen = new Set<string>();
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") continue;
    const lineNo = i + 1;
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new RecordError(`line ${lineNo}: invalid JSON (${(err as Error).message})`);
    }
    if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
      throw new RecordError(`line ${lineNo}: expected a JSON object`);
    }
    const row = obj as Record<string, unknown>;
    for (const key of ["id", "text_a", "text_b", "target", "split"]) {
      if (!(key in row)) {
        throw new RecordError(`line ${lineNo}: missing field '${key}'`);
      }
    }
    const id = asString(row, "id", lineNo);
    if (id === "") {
      throw new RecordError(`line ${lineNo}: id must be non-empty`);
    }
    if (seen.has(id)) {
      throw new RecordError(`line ${lineNo}: duplicate id '${id}'`);
    }
    seen.add(id);
    const target = row.target;
    if (typeof target !== "number" || !Number.isFinite(target)) {
      throw new RecordError(`line ${lineNo}: target must be a finite number`);
    }
    const split = asString(row, "split", lineNo);
    if (!(SPLITS as readonly string[]).includes(split)) {
      throw new RecordError(
        `line ${lineNo}: split '${split}' not one of ${SPLITS.join(", ")}`,
      );
    }
    records.push({
      id,
      text_a: asString(row, "text_a", lineNo),
      text_b: asString(row, "text_b", lineNo),
      target,
      split: split as Split,
    });
  }
  if (records.length === 0) {
    throw new RecordError("no records found");
  }
  return records;
}
