// Runs the real pipeline against the checked-in tiny checkpoint and
// compares payloads to reference states computed by an independent
// implementation of the same architecture (tools/make_tiny_checkpoint.py).

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { afterEach, beforeAll, describe, expect, it } from "vitest";

import { runExtract, ExtractReport } from "../src/extract.js";
import { readHsf } from "../src/hsf.js";
import { parseRecords, InputRecord } from "../src/records.js";

const ROOT = path.dirname(path.dirname(fileURLToPath(import.meta.url)));
const FIXTURES = path.join(ROOT, "fixtures");
const EXPECTED = path.join(FIXTURES, "expected");
const MODEL = "tiny-distilbert";
const TOLERANCE = 1e-4;

interface Meta {
  hidden_size: number;
  records: Record<string, { text: string; token_ids: number[] }>;
}

let meta: Meta;
let records: InputRecord[];
let template: string;
const tempDirs: string[] = [];

beforeAll(() => {
  meta = JSON.parse(fs.readFileSync(path.join(EXPECTED, "meta.json"), "utf-8"));
  records = parseRecords(fs.readFileSync(path.join(EXPECTED, "records.jsonl"), "utf-8"));
  template = fs
    .readFileSync(path.join(EXPECTED, "template.txt"), "utf-8")
    .replace(/\n$/, "");
});

afterEach(() => {
  while (tempDirs.length > 0) {
    fs.rmSync(tempDirs.pop()!, { recursive: true, force: true });
  }
});

function makeOutDir(): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "extract-"));
  tempDirs.push(dir);
  return dir;
}

async function extractTo(
  outDir: string,
  options: { maxLen?: number; recs?: InputRecord[] } = {},
): Promise<ExtractReport> {
  return runExtract(
    {
      modelId: MODEL,
      records: options.recs ?? records,
      template,
      maxLen: options.maxLen,
      outDir,
      localRoot: FIXTURES,
    },
    () => {},
  );
}

function maxGap(a: Float32Array, b: Float32Array): number {
  expect(a.length).toBe(b.length);
  let worst = 0;
  for (let i = 0; i < a.length; i++) {
    worst = Math.max(worst, Math.abs(a[i] - b[i]));
  }
  return worst;
}

describe("runExtract on the tiny checkpoint", () => {
  it("writes one HSF per record with the checkpoint's hidden size", { timeout: 120_000 }, async () => {
    const out = makeOutDir();
    const report = await extractTo(out);
    expect(report.failures).toEqual([]);
    expect(report.written).toBe(records.length);
    expect(report.hiddenSize).toBe(meta.hidden_size);

    for (const record of records) {
      const file = path.join(out, "states", `${record.id}.hsf`);
      const got = readHsf(file);
      expect(got.cols).toBe(meta.hidden_size);
      expect(got.rows).toBe(meta.records[record.id].token_ids.length);
      const want = readHsf(path.join(EXPECTED, `${record.id}.hsf`));
      expect(maxGap(got.data, want.data)).toBeLessThan(TOLERANCE);
    }

    const manifest = fs.readFileSync(path.join(out, "manifest.tsv"), "utf-8");
    const lines = manifest.trim().split("\n").map((l) => l.split("\t"));
    expect(lines.map((f) => f[0])).toEqual(records.map((r) => r.id));
    expect(lines.map((f) => f[1])).toEqual(records.map((r) => path.join("states", `${r.id}.hsf`)));
    expect(lines.map((f) => Number(f[2]))).toEqual(records.map((r) => r.target));
    expect(lines.map((f) => f[3])).toEqual(records.map((r) => r.split));

    const sidecar = JSON.parse(
      fs.readFileSync(path.join(out, "extraction.json"), "utf-8"),
    );
    expect(sidecar.model).toBe(MODEL);
    expect(sidecar.hidden_size).toBe(meta.hidden_size);
    expect(sidecar.state_convention).toMatch(/final layer/);
    expect(sidecar.records_written).toBe(records.length);
    expect(sidecar.records_failed).toBe(0);
  });

  it("is byte-identical across reruns", { timeout: 120_000 }, async () => {
    const first = makeOutDir();
    const second = makeOutDir();
    await extractTo(first);
    await extractTo(second);
    for (const record of records) {
      const a = fs.readFileSync(path.join(first, "states", `${record.id}.hsf`));
      const b = fs.readFileSync(path.join(second, "states", `${record.id}.hsf`));
      expect(a.equals(b)).toBe(true);
    }
    expect(
      fs.readFileSync(path.join(first, "manifest.tsv"), "utf-8"),
    ).toBe(fs.readFileSync(path.join(second, "manifest.tsv"), "utf-8"));
  });

  it("caps sequence length when maxLen is set", { timeout: 120_000 }, async () => {
    const out = makeOutDir();
    const report = await extractTo(out, { maxLen: 4 });
    expect(report.failures).toEqual([]);
    for (const record of records) {
      const got = readHsf(path.join(out, "states", `${record.id}.hsf`));
      expect(got.rows).toBe(4);
      const want = readHsf(path.join(EXPECTED, `${record.id}.maxlen4.hsf`));
      expect(maxGap(got.data, want.data)).toBeLessThan(TOLERANCE);
    }
  });

  it("logs a failed record and keeps going", { timeout: 120_000 }, async () => {
    const out = makeOutDir();
    const broken: InputRecord[] = [
      records[0],
      { ...records[1], text_b: "" },
      records[2],
    ];
    const logged: string[] = [];
    const report = await runExtract(
      { modelId: MODEL, records: broken, template, outDir: out, localRoot: FIXTURES },
      (line) => logged.push(line),
    );
    expect(report.written).toBe(2);
    expect(report.failures).toHaveLength(1);
    expect(report.failures[0].id).toBe("r1");
    expect(report.failures[0].error).toMatch(/empty/);
    expect(logged.some((l) => l.includes("r1") && l.includes("FAILED"))).toBe(true);
    expect(fs.existsSync(path.join(out, "states", "r0.hsf"))).toBe(true);
    expect(fs.existsSync(path.join(out, "states", "r1.hsf"))).toBe(false);
    const manifest = fs.readFileSync(path.join(out, "manifest.tsv"), "utf-8");
    expect(manifest).not.toContain("r1");
    const sidecar = JSON.parse(
      fs.readFileSync(path.join(out, "extraction.json"), "utf-8"),
    );
    expect(sidecar.records_failed).toBe(1);
  });
});
