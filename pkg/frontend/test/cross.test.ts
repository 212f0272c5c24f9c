// Cross-component contract: the training side's own tooling must accept
// what this extractor emits. Requires the `relish` console script on
// PATH (editable install of the sibling package); skipped otherwise.

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { spawnSync } from "node:child_process";
import { fileURLToPath } from "node:url";

import { afterAll, describe, expect, it } from "vitest";

import { runExtract } from "../src/extract.js";
import { parseRecords } from "../src/records.js";

const ROOT = path.dirname(path.dirname(fileURLToPath(import.meta.url)));
const FIXTURES = path.join(ROOT, "fixtures");
const EXPECTED = path.join(FIXTURES, "expected");

function relishAvailable(): boolean {
  const probe = spawnSync("relish", ["--help"], { encoding: "utf-8" });
  return probe.status === 0;
}

const available = relishAvailable();
if (!available) {
  console.error("relish not on PATH; skipping cross-component checks");
}

const tempDirs: string[] = [];

afterAll(() => {
  for (const dir of tempDirs) {
    fs.rmSync(dir, { recursive: true, force: true });
  }
});

describe.skipIf(!available)("emitted output consumed by the training side", () => {
  it("passes validate-hsf and trains end to end", { timeout: 300_000 }, async () => {
    const out = fs.mkdtempSync(path.join(os.tmpdir(), "cross-"));
    tempDirs.push(out);
    const records = parseRecords(
      fs.readFileSync(path.join(EXPECTED, "records.jsonl"), "utf-8"),
    );
    const template = fs
      .readFileSync(path.join(EXPECTED, "template.txt"), "utf-8")
      .replace(/\n$/, "");
    const report = await runExtract(
      { modelId: "tiny-distilbert", records, template, outDir: out, localRoot: FIXTURES },
      () => {},
    );
    expect(report.failures).toEqual([]);

    const manifest = path.join(out, "manifest.tsv");
    const validate = spawnSync("relish", ["validate-hsf", "--manifest", manifest], {
      encoding: "utf-8",
    });
    expect(validate.stderr).toBe("");
    expect(validate.status).toBe(0);
    expect(validate.stdout).toContain(`validated ${records.length} files`);

    const runConfig = {
      method: "relish",
      manifest: "manifest.tsv",
      gold_range: [0.0, 5.0],
      seeds: [42],
      out_dir: "run",
      train: { lr: 1e-3, effective_batch: 2, max_epochs: 3, patience: 3 },
      head: { head_dim: 16, num_heads: 4, num_blocks: 1, dropout: 0.0 },
    };
    fs.writeFileSync(path.join(out, "run.json"), JSON.stringify(runConfig, null, 2));
    const train = spawnSync("relish", ["train", path.join(out, "run.json")], {
      encoding: "utf-8",
    });
    expect(train.stderr).toBe("");
    expect(train.status).toBe(0);
    expect(fs.existsSync(path.join(out, "run", "seed42.rck1"))).toBe(true);
    expect(fs.existsSync(path.join(out, "run", "records.json"))).toBe(true);
    expect(fs.existsSync(path.join(out, "run", "metrics.txt"))).toBe(true);
  });
});
