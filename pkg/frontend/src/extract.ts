// End-to-end extraction: format each record through the pair template,
// run the frozen backbone, write one HSF per record, then a manifest
// plus a sidecar describing how the states were produced. A bad record
// is logged and skipped so one malformed row cannot sink a long batch.

import * as fs from "node:fs";
import * as path from "node:path";

import { Backbone } from "./backbone.js";
import { writeHsf } from "./hsf.js";
import { formatManifest, ManifestRow } from "./manifest.js";
import { InputRecord } from "./records.js";
import { buildInput } from "./template.js";

export interface ExtractJob {
  modelId: string;
  records: InputRecord[];
  template: string;
  maxLen?: number;
  outDir: string;
  localRoot?: string;
}

export interface RecordFailure {
  id: string;
  error: string;
}

export interface ExtractReport {
  written: number;
  hiddenSize: number;
  failures: RecordFailure[];
}

export async function runExtract(
  job: ExtractJob,
  log: (line: string) => void = console.error,
): Promise<ExtractReport> {
  const backbone = await Backbone.load(job.modelId, { localRoot: job.localRoot });
  const statesDir = path.join(job.outDir, "states");
  fs.mkdirSync(statesDir, { recursive: true });

  const rows: ManifestRow[] = [];
  const failures: RecordFailure[] = [];
  for (const record of job.records) {
    try {
      const text = buildInput(
        { text_a: record.text_a, text_b: record.text_b },
        job.template,
      );
      const embedding = await backbone.embed(text, job.maxLen);
      const relPath = path.join("states", `${record.id}.hsf`);
      writeHsf(
        path.join(job.outDir, relPath),
        embedding.tokens,
        embedding.hiddenSize,
        embedding.data,
      );
      rows.push({ id: record.id, path: relPath, target: record.target, split: record.split });
      log(`${record.id}: ${embedding.tokens} tokens x ${embedding.hiddenSize}`);
    } catch (err) {
      const message = (err as Error).message;
      failures.push({ id: record.id, error: message });
      log(`${record.id}: FAILED: ${message}`);
    }
  }

  if (rows.length > 0) {
    fs.writeFileSync(path.join(job.outDir, "manifest.tsv"), formatManifest(rows));
  }
  const sidecar = {
    model: job.modelId,
    hidden_size: backbone.hiddenSize,
    state_convention: "final layer output (the states feeding the output head)",
    max_len: job.maxLen ?? null,
    template: job.template,
    records_total: job.records.length,
    records_written: rows.length,
    records_failed: failures.length,
  };
  fs.writeFileSync(
    path.join(job.outDir, "extraction.json"),
    JSON.stringify(sidecar, null, 2) + "\n",
  );
  return { written: rows.length, hiddenSize: backbone.hiddenSize, failures };
}
