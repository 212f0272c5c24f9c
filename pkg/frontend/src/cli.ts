#!/usr/bin/env node
// Command-line entry: extract --model <id> --input <records file>
// --out <dir> [--template <file>] [--max-len N] [--local-root <dir>].
// Exit codes: 0 all records written, 1 some records failed, 2 bad
// usage, 3 input or checkpoint unreadable.

import * as fs from "node:fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { runExtract } from "./extract.js";
import { parseRecords, RecordError } from "./records.js";
import { DEFAULT_TEMPLATE } from "./template.js";
import { BackboneError } from "./backbone.js";

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .scriptName("extract")
    .usage("$0 --model <id> --input <records.jsonl> --out <dir>")
    .option("model", { type: "string", demandOption: true, describe: "checkpoint id" })
    .option("input", { type: "string", demandOption: true, describe: "JSONL records file" })
    .option("out", { type: "string", demandOption: true, describe: "output directory" })
    .option("template", { type: "string", describe: "pair template file" })
    .option("max-len", { type: "number", describe: "token-length cap" })
    .option("local-root", { type: "string", describe: "offline checkpoint directory" })
    .strict()
    .fail((msg) => {
      console.error(msg);
      process.exit(2);
    })
    .parse();

  if (argv.maxLen !== undefined && (!Number.isInteger(argv.maxLen) || argv.maxLen < 1)) {
    console.error(`--max-len must be a positive integer, got ${argv.maxLen}`);
    return 2;
  }

  let template = DEFAULT_TEMPLATE;
  if (argv.template !== undefined) {
    try {
      template = fs.readFileSync(argv.template, "utf-8");
    } catch (err) {
      console.error(`cannot read template ${argv.template}: ${(err as Error).message}`);
      return 3;
    }
    // a trailing newline is an editor artifact, not part of the prompt
    template = template.replace(/\n$/, "");
  }

  let recordsText: string;
  try {
    recordsText = fs.readFileSync(argv.input, "utf-8");
  } catch (err) {
    console.error(`cannot read ${argv.input}: ${(err as Error).message}`);
    return 3;
  }
  let records;
  try {
    records = parseRecords(recordsText);
  } catch (err) {
    if (err instanceof RecordError) {
      console.error(`${argv.input}: ${err.message}`);
      return 3;
    }
    throw err;
  }

  let report;
  try {
    report = await runExtract({
      modelId: argv.model,
      records,
      template,
      maxLen: argv.maxLen,
      outDir: argv.out,
      localRoot: argv.localRoot,
    });
  } catch (err) {
    if (err instanceof BackboneError) {
      console.error(err.message);
      return 3;
    }
    throw err;
  }

  console.error(
    `wrote ${report.written}/${records.length} state files (hidden size ${report.hiddenSize})`,
  );
  return report.failures.length === 0 ? 0 : 1;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(err instanceof Error ? err.stack ?? err.message : String(err));
    process.exit(1);
  },
);
