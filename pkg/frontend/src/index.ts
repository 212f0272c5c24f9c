export { Backbone, BackboneError } from "./backbone.js";
export { runExtract } from "./extract.js";
export type { ExtractJob, ExtractReport, RecordFailure } from "./extract.js";
export { encodeHsf, readHsf, writeHsf, HsfFormatError } from "./hsf.js";
export { formatManifest, ManifestError } from "./manifest.js";
export type { ManifestRow } from "./manifest.js";
export { parseRecords, RecordError, SPLITS } from "./records.js";
export type { InputRecord, Split } from "./records.js";
export { buildInput, placeholders, DEFAULT_TEMPLATE, TemplateError } from "./template.js";
