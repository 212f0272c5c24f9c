// Manifest rows: id, state-file path, target, split, tab-separated, one
// per line, paths relative to the manifest's own directory. This is the
// hand-off surface to the training side, so formatting is deliberately
// rigid: no header, no quoting, fields rejected outright if they would
// break the column structure.

export interface ManifestRow {
  id: string;
  path: string;
  target: number;
  split: string;
}

export class ManifestError extends Error {}

export function formatManifest(rows: ManifestRow[]): string {
  const lines = rows.map((row) => {
    for (const field of [row.id, row.path, row.split]) {
      if (field.includes("\t") || field.includes("\n")) {
        throw new ManifestError(`field ${JSON.stringify(field)} contains a tab or newline`);
      }
    }
    if (!Number.isFinite(row.target)) {
      throw new ManifestError(`target for ${row.id} is not finite`);
    }
    // String(4.5) -> "4.5", String(2) -> "2"; both are plain decimal
    // forms the loader's float parser accepts.
    return `${row.id}\t${row.path}\t${String(row.target)}\t${row.split}`;
  });
  return lines.join("\n") + "\n";
}
