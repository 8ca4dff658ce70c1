/** Batch-CSV interchange with the spectrum toolkit.
 *
 * Format: header `wavenumber,spec_0,...`, one row per grid point, values as
 * shortest-round-trip decimal strings (exact float64 rebuild on both ends).
 */

import { readFileSync, writeFileSync } from "node:fs";

export interface Batch {
  wavenumbers: Float64Array;
  /** spectra[i] is one spectrum over the full grid */
  spectra: Float64Array[];
}

export function readBatch(path: string): Batch {
  const text = readFileSync(path, "utf-8");
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  if (lines.length < 2) throw new Error(`${path}: empty batch file`);
  const header = lines[0].split(",");
  if (header[0] !== "wavenumber" || header.length < 2) {
    throw new Error(`${path}: expected header 'wavenumber,spec_0,...'`);
  }
  const nSpec = header.length - 1;
  const nPoints = lines.length - 1;
  const wavenumbers = new Float64Array(nPoints);
  const spectra = Array.from({ length: nSpec }, () => new Float64Array(nPoints));
  for (let r = 0; r < nPoints; r++) {
    const parts = lines[r + 1].split(",");
    if (parts.length !== nSpec + 1) {
      throw new Error(`${path}: line ${r + 2}: expected ${nSpec + 1} columns, got ${parts.length}`);
    }
    for (let c = 0; c < parts.length; c++) {
      const v = Number(parts[c]);
      if (!Number.isFinite(v)) throw new Error(`${path}: line ${r + 2}: bad value ${parts[c]}`);
      if (c === 0) wavenumbers[r] = v;
      else spectra[c - 1][r] = v;
    }
  }
  return { wavenumbers, spectra };
}

export function writeBatch(path: string, batch: Batch): void {
  const { wavenumbers, spectra } = batch;
  const rows: string[] = [];
  rows.push("wavenumber," + spectra.map((_, j) => `spec_${j}`).join(","));
  for (let r = 0; r < wavenumbers.length; r++) {
    const cells = [String(wavenumbers[r])];
    for (const s of spectra) cells.push(String(s[r]));
    rows.push(cells.join(","));
  }
  writeFileSync(path, rows.join("\n") + "\n", "utf-8");
}
