/** Dataset loading for training and serving.
 *
 * Consumes the generator toolkit's dataset directories: a JSON manifest
 * plus per-split batch CSVs (noisy / clean-with-baseline / pure Raman).
 * Every spectrum is normalized by its own noisy range before entering the
 * network; stage-1 targets use the same affine map, stage-2 targets use the
 * scale only (the pure Raman signal carries no pedestal).  The polynomial
 * baseline fed to stage 2 during training is computed once per example
 * from the normalized noisy input (identical to the untrained stage-1
 * output) and cached.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { modpolyBaseline } from "./baseline.js";
import { readBatch } from "./csv.js";

export interface NormInfo {
  lo: number;
  span: number;
}

export interface PreparedSet {
  /** per-spectrum arrays, all of the grid length */
  noisy: Float64Array[];
  baseline: Float64Array[];
  target1: Float64Array[];
  target2: Float64Array[];
  norms: NormInfo[];
  snr: number[];
  length: number;
}

export function normalizeSpectrum(values: Float64Array): { normalized: Float64Array; norm: NormInfo } {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const span = hi - lo > 0 ? hi - lo : 1.0;
  const normalized = new Float64Array(values.length);
  for (let i = 0; i < values.length; i++) normalized[i] = (values[i] - lo) / span;
  return { normalized, norm: { lo, span } };
}

export function readManifest(dir: string): any {
  const manifest = JSON.parse(readFileSync(join(dir, "manifest.json"), "utf-8"));
  if (manifest?.kind !== "dataset_manifest") throw new Error(`${dir}: not a dataset manifest`);
  return manifest;
}

export function loadSplit(dir: string, split: string): PreparedSet {
  const manifest = readManifest(dir);
  const info = manifest.splits?.[split];
  if (!info) throw new Error(`${dir}: manifest has no split '${split}'`);
  const noisyBatch = readBatch(join(dir, info.files.noisy));
  const cleanBatch = readBatch(join(dir, info.files.clean));
  const pureBatch = readBatch(join(dir, info.files.pure));
  const n = noisyBatch.spectra.length;
  if (cleanBatch.spectra.length !== n || pureBatch.spectra.length !== n) {
    throw new Error(`${dir}: split '${split}' batch files disagree on spectrum count`);
  }
  const length = noisyBatch.wavenumbers.length;

  const out: PreparedSet = {
    noisy: [], baseline: [], target1: [], target2: [],
    norms: [], snr: [], length,
  };
  for (let i = 0; i < n; i++) {
    const { normalized, norm } = normalizeSpectrum(noisyBatch.spectra[i]);
    const t1 = new Float64Array(length);
    const t2 = new Float64Array(length);
    for (let k = 0; k < length; k++) {
      t1[k] = (cleanBatch.spectra[i][k] - norm.lo) / norm.span;
      t2[k] = pureBatch.spectra[i][k] / norm.span;
    }
    out.noisy.push(normalized);
    out.baseline.push(modpolyBaseline(normalized).baseline);
    out.target1.push(t1);
    out.target2.push(t2);
    out.norms.push(norm);
    out.snr.push(Number(info.examples[i]?.snr ?? NaN));
  }
  return out;
}

/** deterministic shuffling for batch order */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function shuffled(n: number, rand: () => number): number[] {
  const idx = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [idx[i], idx[j]] = [idx[j], idx[i]];
  }
  return idx;
}
