/** File-based inference honoring the external-denoiser contract:
 *
 *     node dist/serve.js --checkpoint ck.json --in noisy.csv --out denoised.csv [--stage full|s]
 *
 * `--stage full` (default) emits the stage-2 Raman estimate; `--stage s`
 * emits the stage-1 denoised signal (baseline still present).  Inference is
 * deterministic: no randomness is consumed, and identical inputs plus an
 * identical checkpoint reproduce the output byte for byte.  Exit codes
 * follow the toolkit convention: 0 success, 1 validation error, 2 I/O
 * error.
 */

import * as tf from "@tensorflow/tfjs";
import { readFileSync } from "node:fs";
import { modpolyBaseline } from "./baseline.js";
import { readBatch, writeBatch } from "./csv.js";
import { normalizeSpectrum } from "./data.js";
import { CascadeModel } from "./model.js";

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`bad argument ${argv[i]}`);
    }
    out.set(argv[i].slice(2), argv[i + 1]);
  }
  return out;
}

export async function main(argv: string[]): Promise<number> {
  let args: Map<string, string>;
  try {
    args = parseArgs(argv);
  } catch (e: any) {
    console.error(`error: ${e.message}`);
    return 1;
  }
  const ckPath = args.get("checkpoint");
  const inPath = args.get("in");
  const outPath = args.get("out");
  const stage = args.get("stage") ?? "full";
  if (!ckPath || !inPath || !outPath || !["full", "s"].includes(stage)) {
    console.error("usage: serve --checkpoint <ck.json> --in <batch.csv> --out <batch.csv> [--stage full|s]");
    return 1;
  }

  await tf.setBackend("cpu");
  try {
    const model = CascadeModel.fromJSON(JSON.parse(readFileSync(ckPath, "utf-8")));
    const batch = readBatch(inPath);
    const n = batch.spectra.length;
    const length = batch.wavenumbers.length;
    if (length !== model.cfg.spectrumLength) {
      console.error(
        `error: ${inPath}: spectra have ${length} points, checkpoint expects ${model.cfg.spectrumLength}`,
      );
      return 1;
    }

    const norms = batch.spectra.map((s) => normalizeSpectrum(s));
    const flat = new Float32Array(n * length);
    norms.forEach((x, i) => flat.set(x.normalized, i * length));
    const noisy = tf.tensor2d(flat, [n, length]);

    const { sDenoised } = model.stage1Forward(noisy);
    const sDen = sDenoised.dataSync();

    let outRows: Float64Array[];
    if (stage === "s") {
      outRows = norms.map((x, i) => {
        const row = new Float64Array(length);
        for (let k = 0; k < length; k++) {
          row[k] = sDen[i * length + k] * x.norm.span + x.norm.lo;
        }
        return row;
      });
    } else {
      const baseFlat = new Float32Array(n * length);
      for (let i = 0; i < n; i++) {
        const sRow = new Float64Array(length);
        for (let k = 0; k < length; k++) sRow[k] = sDen[i * length + k];
        baseFlat.set(modpolyBaseline(sRow).baseline, i * length);
      }
      const sDenT = tf.tensor2d(Float32Array.from(sDen), [n, length]);
      const baseT = tf.tensor2d(baseFlat, [n, length]);
      const raman = model.stage2Forward(sDenT, baseT).dataSync();
      outRows = norms.map((x, i) => {
        const row = new Float64Array(length);
        for (let k = 0; k < length; k++) row[k] = raman[i * length + k] * x.norm.span;
        return row;
      });
    }
    writeBatch(outPath, { wavenumbers: batch.wavenumbers, spectra: outRows });
    return 0;
  } catch (e: any) {
    if (e?.code === "ENOENT") {
      console.error(`error: ${e.message}`);
      return 2;
    }
    console.error(`error: ${e.message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("serve.js")) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
