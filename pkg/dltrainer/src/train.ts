/** Three-phase training of the cascade.
 *
 * Phase schedule (paper defaults): alpha=1 with stage 2 frozen, then
 * alpha=0 with stage 1 frozen, then alpha=0.5 jointly.  Each phase gets a
 * fresh Adam optimizer over only its trainable variables, so frozen
 * parameters stay bit-identical.  Validation losses are logged every epoch
 * with a fixed 0.5/0.5 weighting (comparable across phases) and the best
 * checkpoint is kept.
 */

import * as tf from "@tensorflow/tfjs";
import { writeFileSync, renameSync } from "node:fs";
import { CascadeConfig, PhaseSpec, defaultConfig, validateConfig } from "./config.js";
import { PreparedSet, loadSplit, mulberry32, shuffled } from "./data.js";
import { CascadeModel } from "./model.js";

export interface EpochLog {
  phase: number;
  epoch: number;
  alpha: number;
  trainSDenoise: number;
  trainRaman: number;
  valSDenoise: number;
  valRaman: number;
  valTotal: number;
}

export interface TrainResult {
  logs: EpochLog[];
  /** fixed-weight validation loss before any training */
  initialValTotal: number;
  bestValTotal: number;
  bestCheckpoint: object;
}

function toTensor(rows: Float64Array[], idx: number[]): tf.Tensor2D {
  const length = rows[0].length;
  const flat = new Float32Array(idx.length * length);
  idx.forEach((r, i) => flat.set(rows[r], i * length));
  return tf.tensor2d(flat, [idx.length, length]);
}

function mse(a: tf.Tensor, b: tf.Tensor): tf.Scalar {
  return tf.mean(tf.square(tf.sub(a, b))) as tf.Scalar;
}

export function evaluate(model: CascadeModel, data: PreparedSet, batchSize = 64): { sDenoise: number; raman: number } {
  let accS = 0;
  let accR = 0;
  const n = data.noisy.length;
  for (let start = 0; start < n; start += batchSize) {
    const idx = Array.from({ length: Math.min(batchSize, n - start) }, (_, i) => start + i);
    const vals = tf.tidy(() => {
      const noisy = toTensor(data.noisy, idx);
      const baseline = toTensor(data.baseline, idx);
      const t1 = toTensor(data.target1, idx);
      const t2 = toTensor(data.target2, idx);
      const out = model.forward(noisy, baseline);
      return [mse(out.sDenoised, t1).dataSync()[0], mse(out.raman, t2).dataSync()[0]];
    });
    accS += vals[0] * idx.length;
    accR += vals[1] * idx.length;
  }
  return { sDenoise: accS / n, raman: accR / n };
}

function trainableVars(model: CascadeModel, freeze: PhaseSpec["freeze"]): tf.Variable[] {
  if (freeze === "stage1") return model.stageVars("s2");
  if (freeze === "stage2") return model.stageVars("s1");
  return [...model.stageVars("s1"), ...model.stageVars("s2")];
}

export function trainCascade(
  model: CascadeModel,
  train: PreparedSet,
  val: PreparedSet,
  cfg: CascadeConfig = model.cfg,
  onEpoch?: (log: EpochLog) => void,
): TrainResult {
  validateConfig(cfg);
  const logs: EpochLog[] = [];
  const init = evaluate(model, val);
  const initialValTotal = 0.5 * init.sDenoise + 0.5 * init.raman;
  let bestValTotal = initialValTotal;
  let bestCheckpoint = model.toJSON();

  const rand = mulberry32(cfg.seed);
  const n = train.noisy.length;

  cfg.schedule.forEach((phase, phaseIdx) => {
    const vars = trainableVars(model, phase.freeze);
    const optimizer = tf.train.adam(cfg.learningRate);
    for (let epoch = 0; epoch < phase.epochs; epoch++) {
      const order = shuffled(n, rand);
      let accS = 0;
      let accR = 0;
      for (let start = 0; start < n; start += cfg.batchSize) {
        const idx = order.slice(start, start + cfg.batchSize);
        const losses = tf.tidy(() => {
          const noisy = toTensor(train.noisy, idx);
          const baseline = toTensor(train.baseline, idx);
          const t1 = toTensor(train.target1, idx);
          const t2 = toTensor(train.target2, idx);
          let lS = 0;
          let lR = 0;
          const { grads, value } = tf.variableGrads(() => {
            const out = model.forward(noisy, baseline);
            const lossS = mse(out.sDenoised, t1);
            const lossR = mse(out.raman, t2);
            lS = lossS.dataSync()[0];
            lR = lossR.dataSync()[0];
            return tf.add(
              tf.mul(lossS, phase.alpha), tf.mul(lossR, 1 - phase.alpha),
            ) as tf.Scalar;
          }, vars);
          if (!Number.isFinite(value.dataSync()[0])) {
            throw new Error(
              `training diverged: non-finite loss in phase ${phaseIdx}, epoch ${epoch}`,
            );
          }
          optimizer.applyGradients(grads as unknown as Parameters<typeof optimizer.applyGradients>[0]);
          return [lS, lR];
        });
        accS += losses[0] * idx.length;
        accR += losses[1] * idx.length;
      }
      const v = evaluate(model, val);
      const log: EpochLog = {
        phase: phaseIdx,
        epoch,
        alpha: phase.alpha,
        trainSDenoise: accS / n,
        trainRaman: accR / n,
        valSDenoise: v.sDenoise,
        valRaman: v.raman,
        valTotal: 0.5 * v.sDenoise + 0.5 * v.raman,
      };
      logs.push(log);
      onEpoch?.(log);
      if (log.valTotal < bestValTotal) {
        bestValTotal = log.valTotal;
        bestCheckpoint = model.toJSON();
      }
    }
    optimizer.dispose();
  });

  return { logs, initialValTotal, bestValTotal, bestCheckpoint };
}

export function saveCheckpoint(path: string, checkpoint: object): void {
  const tmp = path + ".tmp";
  writeFileSync(tmp, JSON.stringify(checkpoint), "utf-8");
  renameSync(tmp, path);
}

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
  const manifestDir = args.get("manifest");
  const outPath = args.get("out");
  if (!manifestDir || !outPath) {
    console.error("usage: train --manifest <dataset-dir> --out <checkpoint.json> " +
      "[--width N] [--lr F] [--batch N] [--epochs a,b,c] [--seed N] [--val-split name]");
    return 1;
  }
  await tf.setBackend("cpu");
  const cfg = defaultConfig();
  if (args.has("width")) cfg.width = Number(args.get("width"));
  if (args.has("lr")) cfg.learningRate = Number(args.get("lr"));
  if (args.has("batch")) cfg.batchSize = Number(args.get("batch"));
  if (args.has("seed")) cfg.seed = Number(args.get("seed"));
  if (args.has("epochs")) {
    const counts = args.get("epochs")!.split(",").map(Number);
    if (counts.length !== cfg.schedule.length || counts.some((c) => !Number.isInteger(c) || c < 0)) {
      console.error(`error: --epochs needs ${cfg.schedule.length} comma-separated counts`);
      return 1;
    }
    counts.forEach((c, i) => (cfg.schedule[i].epochs = c));
  }

  try {
    const train = loadSplit(manifestDir, args.get("train-split") ?? "train");
    const val = loadSplit(manifestDir, args.get("val-split") ?? "val");
    cfg.spectrumLength = train.length;
    const model = new CascadeModel(cfg);
    const result = trainCascade(model, train, val, cfg, (log) => {
      console.log(
        `phase ${log.phase} epoch ${log.epoch}: ` +
        `train S=${log.trainSDenoise.toExponential(3)} R=${log.trainRaman.toExponential(3)} | ` +
        `val S=${log.valSDenoise.toExponential(3)} R=${log.valRaman.toExponential(3)} ` +
        `total=${log.valTotal.toExponential(3)}`,
      );
    });
    saveCheckpoint(outPath, result.bestCheckpoint);
    const gain = 100 * (1 - result.bestValTotal / result.initialValTotal);
    console.log(
      `best validation total ${result.bestValTotal.toExponential(3)} ` +
      `(${gain.toFixed(1)}% below the untrained ${result.initialValTotal.toExponential(3)}) -> ${outPath}`,
    );
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

if (process.argv[1] && process.argv[1].endsWith("train.js")) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
