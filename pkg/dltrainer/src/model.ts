/** The cascaded dual-stage denoiser.
 *
 * Stage 1 works in the frequency domain: it receives the DCT of the
 * (per-spectrum normalized) noisy input and predicts the DCT of the
 * stochastic noise; the denoised signal is exactly
 * `noisy - IDCT(predicted_noise_DCT)`, so a zero-initialized output head
 * makes the untrained stage an identity.  Stage 2 receives the denoised
 * signal concatenated with its fitted polynomial baseline and outputs the
 * baseline-free Raman estimate.  Stage 2 sees stage 1's output through a
 * gradient stop, so each loss term trains its own stage exclusively.
 *
 * Each stage is an attention-gated U-Net over non-overlapping patches:
 * 693 = 3 * 3 * 7, so three patchify levels (231, 77, 11 positions) need
 * nothing but reshapes and matrix products.  That keeps the whole graph on
 * kernels with fast CPU gradients; overlapping convolutions, slicing and
 * gathering are one to two orders of magnitude slower on the pure-JS
 * backend and make desk-scale training impractical.
 */

import * as tf from "@tensorflow/tfjs";
import { dctMatrix } from "./dct.js";
import { CascadeConfig, defaultConfig } from "./config.js";

export interface CascadeOutputs {
  /** [batch, length] denoised signal in normalized units */
  sDenoised: tf.Tensor2D;
  /** [batch, length] Raman estimate in normalized units */
  raman: tf.Tensor2D;
  /** [batch, length] predicted noise spectrum in DCT space */
  noiseDct: tf.Tensor2D;
}

/** patch sizes per level; their product must divide the spectrum length */
export const PATCHES = [3, 3, 7] as const;

interface DenseSpec {
  name: string;
  inDim: number;
  outDim: number;
  zeroInit?: boolean;
}

function stageSpecs(prefix: string, inCh: number, w: number, aw: number): DenseSpec[] {
  const [p1, p2, p3] = PATCHES;
  return [
    // encoder: patchify convolutions (kernel = stride = patch)
    { name: `${prefix}/e1`, inDim: p1 * inCh, outDim: w },
    { name: `${prefix}/e2`, inDim: p2 * w, outDim: 2 * w },
    { name: `${prefix}/e3`, inDim: p3 * 2 * w, outDim: 4 * w },
    { name: `${prefix}/mid`, inDim: 4 * w, outDim: 4 * w },
    // decoder: widen-and-reshape transposed patches, additive gated skips
    { name: `${prefix}/u3`, inDim: 4 * w, outDim: p3 * 2 * w },
    { name: `${prefix}/a3x`, inDim: 2 * w, outDim: aw },
    { name: `${prefix}/a3g`, inDim: 2 * w, outDim: aw },
    { name: `${prefix}/a3p`, inDim: aw, outDim: 1 },
    { name: `${prefix}/m3`, inDim: 2 * w, outDim: 2 * w },
    { name: `${prefix}/u2`, inDim: 2 * w, outDim: p2 * w },
    { name: `${prefix}/a2x`, inDim: w, outDim: aw },
    { name: `${prefix}/a2g`, inDim: w, outDim: aw },
    { name: `${prefix}/a2p`, inDim: aw, outDim: 1 },
    { name: `${prefix}/m2`, inDim: w, outDim: w },
    { name: `${prefix}/u1`, inDim: w, outDim: p1 * w },
    { name: `${prefix}/m1`, inDim: w, outDim: w },
    { name: `${prefix}/head`, inDim: w, outDim: 1, zeroInit: true },
  ];
}

/** deterministic backend-independent N(0, std) initializer */
function seededNormal(shape: number[], std: number, seed: number): tf.Tensor {
  let state = (seed >>> 0) || 1;
  const rand = () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  const n = shape.reduce((a, b) => a * b, 1);
  const values = new Float32Array(n);
  for (let i = 0; i < n; i += 2) {
    const u1 = Math.max(rand(), 1e-12);
    const u2 = rand();
    const r = Math.sqrt(-2 * Math.log(u1));
    values[i] = r * Math.cos(2 * Math.PI * u2) * std;
    if (i + 1 < n) values[i + 1] = r * Math.sin(2 * Math.PI * u2) * std;
  }
  return tf.tensor(values, shape, "float32");
}

export class CascadeModel {
  private static instances = 0;
  readonly cfg: CascadeConfig;
  readonly vars = new Map<string, tf.Variable>();
  /** tf registers variable names globally, so each instance gets its own prefix */
  readonly namespace: string;
  private readonly dctMat: tf.Tensor2D; // rows are frequencies

  constructor(cfg: CascadeConfig = defaultConfig()) {
    this.cfg = cfg;
    this.namespace = `cascade${CascadeModel.instances++}`;
    const stride = PATCHES.reduce((a, b) => a * b, 1);
    if (cfg.spectrumLength % stride !== 0) {
      throw new Error(`spectrum length ${cfg.spectrumLength} not divisible by ${stride}`);
    }
    const m = dctMatrix(cfg.spectrumLength);
    this.dctMat = tf.tensor2d(
      Float32Array.from(m), [cfg.spectrumLength, cfg.spectrumLength], "float32",
    );
    let seedCounter = cfg.seed;
    const make = (spec: DenseSpec) => {
      const kernel = spec.zeroInit
        ? tf.zeros([spec.inDim, spec.outDim])
        : seededNormal([spec.inDim, spec.outDim], Math.sqrt(2 / spec.inDim), seedCounter++);
      this.vars.set(
        `${spec.name}/w`,
        tf.variable(kernel, true, `${this.namespace}/${spec.name}/w`),
      );
      this.vars.set(
        `${spec.name}/b`,
        tf.variable(tf.zeros([spec.outDim]), true, `${this.namespace}/${spec.name}/b`),
      );
    };
    for (const spec of stageSpecs("s1", 1, cfg.width, cfg.attnWidth)) make(spec);
    for (const spec of stageSpecs("s2", 2, cfg.width, cfg.attnWidth)) make(spec);
  }

  stageVars(stage: "s1" | "s2"): tf.Variable[] {
    return [...this.vars.entries()]
      .filter(([name]) => name.startsWith(stage + "/"))
      .map(([, v]) => v);
  }

  /** dense map over the channel axis: [B, L, Cin] -> [B, L, Cout] */
  private dense(x: tf.Tensor3D, name: string): tf.Tensor3D {
    const w = this.vars.get(`${name}/w`)! as unknown as tf.Tensor2D;
    const b = this.vars.get(`${name}/b`)!;
    const [batch, length, inCh] = x.shape;
    const flat = x.reshape([batch * length, inCh]) as tf.Tensor2D;
    const out = tf.matMul(flat, w);
    return tf.add(out, b).reshape([batch, length, w.shape[1]]) as tf.Tensor3D;
  }

  /** fold `patch` adjacent positions into channels: [B, L, C] -> [B, L/p, p*C] */
  private static patchify(x: tf.Tensor3D, patch: number): tf.Tensor3D {
    const [batch, length, ch] = x.shape;
    return x.reshape([batch, length / patch, patch * ch]) as tf.Tensor3D;
  }

  /** inverse of patchify: [B, L, p*C] -> [B, L*p, C] */
  private static unpatchify(x: tf.Tensor3D, patch: number): tf.Tensor3D {
    const [batch, length, ch] = x.shape;
    return x.reshape([batch, length * patch, ch / patch]) as tf.Tensor3D;
  }

  private attnGate(skip: tf.Tensor3D, gate: tf.Tensor3D, name: string): tf.Tensor3D {
    const theta = this.dense(skip, `${name}x`);
    const phi = this.dense(gate, `${name}g`);
    const psi = tf.sigmoid(this.dense(tf.relu(tf.add(theta, phi)) as tf.Tensor3D, `${name}p`));
    return tf.mul(skip, psi) as tf.Tensor3D;
  }

  /** one attention U-Net; x is [batch, length, channels], output [batch, length, 1] */
  stageForward(prefix: "s1" | "s2", x: tf.Tensor3D): tf.Tensor3D {
    const [p1, p2, p3] = PATCHES;
    const P = CascadeModel;
    const e1 = tf.relu(this.dense(P.patchify(x, p1), `${prefix}/e1`)) as tf.Tensor3D;   // [B, 231, w]
    const e2 = tf.relu(this.dense(P.patchify(e1, p2), `${prefix}/e2`)) as tf.Tensor3D;  // [B, 77, 2w]
    const e3 = tf.relu(this.dense(P.patchify(e2, p3), `${prefix}/e3`)) as tf.Tensor3D;  // [B, 11, 4w]
    const mid = tf.relu(this.dense(e3, `${prefix}/mid`)) as tf.Tensor3D;

    const u3 = P.unpatchify(this.dense(mid, `${prefix}/u3`), p3) as tf.Tensor3D;        // [B, 77, 2w]
    const g3 = this.attnGate(e2, u3, `${prefix}/a3`);
    const d3 = tf.relu(this.dense(tf.add(u3, g3) as tf.Tensor3D, `${prefix}/m3`)) as tf.Tensor3D;

    const u2 = P.unpatchify(this.dense(d3, `${prefix}/u2`), p2) as tf.Tensor3D;         // [B, 231, w]
    const g2 = this.attnGate(e1, u2, `${prefix}/a2`);
    const d2 = tf.relu(this.dense(tf.add(u2, g2) as tf.Tensor3D, `${prefix}/m2`)) as tf.Tensor3D;

    const u1 = P.unpatchify(this.dense(d2, `${prefix}/u1`), p1) as tf.Tensor3D;         // [B, 693, w]
    const d1 = tf.relu(this.dense(u1, `${prefix}/m1`)) as tf.Tensor3D;
    return this.dense(d1, `${prefix}/head`);
  }

  /** forward DCT of row-vector spectra: X = x . C^T */
  dctRows(x: tf.Tensor2D): tf.Tensor2D {
    return tf.matMul(x, this.dctMat, false, true) as tf.Tensor2D;
  }

  /** inverse DCT of row-vector coefficients: x = X . C */
  idctRows(coeffs: tf.Tensor2D): tf.Tensor2D {
    return tf.matMul(coeffs, this.dctMat) as tf.Tensor2D;
  }

  /** stage 1 only: predicted noise DCT and the residual-form denoised signal */
  stage1Forward(noisy: tf.Tensor2D): { sDenoised: tf.Tensor2D; noiseDct: tf.Tensor2D } {
    const coeffs = this.dctRows(noisy);
    const noiseDct = this.stageForward("s1", coeffs.expandDims(2) as tf.Tensor3D)
      .squeeze([2]) as tf.Tensor2D;
    const sDenoised = residualCombine(noisy, noiseDct, this);
    return { sDenoised, noiseDct };
  }

  /** stage 2 only: two channels (denoised signal, fitted baseline) in, Raman out */
  stage2Forward(sDenoised: tf.Tensor2D, baseline: tf.Tensor2D): tf.Tensor2D {
    const stacked = tf.stack([sDenoised, baseline], 2) as tf.Tensor3D;
    return this.stageForward("s2", stacked).squeeze([2]) as tf.Tensor2D;
  }

  /** full cascade; the stage-2 input is detached so each loss term reaches
   * only its own stage's parameters */
  forward(noisy: tf.Tensor2D, baseline: tf.Tensor2D, detach = true): CascadeOutputs {
    const { sDenoised, noiseDct } = this.stage1Forward(noisy);
    const s2in = detach
      ? (tf.tensor(sDenoised.dataSync(), sDenoised.shape) as tf.Tensor2D)
      : sDenoised;
    const raman = this.stage2Forward(s2in, baseline);
    return { sDenoised, raman, noiseDct };
  }

  toJSON(): object {
    const weights = [...this.vars.entries()].map(([name, v]) => ({
      name,
      shape: v.shape,
      values: Array.from(v.dataSync()),
    }));
    return { kind: "cascade-checkpoint", config: this.cfg, weights };
  }

  static fromJSON(doc: any): CascadeModel {
    if (doc?.kind !== "cascade-checkpoint") throw new Error("not a cascade checkpoint");
    const model = new CascadeModel(doc.config as CascadeConfig);
    for (const w of doc.weights) {
      const variable = model.vars.get(w.name);
      if (!variable) throw new Error(`unknown weight ${w.name} in checkpoint`);
      variable.assign(tf.tensor(w.values, w.shape, "float32"));
    }
    return model;
  }

  dispose(): void {
    for (const v of this.vars.values()) v.dispose();
    this.dctMat.dispose();
  }
}

/** The stage-1 combination rule: denoised = noisy - IDCT(noise_dct). */
export function residualCombine(
  noisy: tf.Tensor2D,
  noiseDct: tf.Tensor2D,
  model: CascadeModel,
): tf.Tensor2D {
  return tf.sub(noisy, model.idctRows(noiseDct)) as tf.Tensor2D;
}
