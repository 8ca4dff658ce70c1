import * as tf from "@tensorflow/tfjs";
import { beforeAll, describe, expect, it } from "vitest";
import { defaultConfig } from "../src/config.js";
import { idct } from "../src/dct.js";
import { CascadeModel, residualCombine } from "../src/model.js";
import { PreparedSet } from "../src/data.js";
import { trainCascade } from "../src/train.js";

beforeAll(async () => {
  await tf.setBackend("cpu");
});

function smallConfig() {
  const cfg = defaultConfig();
  cfg.width = 4;
  cfg.attnWidth = 2;
  cfg.seed = 11;
  return cfg;
}

function syntheticSet(n: number, length = 693, seed = 1): PreparedSet {
  let state = seed >>> 0;
  const rand = () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 4294967296;
  };
  const mk = () => Float64Array.from({ length }, () => rand());
  const set: PreparedSet = {
    noisy: [], baseline: [], target1: [], target2: [],
    norms: [], snr: [], length,
  };
  for (let i = 0; i < n; i++) {
    set.noisy.push(mk());
    set.baseline.push(mk());
    set.target1.push(mk());
    set.target2.push(mk());
    set.norms.push({ lo: 0, span: 1 });
    set.snr.push(10);
  }
  return set;
}

function weightBytes(model: CascadeModel, stage: "s1" | "s2"): Float32Array[] {
  return model.stageVars(stage).map((v) => new Float32Array(v.dataSync() as Float32Array));
}

function sameBytes(a: Float32Array[], b: Float32Array[]): boolean {
  return a.every((arr, i) => arr.length === b[i].length && arr.every((v, k) => v === b[i][k]));
}

describe("cascade model contracts", () => {
  it("default config carries the published training recipe", () => {
    const cfg = defaultConfig();
    expect(cfg.batchSize).toBe(32);
    expect(cfg.learningRate).toBe(2e-5);
    expect(cfg.schedule).toEqual([
      { alpha: 1.0, freeze: "stage2", epochs: 50 },
      { alpha: 0.0, freeze: "stage1", epochs: 100 },
      { alpha: 0.5, freeze: null, epochs: 50 },
    ]);
    expect(cfg.spectrumLength).toBe(693);
  });

  it("is the identity with a zero-initialized output head", () => {
    const model = new CascadeModel(smallConfig());
    const x = tf.randomNormal([3, 693], 0, 1, "float32", 5) as tf.Tensor2D;
    const { sDenoised, noiseDct } = model.stage1Forward(x);
    expect(tf.max(tf.abs(tf.sub(sDenoised, x))).dataSync()[0]).toBe(0);
    expect(tf.max(tf.abs(noiseDct)).dataSync()[0]).toBe(0);
  });

  it("combines stage 1 as exactly noisy - IDCT(predicted)", () => {
    const model = new CascadeModel(smallConfig());
    const noisy = tf.randomNormal([2, 693], 0, 1, "float32", 7) as tf.Tensor2D;
    const injected = tf.randomNormal([2, 693], 0, 1, "float32", 8) as tf.Tensor2D;
    const combined = residualCombine(noisy, injected, model).arraySync() as number[][];
    const noisyArr = noisy.arraySync() as number[][];
    const injArr = injected.arraySync() as number[][];
    let worst = 0;
    for (let i = 0; i < 2; i++) {
      const ref = idct(injArr[i]);
      for (let k = 0; k < 693; k++) {
        worst = Math.max(worst, Math.abs(combined[i][k] - (noisyArr[i][k] - ref[k])));
      }
    }
    expect(worst).toBeLessThan(1e-5); // float32 graph vs float64 reference
  });

  it("keeps the length contract for any batch size", () => {
    const model = new CascadeModel(smallConfig());
    for (const batch of [1, 2, 5]) {
      const sDen = tf.randomNormal([batch, 693], 0, 1, "float32", batch) as tf.Tensor2D;
      const base = tf.randomNormal([batch, 693], 0, 1, "float32", batch + 50) as tf.Tensor2D;
      // two input channels (signal + baseline) in, one channel out
      const out = model.stage2Forward(sDen, base);
      expect(out.shape).toEqual([batch, 693]);
      const full = model.forward(sDen, base);
      expect(full.sDenoised.shape).toEqual([batch, 693]);
      expect(full.raman.shape).toEqual([batch, 693]);
    }
  });

  it("stays finite on constant inputs for any initialized weights", () => {
    const cfg = smallConfig();
    for (const seed of [1, 2, 3]) {
      cfg.seed = seed;
      const model = new CascadeModel(cfg);
      const x = tf.fill([2, 693], 7.5) as tf.Tensor2D;
      const out = model.forward(x, tf.fill([2, 693], 1.0) as tf.Tensor2D);
      const values = [
        ...out.sDenoised.dataSync(),
        ...out.raman.dataSync(),
      ];
      expect(values.every(Number.isFinite)).toBe(true);
    }
  });

  it("round-trips through a checkpoint", () => {
    const model = new CascadeModel(smallConfig());
    const doc = JSON.parse(JSON.stringify(model.toJSON()));
    const back = CascadeModel.fromJSON(doc);
    expect(sameBytes(weightBytes(model, "s1"), weightBytes(back, "s1"))).toBe(true);
    expect(sameBytes(weightBytes(model, "s2"), weightBytes(back, "s2"))).toBe(true);
  });

  it("rejects foreign checkpoints", () => {
    expect(() => CascadeModel.fromJSON({ kind: "other" })).toThrow(/checkpoint/);
  });
});

describe("loss weighting and freezing", () => {
  function lossAt(model: CascadeModel, alpha: number, data: PreparedSet): number {
    return tf.tidy(() => {
      const idx = data.noisy.map((_, i) => i);
      const toT = (rows: Float64Array[]) => {
        const flat = new Float32Array(idx.length * data.length);
        idx.forEach((r, i) => flat.set(rows[r], i * data.length));
        return tf.tensor2d(flat, [idx.length, data.length]);
      };
      const out = model.forward(toT(data.noisy), toT(data.baseline));
      const lS = tf.mean(tf.square(tf.sub(out.sDenoised, toT(data.target1))));
      const lR = tf.mean(tf.square(tf.sub(out.raman, toT(data.target2))));
      return tf.add(tf.mul(lS, alpha), tf.mul(lR, 1 - alpha)).dataSync()[0];
    });
  }

  it("alpha=1 zeros the stage-2 gradient (finite differences)", () => {
    const model = new CascadeModel(smallConfig());
    const data = syntheticSet(4);
    const h = 1e-2;
    for (const name of ["s2/e1/w", "s2/mid/w", "s2/a3p/w"]) {
      const v = model.vars.get(name)!;
      const orig = v.dataSync()[0];
      const perturb = (delta: number) => {
        const arr = new Float32Array(v.dataSync() as Float32Array);
        arr[0] = orig + delta;
        v.assign(tf.tensor(arr, v.shape as number[], "float32"));
      };
      perturb(h);
      const plus = lossAt(model, 1.0, data);
      perturb(-h);
      const minus = lossAt(model, 1.0, data);
      perturb(0);
      expect(Math.abs(plus - minus) / (2 * h)).toBeLessThanOrEqual(1e-6);
    }
  });

  it("alpha=0 zeros the stage-1 gradient (finite differences)", () => {
    const model = new CascadeModel(smallConfig());
    const data = syntheticSet(4, 693, 2);
    const h = 1e-2;
    for (const name of ["s1/e1/w", "s1/u2/w", "s1/head/b"]) {
      const v = model.vars.get(name)!;
      const orig = v.dataSync()[0];
      const perturb = (delta: number) => {
        const arr = new Float32Array(v.dataSync() as Float32Array);
        arr[0] = orig + delta;
        v.assign(tf.tensor(arr, v.shape as number[], "float32"));
      };
      perturb(h);
      const plus = lossAt(model, 0.0, data);
      perturb(-h);
      const minus = lossAt(model, 0.0, data);
      perturb(0);
      expect(Math.abs(plus - minus) / (2 * h)).toBeLessThanOrEqual(1e-6);
    }
  });

  it("both stages receive gradients at alpha=0.5", () => {
    const model = new CascadeModel(smallConfig());
    const data = syntheticSet(4, 693, 3);
    const vars = [...model.stageVars("s1"), ...model.stageVars("s2")];
    const { grads } = tf.variableGrads(() => {
      const toT = (rows: Float64Array[]) => {
        const flat = new Float32Array(rows.length * data.length);
        rows.forEach((r, i) => flat.set(r, i * data.length));
        return tf.tensor2d(flat, [rows.length, data.length]);
      };
      const out = model.forward(toT(data.noisy), toT(data.baseline));
      const lS = tf.mean(tf.square(tf.sub(out.sDenoised, toT(data.target1))));
      const lR = tf.mean(tf.square(tf.sub(out.raman, toT(data.target2))));
      return tf.add(tf.mul(lS, 0.5), tf.mul(lR, 0.5)) as tf.Scalar;
    }, vars);
    const norms = Object.entries(grads).map(([name, g]) => ({
      name,
      norm: tf.max(tf.abs(g)).dataSync()[0],
    }));
    // with zero-initialized heads, the first gradient lands exactly on the
    // heads (everything upstream is gated by the zero kernel)
    const s1Head = norms.filter((n) => n.name.includes("/s1/head/"));
    const s2Head = norms.filter((n) => n.name.includes("/s2/head/"));
    expect(s1Head.some((n) => n.norm > 0)).toBe(true);
    expect(s2Head.some((n) => n.norm > 0)).toBe(true);
  });

  it("phase 1 leaves stage-2 parameters bit-identical, phase 2 stage-1", () => {
    const data = syntheticSet(8, 693, 4);
    const cfg = smallConfig();
    cfg.batchSize = 4;
    cfg.learningRate = 1e-3;

    cfg.schedule = [{ alpha: 1.0, freeze: "stage2", epochs: 1 }];
    let model = new CascadeModel(cfg);
    let s1Before = weightBytes(model, "s1");
    let s2Before = weightBytes(model, "s2");
    trainCascade(model, data, data, cfg);
    expect(sameBytes(weightBytes(model, "s2"), s2Before)).toBe(true);
    expect(sameBytes(weightBytes(model, "s1"), s1Before)).toBe(false);

    cfg.schedule = [{ alpha: 0.0, freeze: "stage1", epochs: 1 }];
    model = new CascadeModel(cfg);
    s1Before = weightBytes(model, "s1");
    s2Before = weightBytes(model, "s2");
    trainCascade(model, data, data, cfg);
    expect(sameBytes(weightBytes(model, "s1"), s1Before)).toBe(true);
    expect(sameBytes(weightBytes(model, "s2"), s2Before)).toBe(false);
  });
});
