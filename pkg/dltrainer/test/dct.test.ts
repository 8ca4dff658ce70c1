import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { dct, idct, dctMatrix } from "../src/dct.js";

const FIXTURES = join(__dirname, "fixtures");

function maxAbsDiff(a: ArrayLike<number>, b: ArrayLike<number>): number {
  let worst = 0;
  for (let i = 0; i < a.length; i++) worst = Math.max(worst, Math.abs(a[i] - b[i]));
  return worst;
}

describe("orthonormal DCT pair", () => {
  it("round-trips random vectors", () => {
    const x = Array.from({ length: 693 }, (_, i) => Math.sin(i * 0.37) * 5 + i * 0.001);
    expect(maxAbsDiff(idct(dct(x)), x)).toBeLessThan(1e-10);
  });

  it("preserves energy (Parseval)", () => {
    const x = Array.from({ length: 256 }, (_, i) => Math.cos(i * 1.7) * 2);
    const c = dct(x);
    const ex = x.reduce((a, v) => a + v * v, 0);
    const ec = c.reduce((a, v) => a + v * v, 0);
    expect(Math.abs(ex - ec)).toBeLessThan(1e-10 * ex);
  });

  it("maps a constant to a DC-only spectrum", () => {
    const c = dct(new Float64Array(100).fill(3));
    expect(Math.abs(c[0] - 3 * Math.sqrt(100))).toBeLessThan(1e-12 * c[0]);
    for (let k = 1; k < 100; k++) expect(Math.abs(c[k])).toBeLessThan(1e-12);
  });

  it("matrix form matches the direct transform", () => {
    const n = 32;
    const m = dctMatrix(n);
    const x = Array.from({ length: n }, (_, i) => i * 0.1 - 1);
    const viaMatrix = new Float64Array(n);
    for (let k = 0; k < n; k++) {
      for (let i = 0; i < n; i++) viaMatrix[k] += m[k * n + i] * x[i];
    }
    expect(maxAbsDiff(viaMatrix, dct(x))).toBeLessThan(1e-12);
  });

  it("agrees with the generator toolkit's transform on shared vectors", () => {
    const doc = JSON.parse(readFileSync(join(FIXTURES, "dct_vectors.json"), "utf-8"));
    expect(doc.inputs.length).toBeGreaterThan(0);
    for (let i = 0; i < doc.inputs.length; i++) {
      const input: number[] = doc.inputs[i];
      const expected: number[] = doc.coefficients[i];
      const scale = Math.max(1, ...expected.map(Math.abs));
      expect(maxAbsDiff(dct(input), expected)).toBeLessThan(1e-6 * scale);
      expect(maxAbsDiff(idct(expected), input)).toBeLessThan(
        1e-6 * Math.max(1, ...input.map(Math.abs)),
      );
    }
  });
});
