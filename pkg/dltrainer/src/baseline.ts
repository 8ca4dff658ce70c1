/** Iterative masked-polynomial baseline estimation (the classical
 * fluorescence-removal procedure): fit a low-order polynomial, clamp the
 * signal to the fit wherever it pokes above, refit until the residual norm
 * settles; the best order in [3, 6] wins by RMS on the non-peak points.
 * Stage 2 of the cascade consumes this curve as its second input channel.
 */

export interface BaselineOptions {
  orderLow?: number;
  orderHigh?: number;
  maxIters?: number;
  tol?: number;
}

/** Least squares polynomial fit on x in [-1, 1]; returns fitted values. */
function polyFitEval(x: Float64Array, y: Float64Array, order: number): Float64Array {
  const m = order + 1;
  // normal equations on plain powers: fine at order <= 6 over [-1, 1]
  const ata = new Float64Array(m * m);
  const atb = new Float64Array(m);
  const powers = new Float64Array(m);
  for (let i = 0; i < x.length; i++) {
    powers[0] = 1;
    for (let p = 1; p < m; p++) powers[p] = powers[p - 1] * x[i];
    for (let r = 0; r < m; r++) {
      atb[r] += powers[r] * y[i];
      for (let c = r; c < m; c++) ata[r * m + c] += powers[r] * powers[c];
    }
  }
  for (let r = 0; r < m; r++) for (let c = 0; c < r; c++) ata[r * m + c] = ata[c * m + r];

  // Gaussian elimination with partial pivoting
  const a = Array.from({ length: m }, (_, r) => Array.from(ata.slice(r * m, r * m + m)));
  const b = Array.from(atb);
  for (let col = 0; col < m; col++) {
    let piv = col;
    for (let r = col + 1; r < m; r++) if (Math.abs(a[r][col]) > Math.abs(a[piv][col])) piv = r;
    [a[col], a[piv]] = [a[piv], a[col]];
    [b[col], b[piv]] = [b[piv], b[col]];
    const d = a[col][col];
    if (d === 0) continue;
    for (let r = col + 1; r < m; r++) {
      const f = a[r][col] / d;
      for (let c = col; c < m; c++) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  const coef = new Float64Array(m);
  for (let r = m - 1; r >= 0; r--) {
    let acc = b[r];
    for (let c = r + 1; c < m; c++) acc -= a[r][c] * coef[c];
    coef[r] = a[r][r] !== 0 ? acc / a[r][r] : 0;
  }

  const out = new Float64Array(x.length);
  for (let i = 0; i < x.length; i++) {
    let v = coef[m - 1];
    for (let p = m - 2; p >= 0; p--) v = v * x[i] + coef[p];
    out[i] = v;
  }
  return out;
}

function singleOrder(
  values: Float64Array,
  x: Float64Array,
  order: number,
  maxIters: number,
  tol: number,
): Float64Array {
  const y: Float64Array = values.slice();
  let prevNorm: number | null = null;
  let baseline: Float64Array = y;
  for (let it = 0; it < maxIters; it++) {
    baseline = polyFitEval(x, y, order);
    let norm = 0;
    for (let i = 0; i < y.length; i++) {
      if (y[i] > baseline[i]) y[i] = baseline[i];
      const r = y[i] - baseline[i];
      norm += r * r;
    }
    norm = Math.sqrt(norm);
    if (prevNorm !== null && Math.abs(norm - prevNorm) <= tol * Math.max(prevNorm, 1e-300)) break;
    prevNorm = norm;
  }
  return baseline;
}

export function modpolyBaseline(
  values: Float64Array,
  opts: BaselineOptions = {},
): { baseline: Float64Array; corrected: Float64Array } {
  const { orderLow = 3, orderHigh = 6, maxIters = 100, tol = 1e-6 } = opts;
  const n = values.length;
  const x = new Float64Array(n);
  for (let i = 0; i < n; i++) x[i] = n > 1 ? (2 * i) / (n - 1) - 1 : 0;

  let best: Float64Array | null = null;
  let bestScore = Infinity;
  for (let order = orderLow; order <= orderHigh; order++) {
    const baseline = singleOrder(values, x, order, maxIters, tol);
    let acc = 0;
    let count = 0;
    for (let i = 0; i < n; i++) {
      if (values[i] <= baseline[i]) {
        const r = values[i] - baseline[i];
        acc += r * r;
        count++;
      }
    }
    const score = count > 0 ? Math.sqrt(acc / count) : Infinity;
    if (score < bestScore) {
      bestScore = score;
      best = baseline;
    }
  }
  const baseline = best ?? new Float64Array(n);
  const corrected = new Float64Array(n);
  for (let i = 0; i < n; i++) corrected[i] = values[i] - baseline[i];
  return { baseline, corrected };
}
