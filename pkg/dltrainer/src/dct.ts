/** Orthonormal DCT-II / DCT-III pair in double precision.
 *
 * Matches the transform convention of the spectrum toolkit this trainer
 * plugs into: X[k] = a_k * sum_n x[n] cos(pi (2n+1) k / 2N) with
 * a_0 = sqrt(1/N) and a_k = sqrt(2/N) otherwise; the inverse is the
 * transpose.  O(N^2) with a cached cosine table, which is plenty at the
 * working spectrum length.
 */

const tables = new Map<number, Float64Array>();

function cosTable(n: number): Float64Array {
  let table = tables.get(n);
  if (!table) {
    table = new Float64Array(n * n);
    const a0 = Math.sqrt(1 / n);
    const ak = Math.sqrt(2 / n);
    for (let k = 0; k < n; k++) {
      const scale = k === 0 ? a0 : ak;
      for (let i = 0; i < n; i++) {
        table[k * n + i] = scale * Math.cos((Math.PI * (2 * i + 1) * k) / (2 * n));
      }
    }
    tables.set(n, table);
  }
  return table;
}

export function dct(x: ArrayLike<number>): Float64Array {
  const n = x.length;
  if (n === 0) throw new Error("cannot transform an empty signal");
  const c = cosTable(n);
  const out = new Float64Array(n);
  for (let k = 0; k < n; k++) {
    let acc = 0;
    const row = k * n;
    for (let i = 0; i < n; i++) acc += c[row + i] * x[i];
    out[k] = acc;
  }
  return out;
}

export function idct(coeffs: ArrayLike<number>): Float64Array {
  const n = coeffs.length;
  if (n === 0) throw new Error("cannot transform an empty signal");
  const c = cosTable(n);
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    let acc = 0;
    for (let k = 0; k < n; k++) acc += c[k * n + i] * coeffs[k];
    out[i] = acc;
  }
  return out;
}

/** Row-major orthonormal DCT-II matrix, for running the transform inside
 * the tensor graph as a plain matmul. */
export function dctMatrix(n: number): Float64Array {
  return cosTable(n).slice();
}
