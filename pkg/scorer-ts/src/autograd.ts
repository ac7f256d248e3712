/**
 * Minimal tape-based reverse-mode autograd over dense Float64Array matrices.
 *
 * A `Graph` records one backward closure per forward op, in order; calling
 * `backward(loss)` seeds d(loss)=1 and runs the tape in reverse.  Only the
 * ops the transformer needs exist, and the attention and cross-entropy ops
 * are fused (their analytic backward is simpler than composing pieces).
 */

import { Rng } from "./rng.js";

export class Tensor {
  readonly rows: number;
  readonly cols: number;
  data: Float64Array;
  grad: Float64Array;

  constructor(rows: number, cols: number, data?: Float64Array) {
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
    if (this.data.length !== rows * cols) {
      throw new Error(`tensor data length ${this.data.length} != ${rows}x${cols}`);
    }
    this.grad = new Float64Array(rows * cols);
  }

  get(i: number, j: number): number {
    return this.data[i * this.cols + j];
  }

  zeroGrad(): void {
    this.grad.fill(0);
  }
}

export class Graph {
  private tape: Array<() => void> = [];

  private record(back: () => void): void {
    this.tape.push(back);
  }

  backward(loss: Tensor): void {
    if (loss.rows !== 1 || loss.cols !== 1) {
      throw new Error("backward expects a scalar loss");
    }
    loss.grad[0] = 1;
    for (let i = this.tape.length - 1; i >= 0; i--) this.tape[i]();
    this.tape = [];
  }

  /** out = a @ b, a: [m,k], b: [k,n]. */
  matmul(a: Tensor, b: Tensor): Tensor {
    if (a.cols !== b.rows) throw new Error("matmul shape mismatch");
    const m = a.rows, k = a.cols, n = b.cols;
    const out = new Tensor(m, n);
    for (let i = 0; i < m; i++) {
      for (let p = 0; p < k; p++) {
        const av = a.data[i * k + p];
        if (av === 0) continue;
        for (let j = 0; j < n; j++) {
          out.data[i * n + j] += av * b.data[p * n + j];
        }
      }
    }
    this.record(() => {
      for (let i = 0; i < m; i++) {
        for (let p = 0; p < k; p++) {
          let acc = 0;
          for (let j = 0; j < n; j++) {
            const go = out.grad[i * n + j];
            acc += go * b.data[p * n + j];
            b.grad[p * n + j] += go * a.data[i * k + p];
          }
          a.grad[i * k + p] += acc;
        }
      }
    });
    return out;
  }

  /** Elementwise sum of two same-shape tensors. */
  add(a: Tensor, b: Tensor): Tensor {
    if (a.rows !== b.rows || a.cols !== b.cols) throw new Error("add shape mismatch");
    const out = new Tensor(a.rows, a.cols);
    for (let i = 0; i < out.data.length; i++) out.data[i] = a.data[i] + b.data[i];
    this.record(() => {
      for (let i = 0; i < out.data.length; i++) {
        a.grad[i] += out.grad[i];
        b.grad[i] += out.grad[i];
      }
    });
    return out;
  }

  /** Broadcast a [1,n] bias over every row of a [m,n] tensor. */
  addBias(a: Tensor, bias: Tensor): Tensor {
    if (bias.rows !== 1 || bias.cols !== a.cols) throw new Error("bias shape mismatch");
    const out = new Tensor(a.rows, a.cols);
    for (let i = 0; i < a.rows; i++) {
      for (let j = 0; j < a.cols; j++) {
        out.data[i * a.cols + j] = a.data[i * a.cols + j] + bias.data[j];
      }
    }
    this.record(() => {
      for (let i = 0; i < a.rows; i++) {
        for (let j = 0; j < a.cols; j++) {
          const go = out.grad[i * a.cols + j];
          a.grad[i * a.cols + j] += go;
          bias.grad[j] += go;
        }
      }
    });
    return out;
  }

  /** Row lookup: out[i] = table[indices[i]], with scatter-add backward. */
  gatherRows(table: Tensor, indices: number[]): Tensor {
    const n = table.cols;
    const out = new Tensor(indices.length, n);
    for (let i = 0; i < indices.length; i++) {
      const r = indices[i];
      if (r < 0 || r >= table.rows) {
        throw new Error(`gather index ${r} outside table of ${table.rows} rows`);
      }
      out.data.set(table.data.subarray(r * n, (r + 1) * n), i * n);
    }
    this.record(() => {
      for (let i = 0; i < indices.length; i++) {
        const r = indices[i];
        for (let j = 0; j < n; j++) {
          table.grad[r * n + j] += out.grad[i * n + j];
        }
      }
    });
    return out;
  }

  /** Per-row layer norm with learned gain/bias ([1,n] each). */
  layerNorm(a: Tensor, gain: Tensor, bias: Tensor, eps = 1e-5): Tensor {
    const n = a.cols;
    const out = new Tensor(a.rows, n);
    const means = new Float64Array(a.rows);
    const invStds = new Float64Array(a.rows);
    const normed = new Float64Array(a.rows * n);
    for (let i = 0; i < a.rows; i++) {
      let mean = 0;
      for (let j = 0; j < n; j++) mean += a.data[i * n + j];
      mean /= n;
      let varsum = 0;
      for (let j = 0; j < n; j++) {
        const d = a.data[i * n + j] - mean;
        varsum += d * d;
      }
      const inv = 1 / Math.sqrt(varsum / n + eps);
      means[i] = mean;
      invStds[i] = inv;
      for (let j = 0; j < n; j++) {
        const x = (a.data[i * n + j] - mean) * inv;
        normed[i * n + j] = x;
        out.data[i * n + j] = x * gain.data[j] + bias.data[j];
      }
    }
    this.record(() => {
      for (let i = 0; i < a.rows; i++) {
        const inv = invStds[i];
        let sumDx = 0;
        let sumDxX = 0;
        for (let j = 0; j < n; j++) {
          const go = out.grad[i * n + j];
          const x = normed[i * n + j];
          gain.grad[j] += go * x;
          bias.grad[j] += go;
          const dx = go * gain.data[j];
          sumDx += dx;
          sumDxX += dx * x;
        }
        for (let j = 0; j < n; j++) {
          const dx = out.grad[i * n + j] * gain.data[j];
          const x = normed[i * n + j];
          a.grad[i * n + j] += inv * (dx - sumDx / n - (x * sumDxX) / n);
        }
      }
    });
    return out;
  }

  /** GELU (tanh approximation), elementwise. */
  gelu(a: Tensor): Tensor {
    const c = Math.sqrt(2 / Math.PI);
    const out = new Tensor(a.rows, a.cols);
    for (let i = 0; i < a.data.length; i++) {
      const x = a.data[i];
      out.data[i] = 0.5 * x * (1 + Math.tanh(c * (x + 0.044715 * x * x * x)));
    }
    this.record(() => {
      for (let i = 0; i < a.data.length; i++) {
        const x = a.data[i];
        const inner = c * (x + 0.044715 * x * x * x);
        const t = Math.tanh(inner);
        const dInner = c * (1 + 3 * 0.044715 * x * x);
        const deriv = 0.5 * (1 + t) + 0.5 * x * (1 - t * t) * dInner;
        a.grad[i] += out.grad[i] * deriv;
      }
    });
    return out;
  }

  /** Inverted dropout; identity when rate is 0. */
  dropout(a: Tensor, rate: number, rng: Rng): Tensor {
    if (rate <= 0) return a;
    if (rate >= 1) throw new Error("dropout rate must be < 1");
    const keep = 1 - rate;
    const mask = new Float64Array(a.data.length);
    const out = new Tensor(a.rows, a.cols);
    for (let i = 0; i < a.data.length; i++) {
      mask[i] = rng() < keep ? 1 / keep : 0;
      out.data[i] = a.data[i] * mask[i];
    }
    this.record(() => {
      for (let i = 0; i < a.data.length; i++) a.grad[i] += out.grad[i] * mask[i];
    });
    return out;
  }

  /**
   * Fused multi-head causal self-attention.  q, k, v: [T, hidden]; heads
   * partition the hidden columns.  Position i attends to j <= i only.
   */
  causalAttention(q: Tensor, k: Tensor, v: Tensor, heads: number): Tensor {
    const T = q.rows;
    const hidden = q.cols;
    if (hidden % heads !== 0) throw new Error("hidden not divisible by heads");
    const hd = hidden / heads;
    const scale = 1 / Math.sqrt(hd);
    const out = new Tensor(T, hidden);
    // probs[h][i*T+j] for j <= i, kept for the backward pass
    const probs: Float64Array[] = [];
    for (let h = 0; h < heads; h++) {
      const p = new Float64Array(T * T);
      const off = h * hd;
      for (let i = 0; i < T; i++) {
        let maxScore = -Infinity;
        const scores = new Float64Array(i + 1);
        for (let j = 0; j <= i; j++) {
          let s = 0;
          for (let d = 0; d < hd; d++) {
            s += q.data[i * hidden + off + d] * k.data[j * hidden + off + d];
          }
          scores[j] = s * scale;
          if (scores[j] > maxScore) maxScore = scores[j];
        }
        let z = 0;
        for (let j = 0; j <= i; j++) {
          scores[j] = Math.exp(scores[j] - maxScore);
          z += scores[j];
        }
        for (let j = 0; j <= i; j++) {
          const pij = scores[j] / z;
          p[i * T + j] = pij;
          for (let d = 0; d < hd; d++) {
            out.data[i * hidden + off + d] += pij * v.data[j * hidden + off + d];
          }
        }
      }
      probs.push(p);
    }
    this.record(() => {
      for (let h = 0; h < heads; h++) {
        const p = probs[h];
        const off = h * hd;
        for (let i = 0; i < T; i++) {
          // dP and the softmax Jacobian, row by row
          const dP = new Float64Array(i + 1);
          let dot = 0;
          for (let j = 0; j <= i; j++) {
            let acc = 0;
            for (let d = 0; d < hd; d++) {
              const go = out.grad[i * hidden + off + d];
              acc += go * v.data[j * hidden + off + d];
              v.grad[j * hidden + off + d] += go * p[i * T + j];
            }
            dP[j] = acc;
            dot += acc * p[i * T + j];
          }
          for (let j = 0; j <= i; j++) {
            const dS = p[i * T + j] * (dP[j] - dot) * scale;
            for (let d = 0; d < hd; d++) {
              q.grad[i * hidden + off + d] += dS * k.data[j * hidden + off + d];
              k.grad[j * hidden + off + d] += dS * q.data[i * hidden + off + d];
            }
          }
        }
      }
    });
    return out;
  }

  /**
   * Mean negative log-likelihood of `targets[i]` under softmax(logits[i]),
   * restricted to the rows listed in `positions`.  Returns a scalar.
   */
  maskedCrossEntropy(logits: Tensor, targets: number[], positions: number[]): Tensor {
    if (positions.length === 0) throw new Error("cross-entropy over zero positions");
    const V = logits.cols;
    const out = new Tensor(1, 1);
    const softmaxes = new Map<number, Float64Array>();
    let total = 0;
    for (const i of positions) {
      const t = targets[i];
      if (t < 0 || t >= V) throw new Error(`target ${t} outside vocab ${V}`);
      const row = logits.data.subarray(i * V, (i + 1) * V);
      let mx = -Infinity;
      for (let j = 0; j < V; j++) if (row[j] > mx) mx = row[j];
      let z = 0;
      const p = new Float64Array(V);
      for (let j = 0; j < V; j++) {
        p[j] = Math.exp(row[j] - mx);
        z += p[j];
      }
      for (let j = 0; j < V; j++) p[j] /= z;
      softmaxes.set(i, p);
      total += -Math.log(p[t]);
    }
    out.data[0] = total / positions.length;
    this.record(() => {
      const go = out.grad[0] / positions.length;
      for (const i of positions) {
        const p = softmaxes.get(i)!;
        const t = targets[i];
        for (let j = 0; j < V; j++) {
          logits.grad[i * V + j] += go * (p[j] - (j === t ? 1 : 0));
        }
      }
    });
    return out;
  }

  /** Cross-entropy of a single [1,n] logit row against `label`. */
  crossEntropyRow(logits: Tensor, label: number): Tensor {
    if (logits.rows !== 1) throw new Error("crossEntropyRow expects one row");
    return this.maskedCrossEntropy(logits, [label], [0]);
  }

  /** out = sum_i weights[i] * scalars[i]; all inputs are [1,1]. */
  weightedSum(scalars: Tensor[], weights: number[]): Tensor {
    const out = new Tensor(1, 1);
    for (let i = 0; i < scalars.length; i++) {
      out.data[0] += weights[i] * scalars[i].data[0];
    }
    this.record(() => {
      for (let i = 0; i < scalars.length; i++) {
        scalars[i].grad[0] += out.grad[0] * weights[i];
      }
    });
    return out;
  }

  /** Pick one row of a as a [1,n] view-copy (used for the clf position). */
  row(a: Tensor, index: number): Tensor {
    if (index < 0 || index >= a.rows) throw new Error(`row ${index} out of range`);
    const n = a.cols;
    const out = new Tensor(1, n);
    out.data.set(a.data.subarray(index * n, (index + 1) * n));
    this.record(() => {
      for (let j = 0; j < n; j++) a.grad[index * n + j] += out.grad[j];
    });
    return out;
  }

  /** Stack scalar tensors into one [1,n] row. */
  concatScalars(scalars: Tensor[]): Tensor {
    const out = new Tensor(1, scalars.length);
    for (let i = 0; i < scalars.length; i++) out.data[i] = scalars[i].data[0];
    this.record(() => {
      for (let i = 0; i < scalars.length; i++) scalars[i].grad[0] += out.grad[i];
    });
    return out;
  }
}
