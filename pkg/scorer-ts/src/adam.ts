/** Adam with decoupled weight decay. The defaults are the reference
 * training constants (lr 6.25e-5, beta1 0.9, beta2 0.999, eps 1e-8);
 * desk-scale runs usually pass a larger lr. */

import { Tensor } from "./autograd.js";

export interface AdamOptions {
  lr?: number;
  beta1?: number;
  beta2?: number;
  eps?: number;
  weightDecay?: number;
}

export class Adam {
  private readonly params: Tensor[];
  private readonly m: Float64Array[];
  private readonly v: Float64Array[];
  private t = 0;
  readonly lr: number;
  readonly beta1: number;
  readonly beta2: number;
  readonly eps: number;
  readonly weightDecay: number;

  constructor(params: Tensor[], opts: AdamOptions = {}) {
    this.params = params;
    this.m = params.map((p) => new Float64Array(p.data.length));
    this.v = params.map((p) => new Float64Array(p.data.length));
    this.lr = opts.lr ?? 6.25e-5;
    this.beta1 = opts.beta1 ?? 0.9;
    this.beta2 = opts.beta2 ?? 0.999;
    this.eps = opts.eps ?? 1e-8;
    this.weightDecay = opts.weightDecay ?? 0;
  }

  step(): void {
    this.t += 1;
    const bc1 = 1 - Math.pow(this.beta1, this.t);
    const bc2 = 1 - Math.pow(this.beta2, this.t);
    for (let p = 0; p < this.params.length; p++) {
      const param = this.params[p];
      const m = this.m[p];
      const v = this.v[p];
      for (let i = 0; i < param.data.length; i++) {
        const grad = param.grad[i];
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * grad;
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * grad * grad;
        const mHat = m[i] / bc1;
        const vHat = v[i] / bc2;
        param.data[i] -= this.lr * (mHat / (Math.sqrt(vHat) + this.eps)
                                    + this.weightDecay * param.data[i]);
      }
    }
  }
}
