/**
 * Decoder-only transformer over three input channels.
 *
 * Per position the representation is the sum of token, content, and
 * position embeddings.  Two heads sit on the final hidden states: a
 * language-model projection scored only on lm-masked positions, and a
 * scalar classification head read at the classification-token position.
 * The training objective is lmLossWeight * L_lm + L_clf.
 */

import { Graph, Tensor } from "./autograd.js";
import { ToyModelConfig, validateConfig } from "./config.js";
import { Rng, gaussian, mulberry32 } from "./rng.js";

export interface Sample {
  tokenIds: number[];
  contentIds: number[];
  positionIds: number[];
  lmMask: boolean[];
  clfIndex: number;
}

export interface CandidateSet {
  samples: Sample[]; // exactly 4
  label: number;     // index of the gold candidate
}

export function checkSample(s: Sample): void {
  const n = s.tokenIds.length;
  if (s.contentIds.length !== n || s.positionIds.length !== n || s.lmMask.length !== n) {
    throw new Error("sample channels have unequal lengths");
  }
  if (n === 0) throw new Error("empty sample");
  if (s.clfIndex < 0 || s.clfIndex >= n) {
    throw new Error(`clfIndex ${s.clfIndex} outside sample of length ${n}`);
  }
}

interface Layer {
  ln1g: Tensor; ln1b: Tensor;
  wq: Tensor; bq: Tensor;
  wk: Tensor; bk: Tensor;
  wv: Tensor; bv: Tensor;
  wo: Tensor; bo: Tensor;
  ln2g: Tensor; ln2b: Tensor;
  wf1: Tensor; bf1: Tensor;
  wf2: Tensor; bf2: Tensor;
}

export class ToyScorer {
  readonly cfg: ToyModelConfig;
  tokEmb: Tensor;
  contentEmb: Tensor;
  posEmb: Tensor;
  layers: Layer[] = [];
  lnfg: Tensor;
  lnfb: Tensor;
  lmW: Tensor;
  lmB: Tensor;
  clfW: Tensor;
  clfB: Tensor;
  private dropRng: Rng;

  constructor(cfg: ToyModelConfig, seed = 0) {
    validateConfig(cfg);
    this.cfg = cfg;
    const rng = mulberry32(seed);
    this.dropRng = mulberry32(seed ^ 0x9e3779b9);
    const h = cfg.hidden;
    const init = (rows: number, cols: number) => {
      const t = new Tensor(rows, cols);
      for (let i = 0; i < t.data.length; i++) t.data[i] = gaussian(rng, 0, cfg.initStd);
      return t;
    };
    const ones = (cols: number) => {
      const t = new Tensor(1, cols);
      t.data.fill(1);
      return t;
    };
    const zeros = (cols: number) => new Tensor(1, cols);

    this.tokEmb = init(cfg.vocab, h);
    this.contentEmb = init(cfg.nContents, h);
    this.posEmb = init(cfg.maxPositions, h);
    for (let l = 0; l < cfg.layers; l++) {
      this.layers.push({
        ln1g: ones(h), ln1b: zeros(h),
        wq: init(h, h), bq: zeros(h),
        wk: init(h, h), bk: zeros(h),
        wv: init(h, h), bv: zeros(h),
        wo: init(h, h), bo: zeros(h),
        ln2g: ones(h), ln2b: zeros(h),
        wf1: init(h, cfg.ffn), bf1: zeros(cfg.ffn),
        wf2: init(cfg.ffn, h), bf2: zeros(h),
      });
    }
    this.lnfg = ones(h);
    this.lnfb = zeros(h);
    this.lmW = init(h, cfg.vocab);
    this.lmB = zeros(cfg.vocab);
    this.clfW = init(h, 1);
    this.clfB = zeros(1);
  }

  /** All trainable tensors with stable names (checkpoint/optimizer order). */
  namedParameters(): Array<[string, Tensor]> {
    const out: Array<[string, Tensor]> = [
      ["tokEmb", this.tokEmb],
      ["contentEmb", this.contentEmb],
      ["posEmb", this.posEmb],
    ];
    this.layers.forEach((layer, i) => {
      for (const [name, t] of Object.entries(layer)) {
        out.push([`layer${i}.${name}`, t as Tensor]);
      }
    });
    out.push(["lnfg", this.lnfg], ["lnfb", this.lnfb],
             ["lmW", this.lmW], ["lmB", this.lmB],
             ["clfW", this.clfW], ["clfB", this.clfB]);
    return out;
  }

  zeroGrad(): void {
    for (const [, t] of this.namedParameters()) t.zeroGrad();
  }

  /** Final hidden states [T, hidden] for one sample. */
  hiddenStates(g: Graph, sample: Sample, train = false): Tensor {
    checkSample(sample);
    const rate = train ? this.cfg.dropout : 0;
    let x = g.add(
      g.add(g.gatherRows(this.tokEmb, sample.tokenIds),
            g.gatherRows(this.contentEmb, sample.contentIds)),
      g.gatherRows(this.posEmb, sample.positionIds));
    x = g.dropout(x, rate, this.dropRng);
    for (const layer of this.layers) {
      const normed = g.layerNorm(x, layer.ln1g, layer.ln1b);
      const q = g.addBias(g.matmul(normed, layer.wq), layer.bq);
      const k = g.addBias(g.matmul(normed, layer.wk), layer.bk);
      const v = g.addBias(g.matmul(normed, layer.wv), layer.bv);
      const att = g.causalAttention(q, k, v, this.cfg.heads);
      const proj = g.dropout(g.addBias(g.matmul(att, layer.wo), layer.bo), rate, this.dropRng);
      x = g.add(x, proj);
      const normed2 = g.layerNorm(x, layer.ln2g, layer.ln2b);
      const ff = g.addBias(
        g.matmul(g.gelu(g.addBias(g.matmul(normed2, layer.wf1), layer.bf1)), layer.wf2),
        layer.bf2);
      x = g.add(x, g.dropout(ff, rate, this.dropRng));
    }
    return g.layerNorm(x, this.lnfg, this.lnfb);
  }

  lmLogits(g: Graph, hidden: Tensor): Tensor {
    return g.addBias(g.matmul(hidden, this.lmW), this.lmB);
  }

  clfLogit(g: Graph, hidden: Tensor, clfIndex: number): Tensor {
    return g.addBias(g.matmul(g.row(hidden, clfIndex), this.clfW), this.clfB);
  }

  /**
   * Language-model loss: mean NLL of each lm-masked token given its prefix.
   * Position i-1 predicts token i, so masked position 0 is rejected.
   */
  lmLoss(g: Graph, sample: Sample, train = false): Tensor {
    const logits = this.lmLogits(g, this.hiddenStates(g, sample, train));
    const targets = new Array<number>(sample.tokenIds.length).fill(0);
    const positions: number[] = [];
    for (let i = 0; i < sample.lmMask.length; i++) {
      if (!sample.lmMask[i]) continue;
      if (i === 0) throw new Error("lm mask set on position 0 (nothing to condition on)");
      targets[i - 1] = sample.tokenIds[i];
      positions.push(i - 1);
    }
    return g.maskedCrossEntropy(logits, targets, positions);
  }

  /** Total loss for one candidate set: lmLossWeight * L_lm + L_clf. */
  setLoss(g: Graph, set: CandidateSet, train = false): Tensor {
    if (set.samples.length !== 4) {
      throw new Error(`candidate set needs 4 samples, got ${set.samples.length}`);
    }
    if (set.label < 0 || set.label >= 4) throw new Error(`label ${set.label} out of range`);
    const logits: Tensor[] = [];
    let lm: Tensor | null = null;
    for (let i = 0; i < set.samples.length; i++) {
      const sample = set.samples[i];
      const hidden = this.hiddenStates(g, sample, train);
      logits.push(this.clfLogit(g, hidden, sample.clfIndex));
      if (i === set.label) {
        lm = this.lmLoss(g, sample, train);
      }
    }
    const clf = g.crossEntropyRow(g.concatScalars(logits), set.label);
    return g.weightedSum([lm!, clf], [this.cfg.lmLossWeight, 1]);
  }

  /** Mean set loss over a batch. */
  batchLoss(g: Graph, sets: CandidateSet[], train = false): Tensor {
    if (sets.length === 0) throw new Error("empty batch");
    const losses = sets.map((s) => this.setLoss(g, s, train));
    return g.weightedSum(losses, losses.map(() => 1 / losses.length));
  }

  /** Next-token log-probabilities after the last position (eval mode). */
  nextTokenLogprobs(sample: Sample): number[] {
    const g = new Graph();
    const hidden = this.hiddenStates(g, sample, false);
    const logits = this.lmLogits(g, hidden);
    const V = this.cfg.vocab;
    const last = (sample.tokenIds.length - 1) * V;
    const row = Array.from(logits.data.subarray(last, last + V));
    const mx = Math.max(...row);
    const z = row.reduce((a, b) => a + Math.exp(b - mx), 0);
    return row.map((x) => x - mx - Math.log(z));
  }

  /** Classification logits for arbitrary candidate samples (eval mode). */
  classify(samples: Sample[]): number[] {
    return samples.map((s) => {
      const g = new Graph();
      const hidden = this.hiddenStates(g, s, false);
      return this.clfLogit(g, hidden, s.clfIndex).data[0];
    });
  }
}
