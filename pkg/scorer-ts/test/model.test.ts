import { describe, expect, it } from "vitest";

import { Graph } from "../src/autograd.js";
import { makeConfig } from "../src/config.js";
import { Sample, ToyScorer } from "../src/model.js";
import { makeToyData } from "./fixtures.js";

const SMALL = { layers: 2, hidden: 16, ffn: 32, heads: 2, maxPositions: 16, nContents: 8, dropout: 0 };

function sample(tokens: number[]): Sample {
  const n = tokens.length;
  return {
    tokenIds: tokens,
    contentIds: new Array(n).fill(2),
    positionIds: Array.from({ length: n }, (_, i) => i),
    lmMask: tokens.map((_, i) => i > 0 && i < n - 1),
    clfIndex: n - 1,
  };
}

describe("config", () => {
  it("rejects hidden not divisible by heads", () => {
    expect(() => makeConfig(10, { hidden: 10, heads: 4 })).toThrow(/divisible/);
  });

  it("fills in documented defaults", () => {
    const cfg = makeConfig(100);
    expect(cfg.layers).toBe(2);
    expect(cfg.hidden).toBe(64);
    expect(cfg.ffn).toBe(256);
    expect(cfg.heads).toBe(2);
    expect(cfg.dropout).toBeCloseTo(0.1);
    expect(cfg.weightDecay).toBeCloseTo(0.01);
    expect(cfg.lmLossWeight).toBeCloseTo(0.5);
  });
});

describe("embedding sum", () => {
  it("produces the sum of the three channel embeddings", () => {
    const model = new ToyScorer(makeConfig(10, SMALL), 1);
    const g = new Graph();
    const x = g.add(
      g.add(g.gatherRows(model.tokEmb, [3]), g.gatherRows(model.contentEmb, [2])),
      g.gatherRows(model.posEmb, [5]));
    for (let j = 0; j < model.cfg.hidden; j++) {
      expect(x.get(0, j)).toBeCloseTo(
        model.tokEmb.get(3, j) + model.contentEmb.get(2, j) + model.posEmb.get(5, j), 12);
    }
  });

  it("is invariant as a multiset under permuting two fact segments", () => {
    const model = new ToyScorer(makeConfig(10, SMALL), 1);
    const g = new Graph();
    // two single-token fact segments with restarted positions
    const a = g.add(
      g.add(g.gatherRows(model.tokEmb, [4, 7]), g.gatherRows(model.contentEmb, [3, 4])),
      g.gatherRows(model.posEmb, [0, 0]));
    const b = g.add(
      g.add(g.gatherRows(model.tokEmb, [7, 4]), g.gatherRows(model.contentEmb, [4, 3])),
      g.gatherRows(model.posEmb, [0, 0]));
    const rows = (t: typeof a) => [0, 1]
      .map((i) => Array.from(t.data.subarray(i * t.cols, (i + 1) * t.cols)).join(","))
      .sort();
    expect(rows(a)).toEqual(rows(b));
  });

  it("rejects out-of-range ids", () => {
    const model = new ToyScorer(makeConfig(10, SMALL), 1);
    const g = new Graph();
    expect(() => model.hiddenStates(g, sample([3, 99, 1]))).toThrow(/outside table/);
  });
});

describe("shapes and validation", () => {
  it("hidden states are [T, hidden]", () => {
    const model = new ToyScorer(makeConfig(10, SMALL), 1);
    const h = model.hiddenStates(new Graph(), sample([1, 2, 3, 4, 5]));
    expect(h.rows).toBe(5);
    expect(h.cols).toBe(16);
  });

  it("rejects a clf index outside the sample", () => {
    const model = new ToyScorer(makeConfig(10, SMALL), 1);
    const s = sample([1, 2, 3]);
    s.clfIndex = 3;
    expect(() => model.hiddenStates(new Graph(), s)).toThrow(/clfIndex/);
  });

  it("rejects an lm mask on position 0", () => {
    const model = new ToyScorer(makeConfig(10, SMALL), 1);
    const s = sample([1, 2, 3]);
    s.lmMask = [true, false, false];
    expect(() => model.lmLoss(new Graph(), s)).toThrow(/position 0/);
  });
});

describe("initial losses", () => {
  it("L_lm starts within 5% of ln V", () => {
    const { sets, vocab } = makeToyData(20, 3);
    const model = new ToyScorer(makeConfig(vocab, SMALL), 7);
    let total = 0;
    for (const set of sets) {
      total += model.lmLoss(new Graph(), set.samples[set.label]).data[0];
    }
    const lm = total / sets.length;
    expect(Math.abs(lm - Math.log(vocab)) / Math.log(vocab)).toBeLessThan(0.05);
  });

  it("L_clf starts within 5% of ln 4", () => {
    const { sets, vocab } = makeToyData(20, 3);
    const model = new ToyScorer(makeConfig(vocab, SMALL), 7);
    let total = 0;
    for (const set of sets) {
      const logits = model.classify(set.samples);
      const mx = Math.max(...logits);
      const z = logits.reduce((a, b) => a + Math.exp(b - mx), 0);
      total += -(logits[set.label] - mx - Math.log(z));
    }
    const clf = total / sets.length;
    expect(Math.abs(clf - Math.log(4)) / Math.log(4)).toBeLessThan(0.05);
  });

  it("total loss is lmLossWeight * L_lm + L_clf", () => {
    const { sets, vocab } = makeToyData(4, 3);
    const model = new ToyScorer(makeConfig(vocab, SMALL), 7);
    const set = sets[0];
    const total = model.setLoss(new Graph(), set).data[0];
    const lm = model.lmLoss(new Graph(), set.samples[set.label]).data[0];
    const logits = model.classify(set.samples);
    const mx = Math.max(...logits);
    const z = logits.reduce((a, b) => a + Math.exp(b - mx), 0);
    const clf = -(logits[set.label] - mx - Math.log(z));
    expect(total).toBeCloseTo(0.5 * lm + clf, 10);
  });
});

describe("pad invariance", () => {
  it("LM loss ignores tokens in the pad region", () => {
    const model = new ToyScorer(makeConfig(10, SMALL), 1);
    const base: Sample = {
      tokenIds: [1, 2, 3, 4, 0, 0, 0],
      contentIds: [2, 2, 2, 2, 0, 0, 0],
      positionIds: [0, 1, 2, 3, 0, 0, 0],
      lmMask: [false, true, true, true, false, false, false],
      clfIndex: 3,
    };
    const mutated: Sample = {
      ...base,
      tokenIds: [1, 2, 3, 4, 9, 5, 7],
    };
    const a = model.lmLoss(new Graph(), base).data[0];
    const b = model.lmLoss(new Graph(), mutated).data[0];
    expect(b).toBe(a);
  });
});
