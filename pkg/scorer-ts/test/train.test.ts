import { describe, expect, it } from "vitest";

import { makeConfig } from "../src/config.js";
import { ToyScorer } from "../src/model.js";
import { hitsAt1, meanLmLoss, train } from "../src/train.js";
import { makeToyData } from "./fixtures.js";

describe("overfit sanity", () => {
  // 50 memorizable candidate sets; the budget and lr are pinned so a
  // regression in the loss or optimizer shows up as a hard failure.
  it("reaches L_lm < 0.1 and hits@1 > 0.95 on its training data", () => {
    const { sets, vocab } = makeToyData(50, 21);
    const model = new ToyScorer(
      makeConfig(vocab, { layers: 2, hidden: 16, ffn: 32, heads: 2,
                          maxPositions: 16, nContents: 8, dropout: 0 }), 13);
    train(model, sets, {
      steps: 600, batchSize: 10, lr: 1e-2, weightDecay: 0, seed: 1,
    });
    expect(meanLmLoss(model, sets)).toBeLessThan(0.1);
    expect(hitsAt1(model, sets)).toBeGreaterThan(0.95);
  }, 300_000);

  it("training reduces the loss monotonically in trend", () => {
    const { sets, vocab } = makeToyData(8, 2);
    const model = new ToyScorer(
      makeConfig(vocab, { layers: 1, hidden: 16, ffn: 32, heads: 2,
                          maxPositions: 16, nContents: 8, dropout: 0 }), 3);
    const result = train(model, sets, {
      steps: 60, batchSize: 8, lr: 1e-3, weightDecay: 0, seed: 2,
    });
    const first = result.losses.slice(0, 10).reduce((a, b) => a + b) / 10;
    const last = result.losses.slice(-10).reduce((a, b) => a + b) / 10;
    expect(last).toBeLessThan(first);
  }, 120_000);
});
