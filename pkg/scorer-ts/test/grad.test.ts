import { describe, expect, it } from "vitest";

import { Graph } from "../src/autograd.js";
import { makeConfig } from "../src/config.js";
import { ToyScorer } from "../src/model.js";
import { makeToyData } from "./fixtures.js";

describe("gradient check", () => {
  it("analytic gradients match central finite differences", () => {
    const { sets, vocab } = makeToyData(2, 11);
    const model = new ToyScorer(
      makeConfig(vocab, { layers: 2, hidden: 8, ffn: 16, heads: 2,
                          maxPositions: 8, nContents: 8, dropout: 0 }), 5);
    const batch = sets.slice(0, 2);
    const lossAt = () => {
      const g = new Graph();
      return model.batchLoss(g, batch).data[0];
    };

    model.zeroGrad();
    const g = new Graph();
    g.backward(model.batchLoss(g, batch));

    const h = 1e-5;
    let worst = 0;
    let worstParam = "";
    for (const [name, t] of model.namedParameters()) {
      for (let i = 0; i < t.data.length; i++) {
        const orig = t.data[i];
        t.data[i] = orig + h;
        const up = lossAt();
        t.data[i] = orig - h;
        const down = lossAt();
        t.data[i] = orig;
        const numeric = (up - down) / (2 * h);
        const analytic = t.grad[i];
        const rel = Math.abs(analytic - numeric)
          / Math.max(Math.abs(analytic) + Math.abs(numeric), 1e-6);
        if (rel > worst) {
          worst = rel;
          worstParam = `${name}[${i}]`;
        }
      }
    }
    expect(worst, `worst at ${worstParam}`).toBeLessThan(1e-4);
  }, 120_000);
});
