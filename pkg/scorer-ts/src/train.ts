/** Plain minibatch training loop over candidate sets. */

import { Adam, AdamOptions } from "./adam.js";
import { Graph } from "./autograd.js";
import { CandidateSet, ToyScorer } from "./model.js";
import { mulberry32 } from "./rng.js";

export interface TrainOptions extends AdamOptions {
  steps: number;
  batchSize?: number;
  seed?: number;
  dropout?: boolean;
  logEvery?: number;
  log?: (step: number, loss: number) => void;
}

export interface TrainResult {
  finalLoss: number;
  losses: number[];
}

export function train(
  model: ToyScorer,
  sets: CandidateSet[],
  opts: TrainOptions,
): TrainResult {
  const optimizer = new Adam(model.namedParameters().map(([, t]) => t), opts);
  const rng = mulberry32(opts.seed ?? 0);
  const batchSize = Math.min(opts.batchSize ?? sets.length, sets.length);
  const losses: number[] = [];
  for (let step = 0; step < opts.steps; step++) {
    const batch: CandidateSet[] = [];
    for (let i = 0; i < batchSize; i++) {
      batch.push(sets[Math.floor(rng() * sets.length)]);
    }
    const g = new Graph();
    model.zeroGrad();
    const loss = model.batchLoss(g, batch, opts.dropout ?? false);
    g.backward(loss);
    optimizer.step();
    losses.push(loss.data[0]);
    if (opts.log && opts.logEvery && step % opts.logEvery === 0) {
      opts.log(step, loss.data[0]);
    }
  }
  return { finalLoss: losses[losses.length - 1], losses };
}

/** Mean L_lm over the gold candidates of every set, in eval mode. */
export function meanLmLoss(model: ToyScorer, sets: CandidateSet[]): number {
  let total = 0;
  for (const set of sets) {
    const g = new Graph();
    total += model.lmLoss(g, set.samples[set.label]).data[0];
  }
  return total / sets.length;
}

/** Fraction of sets whose gold candidate gets the highest clf logit. */
export function hitsAt1(model: ToyScorer, sets: CandidateSet[]): number {
  let hits = 0;
  for (const set of sets) {
    const logits = model.classify(set.samples);
    const best = logits.indexOf(Math.max(...logits));
    if (best === set.label) hits++;
  }
  return hits / sets.length;
}
