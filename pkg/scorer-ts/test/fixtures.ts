/** Memorizable toy candidate sets shared by the training tests.
 *
 * Every sample starts with a unique id token, so the gold continuation is
 * a deterministic function of the prefix and a small model can memorize
 * the whole corpus.  Distractors swap in another sample's continuation.
 */

import { CandidateSet, Sample } from "../src/model.js";
import { mulberry32 } from "../src/rng.js";

export interface ToyData {
  sets: CandidateSet[];
  vocab: number;
}

export function makeToyData(nSets: number, seed = 0): ToyData {
  const fillerBase = nSets;
  const nFillers = 12;
  const clfToken = fillerBase + nFillers;
  const vocab = clfToken + 1;
  const rng = mulberry32(seed);
  const filler = () => fillerBase + Math.floor(rng() * nFillers);

  // per sample: 3 grounding tokens, 4 continuation tokens, 1 clf token
  const groundings: number[][] = [];
  const continuations: number[][] = [];
  for (let i = 0; i < nSets; i++) {
    groundings.push([i, filler(), filler()]);
    // deterministic function of the id token, so the LM head can learn the
    // continuation instead of memorizing noise
    continuations.push([i, fillerBase + (i * 7 + 1) % nFillers,
                        i, fillerBase + (i * 5 + 3) % nFillers]);
  }

  const build = (grounding: number[], continuation: number[]): Sample => ({
    tokenIds: [...grounding, ...continuation, clfToken],
    contentIds: [3, 3, 3, 2, 2, 2, 2, 2],
    positionIds: [0, 1, 2, 0, 1, 2, 3, 4],
    lmMask: [false, false, false, true, true, true, true, false],
    clfIndex: 7,
  });

  const sets: CandidateSet[] = [];
  for (let i = 0; i < nSets; i++) {
    const label = Math.floor(rng() * 4);
    const samples: Sample[] = [];
    for (let c = 0; c < 4; c++) {
      if (c === label) {
        samples.push(build(groundings[i], continuations[i]));
      } else {
        let other = Math.floor(rng() * nSets);
        if (other === i) other = (other + 1) % nSets;
        samples.push(build(groundings[i], continuations[other]));
      }
    }
    sets.push({ samples, label });
  }
  return { sets, vocab };
}
