/**
 * JSON-lines scorer server (protocol version 1) on stdin/stdout.
 *
 * Requests:
 *   {"version": 1, "op": "logprobs", "sample": {...}}
 *   {"version": 1, "op": "classify", "samples": [{...}, ...]}
 *
 * One request at a time; malformed requests get an error response and the
 * process stays alive.  Runs in eval mode (no dropout), so identical
 * requests return identical floats.
 */

import { createInterface } from "node:readline";

import { loadCheckpoint } from "./checkpoint.js";
import { makeConfig } from "./config.js";
import { Sample, ToyScorer, checkSample } from "./model.js";

export const PROTOCOL_VERSION = 1;

interface WireSample {
  token_ids: number[];
  content_ids: number[];
  position_ids: number[];
  lm_mask: Array<boolean | number>;
  clf_index: number;
}

function parseSample(raw: WireSample): Sample {
  const sample: Sample = {
    tokenIds: raw.token_ids,
    contentIds: raw.content_ids,
    positionIds: raw.position_ids,
    lmMask: (raw.lm_mask ?? []).map(Boolean),
    clfIndex: raw.clf_index ?? 0,
  };
  checkSample(sample);
  return sample;
}

export function handleRequest(model: ToyScorer, line: string): object {
  try {
    const request = JSON.parse(line);
    if (request.version !== PROTOCOL_VERSION) {
      throw new Error(`unsupported protocol version ${request.version}`);
    }
    if (request.op === "logprobs") {
      const logprobs = model.nextTokenLogprobs(parseSample(request.sample));
      return { version: PROTOCOL_VERSION, ok: true, logprobs };
    }
    if (request.op === "classify") {
      const samples = (request.samples as WireSample[]).map(parseSample);
      return { version: PROTOCOL_VERSION, ok: true, logits: model.classify(samples) };
    }
    throw new Error(`unknown op ${JSON.stringify(request.op)}`);
  } catch (err) {
    return { version: PROTOCOL_VERSION, ok: false, error: String(err) };
  }
}

interface CliArgs {
  checkpoint?: string;
  vocab?: number;
  seed: number;
}

function parseArgs(argv: string[]): CliArgs {
  const args: CliArgs = { seed: 0 };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (flag === "--checkpoint") args.checkpoint = value;
    else if (flag === "--vocab") args.vocab = Number(value);
    else if (flag === "--seed") args.seed = Number(value);
    else continue;
    i++;
  }
  if (!args.checkpoint && !args.vocab) {
    throw new Error("need --checkpoint DIR or --vocab N");
  }
  return args;
}

export function serve(model: ToyScorer): void {
  const rl = createInterface({ input: process.stdin, terminal: false });
  rl.on("line", (line) => {
    if (!line.trim()) return;
    process.stdout.write(JSON.stringify(handleRequest(model, line)) + "\n");
  });
}

const invokedDirectly = process.argv[1]?.endsWith("server.js");
if (invokedDirectly) {
  const args = parseArgs(process.argv.slice(2));
  const model = args.checkpoint
    ? loadCheckpoint(args.checkpoint)
    : new ToyScorer(makeConfig(args.vocab!), args.seed);
  serve(model);
}
