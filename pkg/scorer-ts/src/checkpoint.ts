/** Checkpoint directory: config.json manifest + weights.bin (float64 LE,
 * parameters concatenated in namedParameters() order). */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { ToyModelConfig, validateConfig } from "./config.js";
import { ToyScorer } from "./model.js";

interface Manifest {
  format: "toy-scorer-checkpoint-v1";
  config: ToyModelConfig;
  parameters: Array<{ name: string; rows: number; cols: number }>;
}

export function saveCheckpoint(model: ToyScorer, dir: string): void {
  mkdirSync(dir, { recursive: true });
  const named = model.namedParameters();
  const manifest: Manifest = {
    format: "toy-scorer-checkpoint-v1",
    config: model.cfg,
    parameters: named.map(([name, t]) => ({ name, rows: t.rows, cols: t.cols })),
  };
  const total = named.reduce((acc, [, t]) => acc + t.data.length, 0);
  const buf = Buffer.alloc(total * 8);
  let offset = 0;
  for (const [, t] of named) {
    for (let i = 0; i < t.data.length; i++) {
      buf.writeDoubleLE(t.data[i], offset);
      offset += 8;
    }
  }
  writeFileSync(join(dir, "config.json"), JSON.stringify(manifest, null, 2));
  writeFileSync(join(dir, "weights.bin"), buf);
}

export function loadCheckpoint(dir: string): ToyScorer {
  const manifest = JSON.parse(
    readFileSync(join(dir, "config.json"), "utf-8")) as Manifest;
  if (manifest.format !== "toy-scorer-checkpoint-v1") {
    throw new Error(`unknown checkpoint format ${manifest.format}`);
  }
  validateConfig(manifest.config);
  const model = new ToyScorer(manifest.config, 0);
  const named = model.namedParameters();
  if (named.length !== manifest.parameters.length) {
    throw new Error("checkpoint parameter count mismatch");
  }
  const buf = readFileSync(join(dir, "weights.bin"));
  let offset = 0;
  for (let p = 0; p < named.length; p++) {
    const [name, t] = named[p];
    const spec = manifest.parameters[p];
    if (spec.name !== name || spec.rows !== t.rows || spec.cols !== t.cols) {
      throw new Error(`checkpoint parameter ${spec.name} does not match ${name}`);
    }
    for (let i = 0; i < t.data.length; i++) {
      t.data[i] = buf.readDoubleLE(offset);
      offset += 8;
    }
  }
  if (offset !== buf.length) throw new Error("checkpoint weights length mismatch");
  return model;
}
