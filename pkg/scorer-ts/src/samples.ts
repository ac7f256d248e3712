/**
 * Reader for the `dlgkit-samples-v1` binary sample format.
 *
 * Per sample the channels are stored back to back, little-endian, each
 * padded to max_len entries: token_ids int32, content_ids int16,
 * position_ids int16, lm_mask uint8.  A JSON sidecar at `<file>.json`
 * carries max_len, count, and per-sample clf_index / label.
 */

import { readFileSync } from "node:fs";

import { Sample } from "./model.js";

interface Sidecar {
  format: string;
  max_len: number;
  count: number;
  clf_index: number[];
  label: Array<number | null>;
}

export interface SampleFile {
  samples: Sample[];
  labels: Array<number | null>;
  maxLen: number;
}

const BYTES_PER_TOKEN = 4 + 2 + 2 + 1;

export function readSampleFile(path: string): SampleFile {
  const sidecar = JSON.parse(readFileSync(path + ".json", "utf-8")) as Sidecar;
  if (sidecar.format !== "dlgkit-samples-v1") {
    throw new Error(`unknown sample format ${sidecar.format}`);
  }
  const { max_len: maxLen, count } = sidecar;
  const buf = readFileSync(path);
  if (buf.length !== count * maxLen * BYTES_PER_TOKEN) {
    throw new Error(`sample file is ${buf.length} bytes, `
      + `expected ${count * maxLen * BYTES_PER_TOKEN}`);
  }
  const samples: Sample[] = [];
  let offset = 0;
  for (let s = 0; s < count; s++) {
    const tokenIds: number[] = [];
    const contentIds: number[] = [];
    const positionIds: number[] = [];
    const lmMask: boolean[] = [];
    for (let i = 0; i < maxLen; i++) {
      tokenIds.push(buf.readInt32LE(offset + i * 4));
    }
    offset += maxLen * 4;
    for (let i = 0; i < maxLen; i++) {
      contentIds.push(buf.readInt16LE(offset + i * 2));
    }
    offset += maxLen * 2;
    for (let i = 0; i < maxLen; i++) {
      positionIds.push(buf.readInt16LE(offset + i * 2));
    }
    offset += maxLen * 2;
    for (let i = 0; i < maxLen; i++) {
      lmMask.push(buf.readUInt8(offset + i) !== 0);
    }
    offset += maxLen;
    samples.push({ tokenIds, contentIds, positionIds, lmMask,
                   clfIndex: sidecar.clf_index[s] });
  }
  return { samples, labels: sidecar.label, maxLen };
}
