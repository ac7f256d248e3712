import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { readSampleFile } from "../src/samples.js";

/** Write a two-sample file per the documented fixed layout. */
function writeFixture(dir: string, maxLen = 6): string {
  const samples = [
    { tokens: [5, 6, 7, 1, 0, 0], contents: [3, 3, 2, 2, 0, 0],
      positions: [0, 1, 0, 1, 0, 0], mask: [0, 0, 1, 0, 0, 0], clf: 3, label: 2 },
    { tokens: [9, 8, 7, 6, 5, 1], contents: [3, 2, 2, 2, 2, 2],
      positions: [0, 0, 1, 2, 3, 4], mask: [0, 0, 1, 1, 1, 0], clf: 5, label: null },
  ];
  const bytesPer = maxLen * (4 + 2 + 2 + 1);
  const buf = Buffer.alloc(samples.length * bytesPer);
  let offset = 0;
  for (const s of samples) {
    for (const t of s.tokens) { buf.writeInt32LE(t, offset); offset += 4; }
    for (const c of s.contents) { buf.writeInt16LE(c, offset); offset += 2; }
    for (const p of s.positions) { buf.writeInt16LE(p, offset); offset += 2; }
    for (const m of s.mask) { buf.writeUInt8(m, offset); offset += 1; }
  }
  const path = join(dir, "samples.bin");
  writeFileSync(path, buf);
  writeFileSync(path + ".json", JSON.stringify({
    format: "dlgkit-samples-v1",
    max_len: maxLen,
    count: samples.length,
    channels: [
      { name: "token_ids", dtype: "int32" },
      { name: "content_ids", dtype: "int16" },
      { name: "position_ids", dtype: "int16" },
      { name: "lm_mask", dtype: "uint8" },
    ],
    clf_index: samples.map((s) => s.clf),
    label: samples.map((s) => s.label),
  }));
  return path;
}

describe("sample file reader", () => {
  it("parses the fixed binary layout", () => {
    const dir = mkdtempSync(join(tmpdir(), "samples-"));
    const file = readSampleFile(writeFixture(dir));
    expect(file.samples).toHaveLength(2);
    expect(file.maxLen).toBe(6);
    expect(file.samples[0].tokenIds).toEqual([5, 6, 7, 1, 0, 0]);
    expect(file.samples[0].lmMask).toEqual([false, false, true, false, false, false]);
    expect(file.samples[0].clfIndex).toBe(3);
    expect(file.samples[1].positionIds).toEqual([0, 0, 1, 2, 3, 4]);
    expect(file.labels).toEqual([2, null]);
  });

  it("rejects an unknown format tag", () => {
    const dir = mkdtempSync(join(tmpdir(), "samples-"));
    const path = writeFixture(dir);
    const sidecar = JSON.parse(readFileSync(path + ".json", "utf-8"));
    sidecar.format = "something-else";
    writeFileSync(path + ".json", JSON.stringify(sidecar));
    expect(() => readSampleFile(path)).toThrow(/unknown sample format/);
  });

  it("rejects a truncated payload", () => {
    const dir = mkdtempSync(join(tmpdir(), "samples-"));
    const path = writeFixture(dir);
    writeFileSync(path, Buffer.alloc(10));
    expect(() => readSampleFile(path)).toThrow(/bytes/);
  });
});
