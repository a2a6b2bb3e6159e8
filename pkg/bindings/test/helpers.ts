import { execFile } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { SeededRng } from "../src/rng.js";
import type { Dims } from "../src/masking.js";

const execFileAsync = promisify(execFile);

export const CLI = process.env.SPECMASK_CLI ?? "specmask";

export async function runCli(args: string[]): Promise<{ stdout: string; stderr: string }> {
  return execFileAsync(CLI, args, { encoding: "utf-8" });
}

export function makeTempDir(prefix: string): { dir: string; cleanup: () => void } {
  const dir = mkdtempSync(join(tmpdir(), prefix));
  return { dir, cleanup: () => rmSync(dir, { recursive: true, force: true }) };
}

/** Uniform float32 values in roughly [-1, 1), with optional tiny-value scaling. */
export function randomTensor(rng: SeededRng, dims: Dims, scale = 1.0): Float32Array {
  const out = new Float32Array(dims.c * dims.t * dims.f);
  for (let i = 0; i < out.length; i++) {
    out[i] = Math.fround((Number(rng.nextU64() >> 11n) * 2 ** -53 * 2 - 1) * scale);
  }
  return out;
}

export function randomDims(rng: SeededRng): Dims {
  return { c: rng.integers(1, 3), t: rng.integers(1, 10), f: rng.integers(1, 10) };
}

/** Run jobs with bounded concurrency, preserving order of results. */
export async function mapLimit<T, R>(items: T[], limit: number, fn: (item: T, i: number) => Promise<R>): Promise<R[]> {
  const results = new Array<R>(items.length);
  let next = 0;
  async function worker(): Promise<void> {
    for (;;) {
      const i = next++;
      if (i >= items.length) {
        return;
      }
      results[i] = await fn(items[i], i);
    }
  }
  await Promise.all(Array.from({ length: Math.min(limit, items.length) }, worker));
  return results;
}

/** Minimal mono 16-bit PCM WAV encoder. */
export function writeWav16(path: string, samples: Int16Array, sampleRate: number): void {
  const dataSize = samples.length * 2;
  const buf = Buffer.alloc(44 + dataSize);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + dataSize, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(1, 20); // PCM
  buf.writeUInt16LE(1, 22); // mono
  buf.writeUInt32LE(sampleRate, 24);
  buf.writeUInt32LE(sampleRate * 2, 28);
  buf.writeUInt16LE(2, 32);
  buf.writeUInt16LE(16, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(dataSize, 40);
  for (let i = 0; i < samples.length; i++) {
    buf.writeInt16LE(samples[i], 44 + i * 2);
  }
  writeFileSync(path, buf);
}
