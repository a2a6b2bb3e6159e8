/**
 * Bitwise parity with the Python CLI: 1000 random masking cases plus the
 * mask-sampling path, exercised through SAPP files and the `specmask augment`
 * command. The CLI is the only interface consumed.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import {
  applyCutMask,
  applyMixtureMask,
  applyZeroMask,
  decodeSapp,
  encodeSapp,
  sampleMask,
  SeededRng,
  type Dims,
  type MaskSpec,
} from "../src/index.js";
import { makeTempDir, mapLimit, randomDims, randomTensor, runCli } from "./helpers.js";

const CASES = 1000;
const SAMPLE_CASES = 200;
const CONCURRENCY = 8;

const tmp = makeTempDir("specmask-parity-");
afterAll(() => tmp.cleanup());

interface Case {
  id: number;
  scheme: "zm" | "mm" | "cm";
  dims: Dims;
  spec: MaskSpec;
  x: Float32Array;
  y: Float32Array;
}

function buildCase(id: number): Case {
  const rng = new SeededRng(424200 + id);
  const dims = randomDims(rng);
  const scheme = (["zm", "mm", "cm"] as const)[id % 3];
  // every 9th case uses float32-subnormal magnitudes to stress the rounding
  const scale = id % 9 === 0 ? 1e-38 : 1.0;
  const x = randomTensor(rng, dims, scale);
  const y = randomTensor(rng, dims, scale);
  const t = rng.integers(0, dims.t);
  const f = rng.integers(0, dims.f);
  const spec = {
    t: t,
    t0: rng.integers(0, dims.t - t),
    f: f,
    f0: rng.integers(0, dims.f - f),
  };
  return { id, scheme, dims, spec, x, y };
}

async function runCase(c: Case): Promise<void> {
  const xPath = join(tmp.dir, `x${c.id}.sapp`);
  const yPath = join(tmp.dir, `y${c.id}.sapp`);
  const outPath = join(tmp.dir, `o${c.id}.sapp`);
  writeFileSync(xPath, encodeSapp(c.dims, c.x));
  const args = ["augment", xPath, outPath, "--scheme", c.scheme,
                "--spec", `${c.spec.t0},${c.spec.t},${c.spec.f0},${c.spec.f}`];
  if (c.scheme !== "zm") {
    writeFileSync(yPath, encodeSapp(c.dims, c.y));
    args.push("--partner", yPath);
  }
  await runCli(args);
  const cliOut = decodeSapp(readFileSync(outPath));
  const ours = new Float32Array(c.x.length);
  if (c.scheme === "zm") {
    applyZeroMask(c.x, c.dims, c.spec, ours);
  } else if (c.scheme === "mm") {
    applyMixtureMask(c.x, c.y, c.dims, c.spec, ours);
  } else {
    applyCutMask(c.x, c.y, c.dims, c.spec, ours);
  }
  expect(cliOut.dims).toEqual(c.dims);
  const got = Buffer.from(new Uint8Array(cliOut.data.buffer, cliOut.data.byteOffset, cliOut.data.byteLength));
  const want = Buffer.from(new Uint8Array(ours.buffer, 0, ours.byteLength));
  if (!got.equals(want)) {
    throw new Error(`case ${c.id} (${c.scheme}, dims ${JSON.stringify(c.dims)}): bitwise mismatch`);
  }
}

describe("CLI parity", () => {
  it(
    `bound masking kernels bitwise-match CLI outputs on ${CASES} random cases`,
    async () => {
      const cases = Array.from({ length: CASES }, (_, i) => buildCase(i));
      await mapLimit(cases, CONCURRENCY, runCase);
    },
    900_000,
  );

  it(
    `sampleMask reproduces the CLI's sampled specs on ${SAMPLE_CASES} seeds`,
    async () => {
      const dims = { c: 1, t: 30, f: 20 } as const;
      const x = randomTensor(new SeededRng(1), dims);
      const xPath = join(tmp.dir, "sample-x.sapp");
      writeFileSync(xPath, encodeSapp(dims, x));
      await mapLimit(
        Array.from({ length: SAMPLE_CASES }, (_, i) => i),
        CONCURRENCY,
        async (i) => {
          const seed = 9000 + i;
          const tMax = i % 7;
          const fMax = i % 5;
          const outPath = join(tmp.dir, `sample-o${i}.sapp`);
          const { stdout } = await runCli([
            "augment", xPath, outPath, "--scheme", "zm", "--seed", String(seed),
            "--t-max", String(tMax), "--f-max", String(fMax),
          ]);
          const match = stdout.match(/spec t0=(\d+) t=(\d+) f0=(\d+) f=(\d+)/);
          if (!match) {
            throw new Error(`unparsable CLI output: ${stdout}`);
          }
          const cliSpec = { t0: +match[1], t: +match[2], f0: +match[3], f: +match[4] };
          const ourSpec = sampleMask(dims.t, dims.f, { tMax, fMax }, new SeededRng(seed));
          expect(ourSpec).toEqual(cliSpec);
        },
      );
    },
    240_000,
  );

  it("CLI rejects shape mismatches that the bindings also reject", async () => {
    const xPath = join(tmp.dir, "mismatch-x.sapp");
    const yPath = join(tmp.dir, "mismatch-y.sapp");
    const dimsX = { c: 1, t: 4, f: 4 } as const;
    const dimsY = { c: 1, t: 4, f: 5 } as const;
    writeFileSync(xPath, encodeSapp(dimsX, new Float32Array(16).fill(1)));
    writeFileSync(yPath, encodeSapp(dimsY, new Float32Array(20).fill(2)));
    await expect(
      runCli(["augment", xPath, join(tmp.dir, "mismatch-o.sapp"), "--scheme", "cm",
              "--partner", yPath, "--spec", "0,1,0,1"]),
    ).rejects.toMatchObject({ code: 2 });
    const x = new Float32Array(16);
    const y = new Float32Array(20);
    expect(() => applyCutMask(x, y, dimsX, { t0: 0, t: 1, f0: 0, f: 1 }, new Float32Array(16)))
      .toThrow(/y has length 20/);
  });
});
