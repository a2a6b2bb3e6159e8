/**
 * Counter-based splitmix64 generator, bit-compatible with the Python package.
 *
 * All state transitions are exact 64-bit integer arithmetic (BigInt here),
 * so a given (seed, stream) pair yields the identical draw sequence in both
 * languages. Integer draws use masked rejection, which keeps the uniform
 * distribution exact and ports without floating-point concerns.
 */

const MASK64 = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;

function mix64(z: bigint): bigint {
  z &= MASK64;
  z ^= z >> 30n;
  z = (z * 0xbf58476d1ce4e5b9n) & MASK64;
  z ^= z >> 27n;
  z = (z * 0x94d049bb133111ebn) & MASK64;
  z ^= z >> 31n;
  return z;
}

export class SeededRng {
  private readonly base: bigint;
  private counter = 0n;

  constructor(seed: number | bigint, stream: number | bigint = 0) {
    const s = BigInt(seed);
    const st = BigInt(stream);
    if (s < 0n || s > MASK64 || st < 0n || st > MASK64) {
      throw new RangeError(`seed/stream outside 64-bit range: ${seed}, ${stream}`);
    }
    this.base = mix64((mix64(s) + st * GOLDEN) & MASK64);
  }

  nextU64(): bigint {
    this.counter += 1n;
    return mix64((this.base + this.counter * GOLDEN) & MASK64);
  }

  /** One draw, uniform over the inclusive range [lo, hi]. */
  integers(lo: number, hi: number): number {
    if (!Number.isInteger(lo) || !Number.isInteger(hi)) {
      throw new TypeError(`bounds must be integers, got ${lo}, ${hi}`);
    }
    if (lo > hi) {
      throw new RangeError(`empty range: lo=${lo} > hi=${hi}`);
    }
    const span = hi - lo + 1;
    if (span === 1) {
      return lo;
    }
    const bits = BigInt(32 - Math.clz32(span - 1));
    const mask = (1n << bits) - 1n;
    for (;;) {
      const v = Number(this.nextU64() & mask);
      if (v < span) {
        return lo + v;
      }
    }
  }
}
