/**
 * Masking kernels over caller-provided contiguous float32 buffers.
 *
 * A tensor is a Float32Array of length C*T*F in row-major (C, T, F) order.
 * Kernels write into a caller-allocated output buffer of the same length
 * (which may alias an input; every cell is computed independently), so the
 * hot path allocates nothing. Results are bit-identical to the Python CLI
 * for identical inputs and mask events.
 */

import { SeededRng } from "./rng.js";

export interface Dims {
  c: number;
  t: number;
  f: number;
}

export interface MaskSpec {
  t0: number;
  t: number;
  f0: number;
  f: number;
}

export interface MaskParams {
  tMax: number;
  fMax: number;
}

function requireDims(dims: Dims): void {
  for (const [name, v] of Object.entries(dims)) {
    if (!Number.isInteger(v) || v < 1) {
      throw new RangeError(`dimension ${name} must be a positive integer, got ${v}`);
    }
  }
}

function requireF32(name: string, buf: unknown, length: number): Float32Array {
  if (!(buf instanceof Float32Array)) {
    throw new TypeError(`${name} must be a Float32Array, got ${Object.prototype.toString.call(buf)}`);
  }
  if (buf.length !== length) {
    throw new RangeError(`${name} has length ${buf.length}, expected C*T*F = ${length} contiguous floats`);
  }
  return buf;
}

export function validateSpec(spec: MaskSpec, dims: Dims): void {
  const { t0, t, f0, f } = spec;
  for (const [name, v] of Object.entries(spec)) {
    if (!Number.isInteger(v)) {
      throw new TypeError(`spec field ${name} must be an integer, got ${v}`);
    }
  }
  if (t < 0 || f < 0) {
    throw new RangeError(`negative band width in spec (t=${t}, f=${f})`);
  }
  if (t0 < 0 || t0 + t > dims.t) {
    throw new RangeError(`time band [${t0}, ${t0 + t}) outside T=${dims.t}`);
  }
  if (f0 < 0 || f0 + f > dims.f) {
    throw new RangeError(`frequency band [${f0}, ${f0 + f}) outside F=${dims.f}`);
  }
}

/** Draw one mask event; the draw order (t, t0, f, f0) matches the CLI. */
export function sampleMask(tDim: number, fDim: number, params: MaskParams, rng: SeededRng): MaskSpec {
  if (tDim < 1 || fDim < 1) {
    throw new RangeError(`grid must be at least 1x1, got ${tDim}x${fDim}`);
  }
  if (params.tMax < 0 || params.tMax > tDim || params.fMax < 0 || params.fMax > fDim) {
    throw new RangeError(`params (${params.tMax}, ${params.fMax}) outside grid ${tDim}x${fDim}`);
  }
  const t = rng.integers(0, params.tMax);
  const t0 = rng.integers(0, tDim - t);
  const f = rng.integers(0, params.fMax);
  const f0 = rng.integers(0, fDim - f);
  return { t0, t, f0, f };
}

type Fill = (xv: number, yv: number) => number;

function applyWithFill(
  x: Float32Array,
  y: Float32Array | null,
  dims: Dims,
  spec: MaskSpec,
  out: Float32Array,
  fill: Fill,
): void {
  requireDims(dims);
  const { c, t, f } = dims;
  const length = c * t * f;
  requireF32("x", x, length);
  if (y !== null) {
    requireF32("y", y, length);
  }
  requireF32("out", out, length);
  validateSpec(spec, dims);
  const tEnd = spec.t0 + spec.t;
  const fEnd = spec.f0 + spec.f;
  for (let ci = 0; ci < c; ci++) {
    const base = ci * t * f;
    for (let ti = 0; ti < t; ti++) {
      const row = base + ti * f;
      const inTimeBand = ti >= spec.t0 && ti < tEnd;
      for (let fi = 0; fi < f; fi++) {
        const i = row + fi;
        const masked = inTimeBand || (fi >= spec.f0 && fi < fEnd);
        out[i] = masked ? fill(x[i], y === null ? 0 : y[i]) : x[i];
      }
    }
  }
}

/** Masked cells become zero. */
export function applyZeroMask(x: Float32Array, dims: Dims, spec: MaskSpec, out: Float32Array): void {
  applyWithFill(x, null, dims, spec, out, () => 0);
}

/**
 * Masked cells become (x + y) / 2, reading the original x, so cells in the
 * band intersection are mixed exactly once. Math.fround after the float64
 * add reproduces the float32 rounding of the primary exactly (53 >= 2*24+2,
 * so the double rounding is harmless).
 */
export function applyMixtureMask(
  x: Float32Array,
  y: Float32Array,
  dims: Dims,
  spec: MaskSpec,
  out: Float32Array,
): void {
  applyWithFill(x, y, dims, spec, out, (xv, yv) => Math.fround(Math.fround(xv + yv) * 0.5));
}

/** Masked cells are taken from the partner verbatim. */
export function applyCutMask(
  x: Float32Array,
  y: Float32Array,
  dims: Dims,
  spec: MaskSpec,
  out: Float32Array,
): void {
  applyWithFill(x, y, dims, spec, out, (_xv, yv) => yv);
}
