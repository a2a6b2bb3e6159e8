/**
 * Log-mel features over a caller-provided sample buffer.
 *
 * Mirrors the primary front end: centered reflect-padded frames (1 + n/hop
 * of them), periodic Hann window, power spectrum, optional perceptual
 * weighting, triangular mel filterbank, log compression, float32 output.
 * The FFT is an iterative radix-2, so the window length must be a power of
 * two (the default 2048 is). Agreement with the primary is to float32
 * precision, not bitwise: the two FFTs round differently in the last bits.
 */

export interface LogmelConfig {
  sampleRate?: number;
  window?: number;
  hop?: number;
  melBins?: number;
  fmin?: number;
  fmax?: number;
  logFloor?: number;
  perceptualWeighting?: boolean;
}

interface Resolved extends Required<LogmelConfig> {}

function resolve(cfg: LogmelConfig): Resolved {
  const r = {
    sampleRate: cfg.sampleRate ?? 22050,
    window: cfg.window ?? 2048,
    hop: cfg.hop ?? 512,
    melBins: cfg.melBins ?? 256,
    fmin: cfg.fmin ?? 0.0,
    fmax: cfg.fmax ?? 11025.0,
    logFloor: cfg.logFloor ?? 1e-10,
    perceptualWeighting: cfg.perceptualWeighting ?? true,
  };
  if ((r.window & (r.window - 1)) !== 0 || r.window < 2) {
    throw new RangeError(`window must be a power of two, got ${r.window}`);
  }
  if (r.hop < 1 || r.hop > r.window) {
    throw new RangeError(`hop must be in [1, window], got ${r.hop}`);
  }
  if (!(r.fmin >= 0) || !(r.fmin < r.fmax) || r.fmax > r.sampleRate / 2) {
    throw new RangeError(`need 0 <= fmin < fmax <= rate/2, got ${r.fmin}, ${r.fmax}`);
  }
  if (r.melBins < 1 || r.logFloor <= 0) {
    throw new RangeError(`bad melBins/logFloor: ${r.melBins}, ${r.logFloor}`);
  }
  return r;
}

/** In-place iterative radix-2 complex FFT over interleaved re/im pairs. */
function fft(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) {
      j ^= bit;
    }
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const ang = (-2 * Math.PI) / len;
    const wRe = Math.cos(ang);
    const wIm = Math.sin(ang);
    for (let i = 0; i < n; i += len) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < len / 2; k++) {
        const uRe = re[i + k];
        const uIm = im[i + k];
        const vRe = re[i + k + len / 2] * curRe - im[i + k + len / 2] * curIm;
        const vIm = re[i + k + len / 2] * curIm + im[i + k + len / 2] * curRe;
        re[i + k] = uRe + vRe;
        im[i + k] = uIm + vIm;
        re[i + k + len / 2] = uRe - vRe;
        im[i + k + len / 2] = uIm - vIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
}

function reflectIndex(k: number, n: number): number {
  // numpy-style "reflect": no edge repetition
  while (k < 0 || k >= n) {
    k = k < 0 ? -k : 2 * n - 2 - k;
  }
  return k;
}

function hann(n: number): Float64Array {
  const w = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    w[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / n);
  }
  return w;
}

function hzToMel(f: number): number {
  return 2595 * Math.log10(1 + f / 700);
}

function melToHz(m: number): number {
  return 700 * (Math.pow(10, m / 2595) - 1);
}

export function melFilterbank(cfg: LogmelConfig = {}): { weights: Float64Array; bins: number; melBins: number } {
  const r = resolve(cfg);
  const bins = r.window / 2 + 1;
  const points = new Float64Array(r.melBins + 2);
  const lo = hzToMel(r.fmin);
  const hi = hzToMel(r.fmax);
  const step = (hi - lo) / (r.melBins + 1);
  for (let i = 0; i < points.length; i++) {
    points[i] = melToHz(lo + i * step);
  }
  points[points.length - 1] = melToHz(hi);
  const weights = new Float64Array(r.melBins * bins);
  for (let k = 0; k < r.melBins; k++) {
    const left = points[k];
    const center = points[k + 1];
    const right = points[k + 2];
    for (let b = 0; b < bins; b++) {
      const freq = (b * r.sampleRate) / r.window;
      const rising = (freq - left) / Math.max(center - left, 1e-12);
      const falling = (right - freq) / Math.max(right - center, 1e-12);
      weights[k * bins + b] = Math.max(0, Math.min(rising, falling));
    }
  }
  return { weights, bins, melBins: r.melBins };
}

export function perceptualWeightGain(freq: number): number {
  const f2 = freq * freq;
  const num = 12194 ** 2 * f2 * f2;
  const den =
    (f2 + 20.6 ** 2) * Math.sqrt((f2 + 107.7 ** 2) * (f2 + 737.9 ** 2)) * (f2 + 12194 ** 2);
  const ra = den > 0 ? num / den : 0;
  if (ra <= 0) {
    return 0;
  }
  const db = 20 * Math.log10(Math.max(ra, 1e-30)) + 2.0;
  return Math.pow(10, db / 10);
}

/**
 * Compute log-mel features for `audio` (samples at cfg.sampleRate).
 *
 * Returns a float32 buffer of length T*melBins in row-major (T, F) order,
 * where T = 1 + floor(audio.length / hop).
 */
export function logmel(audio: Float32Array | Float64Array, cfg: LogmelConfig = {}): {
  data: Float32Array;
  frames: number;
  bins: number;
} {
  const r = resolve(cfg);
  const n = audio.length;
  if (n < r.window) {
    throw new RangeError(`audio of ${n} samples shorter than window ${r.window}`);
  }
  const frames = 1 + Math.floor(n / r.hop);
  const half = r.window / 2;
  const window = hann(r.window);
  const { weights, bins } = melFilterbank(r);
  const gains = new Float64Array(bins);
  for (let b = 0; b < bins; b++) {
    gains[b] = r.perceptualWeighting ? perceptualWeightGain((b * r.sampleRate) / r.window) : 1;
  }
  const out = new Float32Array(frames * r.melBins);
  const re = new Float64Array(r.window);
  const im = new Float64Array(r.window);
  const power = new Float64Array(bins);
  for (let ti = 0; ti < frames; ti++) {
    const start = ti * r.hop - half;
    for (let i = 0; i < r.window; i++) {
      re[i] = audio[reflectIndex(start + i, n)] * window[i];
      im[i] = 0;
    }
    fft(re, im);
    for (let b = 0; b < bins; b++) {
      power[b] = (re[b] * re[b] + im[b] * im[b]) * gains[b];
    }
    for (let k = 0; k < r.melBins; k++) {
      let acc = 0;
      const row = k * bins;
      for (let b = 0; b < bins; b++) {
        acc += power[b] * weights[row + b];
      }
      out[ti * r.melBins + k] = Math.fround(Math.log(acc + r.logFloor));
    }
  }
  return { data: out, frames, bins: r.melBins };
}
