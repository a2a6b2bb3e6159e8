export { SeededRng } from "./rng.js";
export {
  applyCutMask,
  applyMixtureMask,
  applyZeroMask,
  sampleMask,
  validateSpec,
  type Dims,
  type MaskParams,
  type MaskSpec,
} from "./masking.js";
export { logmel, melFilterbank, perceptualWeightGain, type LogmelConfig } from "./logmel.js";
export { decodeSapp, encodeSapp, HEADER_SIZE, type SappTensor } from "./sapp.js";
