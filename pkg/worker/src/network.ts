/**
 * Decode a wire genome into a runnable toy-scale feature extractor.
 *
 * The structure mirrors the engine's decode rules (stem, stacked cells with
 * preprocessed inputs, block sums, channel concat, reduction cells at
 * floor(n/3) and floor(2n/3) with width doubling) at a fraction of the
 * size: observations are the engine resolution divided by 7, the stem
 * width is 4 channels, and at most 3 cells are stacked so both the normal
 * and the reduction genome get exercised. All weights derive
 * deterministically from (run seed, genome, layer position).
 */

import { WireCell, WireFidelity, WireGenome } from "./protocol";
import { Rng, hashSeed } from "./rng";
import {
  Tensor,
  add,
  concatChannels,
  conv,
  depthwise,
  globalAvgPool,
  pool,
  randomKernel,
  relu,
  subsample,
} from "./tensor";

export const TOY_DOWNSCALE = 7;
export const TOY_STEM_CHANNELS = 4;
export const TOY_MAX_CELLS = 3;

export interface ToyShape {
  h: number;
  w: number;
  c: number;
}

export function toyObservationShape(fidelity: WireFidelity): ToyShape {
  return {
    h: Math.max(6, Math.round(fidelity.input[0] / TOY_DOWNSCALE)),
    w: Math.max(6, Math.round(fidelity.input[1] / TOY_DOWNSCALE)),
    c: fidelity.input[2],
  };
}

type OpFn = (input: Tensor, stride: number) => Tensor;

const SEP_KERNEL: Record<number, number> = { 3: 3, 4: 5 };
const DIL_KERNEL: Record<number, number> = { 5: 3, 6: 5 };
const INV_KERNEL: Record<number, number> = { 7: 3, 8: 5 };
const INV_EXPANSION = 2;

export class FeatureExtractor {
  readonly featureDim: number;
  private stemWeights: Float32Array;
  private cells: {
    isReduction: boolean;
    width: number;
    pre: [Float32Array, Float32Array];
    preIn: [number, number];
    ops: OpFn[][]; // per block, two operator closures
    inputs: [number, number][]; // per block, the two source indices
  }[] = [];

  constructor(genome: WireGenome, fidelity: WireFidelity, runSeed: number) {
    const key = hashSeed(runSeed, JSON.stringify(genome));
    const shape = toyObservationShape(fidelity);
    this.stemWeights = randomKernel(new Rng(hashSeed(key, "stem")), 3, shape.c,
      TOY_STEM_CHANNELS);

    const nCells = Math.min(fidelity.cells, TOY_MAX_CELLS);
    const reductions = nCells >= 3
      ? new Set([Math.floor(nCells / 3), Math.floor((2 * nCells) / 3)])
      : new Set<number>();

    let width = TOY_STEM_CHANNELS;
    let c0 = TOY_STEM_CHANNELS;
    let c1 = TOY_STEM_CHANNELS;
    for (let i = 0; i < nCells; i++) {
      const isReduction = reductions.has(i);
      if (isReduction) width *= 2;
      const cellGenome: WireCell = isReduction ? genome.reduction : genome.normal;
      const ops: OpFn[][] = [];
      const inputs: [number, number][] = [];
      for (let b = 0; b < cellGenome.length; b++) {
        const [ga, gb] = cellGenome[b];
        ops.push([
          this.makeOp(ga[0], width, hashSeed(key, i, b, 0)),
          this.makeOp(gb[0], width, hashSeed(key, i, b, 1)),
        ]);
        inputs.push([ga[1], gb[1]]);
      }
      this.cells.push({
        isReduction,
        width,
        pre: [
          randomKernel(new Rng(hashSeed(key, i, "pre0")), 1, c0, width),
          randomKernel(new Rng(hashSeed(key, i, "pre1")), 1, c1, width),
        ],
        preIn: [c0, c1],
        ops,
        inputs,
      });
      const concatWidth = cellGenome.length * width;
      c0 = c1;
      c1 = concatWidth;
    }
    // +1 for the constant bias feature appended by extract()
    this.featureDim = (nCells > 0 ? c1 : TOY_STEM_CHANNELS) + 1;
  }

  private makeOp(code: number, width: number, seed: number): OpFn {
    const rng = new Rng(seed);
    if (code === 0) {
      return (input, stride) => subsample(input, stride);
    }
    if (code === 1 || code === 2) {
      const kind = code === 1 ? "max" : "avg";
      return (input, stride) => pool(input, kind, stride);
    }
    if (code in SEP_KERNEL) {
      const k = SEP_KERNEL[code];
      const dw = randomKernel(rng, k, width, 1).slice(0, k * k * width);
      const pw = randomKernel(rng, 1, width, width);
      return (input, stride) =>
        relu(conv(depthwise(input, dw, k, stride), pw, 1, width));
    }
    if (code in DIL_KERNEL) {
      const k = DIL_KERNEL[code];
      const dw = randomKernel(rng, k, width, 1).slice(0, k * k * width);
      const pw = randomKernel(rng, 1, width, width);
      return (input, stride) =>
        relu(conv(depthwise(input, dw, k, stride, 2), pw, 1, width));
    }
    if (code in INV_KERNEL) {
      const k = INV_KERNEL[code];
      const expanded = width * INV_EXPANSION;
      const expand = randomKernel(rng, 1, width, expanded);
      const dw = randomKernel(rng, k, expanded, 1).slice(0, k * k * expanded);
      const project = randomKernel(rng, 1, expanded, width);
      return (input, stride) =>
        relu(conv(depthwise(relu(conv(input, expand, 1, expanded)), dw, k, stride),
          project, 1, width));
    }
    if (code === 9) {
      const weights = randomKernel(rng, 7, width, width);
      return (input, stride) => relu(conv(input, weights, 7, width, stride));
    }
    throw new Error(`unknown operator code ${code}`);
  }

  /** Global-average-pooled features of the final cell, plus a bias slot. */
  extract(obs: Tensor): Float32Array {
    let x = relu(conv(obs, this.stemWeights, 3, TOY_STEM_CHANNELS));
    let s0 = x;
    let s1 = x;
    for (const cell of this.cells) {
      const pre0Stride = s0.h > s1.h ? 2 : 1;
      const in0 = relu(conv(subsample(s0, pre0Stride), cell.pre[0], 1, cell.width));
      const in1 = relu(conv(s1, cell.pre[1], 1, cell.width));
      const states: Tensor[] = [in0, in1];
      const blockOuts: Tensor[] = [];
      for (let b = 0; b < cell.ops.length; b++) {
        const parts: Tensor[] = [];
        for (let slot = 0; slot < 2; slot++) {
          const srcIndex = cell.inputs[b][slot];
          const src = states[srcIndex];
          const fromCellInput = srcIndex < 2;
          const stride = cell.isReduction && fromCellInput ? 2 : 1;
          parts.push(cell.ops[b][slot](src, stride));
        }
        const combined = add(parts[0], parts[1]);
        states.push(combined);
        blockOuts.push(combined);
      }
      const out = concatChannels(blockOuts);
      s0 = s1;
      s1 = out;
    }
    const pooled = globalAvgPool(s1);
    const features = new Float32Array(this.featureDim);
    features.set(pooled);
    features[this.featureDim - 1] = 1.0;
    return features;
  }
}
