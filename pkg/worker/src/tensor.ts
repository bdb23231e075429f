/**
 * Just enough dense tensor math for toy-scale cells: HWC Float32 tensors,
 * plain/depthwise/pointwise convolutions, pooling, and elementwise ops.
 */

import { Rng } from "./rng";

export interface Tensor {
  h: number;
  w: number;
  c: number;
  data: Float32Array;
}

export function zeros(h: number, w: number, c: number): Tensor {
  return { h, w, c, data: new Float32Array(h * w * c) };
}

export function at(t: Tensor, y: number, x: number, ch: number): number {
  return t.data[(y * t.w + x) * t.c + ch];
}

export function randomKernel(rng: Rng, k: number, cIn: number, cOut: number): Float32Array {
  const scale = Math.sqrt(2 / (k * k * cIn));
  const weights = new Float32Array(k * k * cIn * cOut);
  for (let i = 0; i < weights.length; i++) weights[i] = rng.normal() * scale;
  return weights;
}

function outSize(n: number, stride: number): number {
  return Math.ceil(n / stride);
}

/** Dense convolution, size-preserving padding, optional stride/dilation. */
export function conv(
  input: Tensor, weights: Float32Array, k: number, cOut: number,
  stride = 1, dilation = 1,
): Tensor {
  const pad = Math.floor((dilation * (k - 1)) / 2);
  const out = zeros(outSize(input.h, stride), outSize(input.w, stride), cOut);
  for (let oy = 0; oy < out.h; oy++) {
    for (let ox = 0; ox < out.w; ox++) {
      for (let oc = 0; oc < cOut; oc++) {
        let acc = 0;
        for (let ky = 0; ky < k; ky++) {
          const iy = oy * stride + ky * dilation - pad;
          if (iy < 0 || iy >= input.h) continue;
          for (let kx = 0; kx < k; kx++) {
            const ix = ox * stride + kx * dilation - pad;
            if (ix < 0 || ix >= input.w) continue;
            const base = (iy * input.w + ix) * input.c;
            const wBase = ((ky * k + kx) * input.c) * cOut + oc;
            for (let ic = 0; ic < input.c; ic++) {
              acc += input.data[base + ic] * weights[wBase + ic * cOut];
            }
          }
        }
        out.data[(oy * out.w + ox) * cOut + oc] = acc;
      }
    }
  }
  return out;
}

/** Depthwise convolution: one k*k filter per channel. */
export function depthwise(
  input: Tensor, weights: Float32Array, k: number, stride = 1, dilation = 1,
): Tensor {
  const pad = Math.floor((dilation * (k - 1)) / 2);
  const out = zeros(outSize(input.h, stride), outSize(input.w, stride), input.c);
  for (let oy = 0; oy < out.h; oy++) {
    for (let ox = 0; ox < out.w; ox++) {
      for (let ch = 0; ch < input.c; ch++) {
        let acc = 0;
        for (let ky = 0; ky < k; ky++) {
          const iy = oy * stride + ky * dilation - pad;
          if (iy < 0 || iy >= input.h) continue;
          for (let kx = 0; kx < k; kx++) {
            const ix = ox * stride + kx * dilation - pad;
            if (ix < 0 || ix >= input.w) continue;
            acc += input.data[(iy * input.w + ix) * input.c + ch] *
              weights[(ky * k + kx) * input.c + ch];
          }
        }
        out.data[(oy * out.w + ox) * input.c + ch] = acc;
      }
    }
  }
  return out;
}

export function pool(input: Tensor, kind: "max" | "avg", stride: number): Tensor {
  const k = 3;
  const pad = 1;
  const out = zeros(outSize(input.h, stride), outSize(input.w, stride), input.c);
  for (let oy = 0; oy < out.h; oy++) {
    for (let ox = 0; ox < out.w; ox++) {
      for (let ch = 0; ch < input.c; ch++) {
        let acc = kind === "max" ? -Infinity : 0;
        let count = 0;
        for (let ky = 0; ky < k; ky++) {
          const iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= input.h) continue;
          for (let kx = 0; kx < k; kx++) {
            const ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= input.w) continue;
            const v = input.data[(iy * input.w + ix) * input.c + ch];
            acc = kind === "max" ? Math.max(acc, v) : acc + v;
            count++;
          }
        }
        out.data[(oy * out.w + ox) * input.c + ch] =
          kind === "max" ? (count ? acc : 0) : (count ? acc / count : 0);
      }
    }
  }
  return out;
}

export function subsample(input: Tensor, stride: number): Tensor {
  if (stride === 1) return input;
  const out = zeros(outSize(input.h, stride), outSize(input.w, stride), input.c);
  for (let oy = 0; oy < out.h; oy++) {
    for (let ox = 0; ox < out.w; ox++) {
      for (let ch = 0; ch < input.c; ch++) {
        out.data[(oy * out.w + ox) * input.c + ch] =
          input.data[(oy * stride * input.w + ox * stride) * input.c + ch];
      }
    }
  }
  return out;
}

export function relu(input: Tensor): Tensor {
  const out = zeros(input.h, input.w, input.c);
  for (let i = 0; i < input.data.length; i++) {
    out.data[i] = Math.max(0, input.data[i]);
  }
  return out;
}

export function add(a: Tensor, b: Tensor): Tensor {
  if (a.h !== b.h || a.w !== b.w || a.c !== b.c) {
    throw new Error(`shape mismatch: ${a.h}x${a.w}x${a.c} vs ${b.h}x${b.w}x${b.c}`);
  }
  const out = zeros(a.h, a.w, a.c);
  for (let i = 0; i < a.data.length; i++) out.data[i] = a.data[i] + b.data[i];
  return out;
}

export function concatChannels(tensors: Tensor[]): Tensor {
  const { h, w } = tensors[0];
  const totalC = tensors.reduce((s, t) => s + t.c, 0);
  const out = zeros(h, w, totalC);
  let offset = 0;
  for (const t of tensors) {
    if (t.h !== h || t.w !== w) throw new Error("concat spatial mismatch");
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        for (let ch = 0; ch < t.c; ch++) {
          out.data[(y * w + x) * totalC + offset + ch] = t.data[(y * w + x) * t.c + ch];
        }
      }
    }
    offset += t.c;
  }
  return out;
}

export function globalAvgPool(input: Tensor): Float32Array {
  const out = new Float32Array(input.c);
  for (let y = 0; y < input.h; y++) {
    for (let x = 0; x < input.w; x++) {
      for (let ch = 0; ch < input.c; ch++) {
        out[ch] += input.data[(y * input.w + x) * input.c + ch];
      }
    }
  }
  const n = input.h * input.w;
  for (let ch = 0; ch < input.c; ch++) out[ch] /= n;
  return out;
}
