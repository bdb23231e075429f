import assert from "node:assert/strict";
import { test } from "node:test";

import { Rng, hashSeed } from "../src/rng";
import {
  add,
  concatChannels,
  conv,
  depthwise,
  globalAvgPool,
  pool,
  subsample,
  zeros,
} from "../src/tensor";

function filled(h: number, w: number, c: number, fn: (y: number, x: number, ch: number) => number) {
  const t = zeros(h, w, c);
  for (let y = 0; y < h; y++)
    for (let x = 0; x < w; x++)
      for (let ch = 0; ch < c; ch++) t.data[(y * w + x) * c + ch] = fn(y, x, ch);
  return t;
}

test("rng is deterministic and uniform-bounded", () => {
  const a = new Rng(42);
  const b = new Rng(42);
  for (let i = 0; i < 100; i++) {
    const va = a.next();
    assert.equal(va, b.next());
    assert.ok(va >= 0 && va < 1);
  }
  assert.equal(hashSeed(1, "x", 2), hashSeed(1, "x", 2));
  assert.notEqual(hashSeed(1, "x", 2), hashSeed(1, "x", 3));
});

test("1x1 identity conv preserves the tensor", () => {
  const input = filled(4, 4, 2, (y, x, ch) => y + 10 * x + 100 * ch);
  const weights = new Float32Array([1, 0, 0, 1]); // identity over 2 channels
  const out = conv(input, weights, 1, 2);
  assert.deepEqual(Array.from(out.data), Array.from(input.data));
});

test("3x3 sum kernel computes neighborhood sums with zero padding", () => {
  const input = filled(3, 3, 1, () => 1);
  const weights = new Float32Array(9).fill(1);
  const out = conv(input, weights, 3, 1);
  assert.equal(out.data[(1 * 3 + 1) * 1], 9); // center sees all 9 ones
  assert.equal(out.data[0], 4); // corner sees a 2x2 patch
});

test("stride-2 conv halves spatial dims with ceil", () => {
  const input = filled(5, 5, 1, () => 1);
  const out = conv(input, new Float32Array([1]), 1, 1, 2);
  assert.equal(out.h, 3);
  assert.equal(out.w, 3);
});

test("depthwise applies one filter per channel", () => {
  const input = filled(2, 2, 2, (_, __, ch) => ch + 1);
  const weights = new Float32Array([2, 10]); // 1x1 depthwise: scale per channel
  const out = depthwise(input, weights, 1);
  assert.equal(out.data[0], 2);
  assert.equal(out.data[1], 20);
});

test("max and avg pooling", () => {
  const input = filled(3, 3, 1, (y, x) => (y === 1 && x === 1 ? 9 : 1));
  // the padded corner window still reaches the center maximum
  assert.equal(pool(input, "max", 1).data[0], 9);
  const avgCenter = pool(input, "avg", 1).data[(1 * 3 + 1)];
  assert.ok(Math.abs(avgCenter - (8 + 9) / 9) < 1e-6);
});

test("subsample, add, concat, global average pool", () => {
  const a = filled(2, 2, 1, (y, x) => y * 2 + x);
  const b = filled(2, 2, 1, () => 10);
  assert.equal(subsample(a, 2).h, 1);
  assert.equal(add(a, b).data[3], 3 + 10);
  const cat = concatChannels([a, b]);
  assert.equal(cat.c, 2);
  assert.equal(cat.data[1], 10);
  const gap = globalAvgPool(a);
  assert.ok(Math.abs(gap[0] - 1.5) < 1e-6);
});
