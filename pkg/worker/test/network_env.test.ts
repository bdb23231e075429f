import assert from "node:assert/strict";
import { test } from "node:test";

import { EPISODE_STEPS, TrackingEnv } from "../src/env";
import { FeatureExtractor, toyObservationShape } from "../src/network";
import { WireFidelity, WireGenome } from "../src/protocol";
import { Rng } from "../src/rng";

const FIDELITY: WireFidelity = {
  epochs: 20, input: [84, 84, 3], cells: 4, blocks: 4,
  init_channels: 16, head_output_dim: 64,
};

function genomeOf(code: number, blocks = 4): WireGenome {
  const cell = Array.from({ length: blocks }, (_, k) => [
    [code, 0], [code, Math.min(1, k + 1)],
  ]) as WireGenome["normal"];
  return { normal: cell, reduction: cell };
}

test("toy observation shape downscales the engine resolution", () => {
  const shape = toyObservationShape(FIDELITY);
  assert.deepEqual(shape, { h: 12, w: 12, c: 3 });
});

test("feature extraction is deterministic and genome-sensitive", () => {
  const shape = toyObservationShape(FIDELITY);
  const env = new TrackingEnv(shape.h, shape.w, shape.c);
  const obs = env.reset(7);
  const a1 = new FeatureExtractor(genomeOf(3), FIDELITY, 11).extract(obs);
  const a2 = new FeatureExtractor(genomeOf(3), FIDELITY, 11).extract(obs);
  assert.deepEqual(Array.from(a1), Array.from(a2));
  const b = new FeatureExtractor(genomeOf(9), FIDELITY, 11).extract(obs);
  assert.notDeepEqual(Array.from(a1), Array.from(b));
  assert.equal(a1[a1.length - 1], 1.0); // bias feature
});

test("every operator code decodes and runs", () => {
  const shape = toyObservationShape(FIDELITY);
  const env = new TrackingEnv(shape.h, shape.w, shape.c);
  const obs = env.reset(3);
  for (let code = 0; code <= 9; code++) {
    const features = new FeatureExtractor(genomeOf(code), FIDELITY, 5).extract(obs);
    assert.ok(features.every(Number.isFinite), `operator ${code} produced NaN`);
  }
});

test("reduction genome participates (3 toy cells, 2 reductions)", () => {
  const normal = genomeOf(0).normal;
  const a = new FeatureExtractor({ normal, reduction: genomeOf(3).normal },
    FIDELITY, 11);
  const b = new FeatureExtractor({ normal, reduction: genomeOf(9).normal },
    FIDELITY, 11);
  const shape = toyObservationShape(FIDELITY);
  const env = new TrackingEnv(shape.h, shape.w, shape.c);
  const obs = env.reset(7);
  assert.notDeepEqual(Array.from(a.extract(obs)), Array.from(b.extract(obs)));
});

test("episodes are deterministic and reward-bounded", () => {
  const env = new TrackingEnv(12, 12, 3);
  const trace = (seed: number) => {
    env.reset(seed);
    const rng = new Rng(seed);
    const rewards: number[] = [];
    for (;;) {
      const { reward, done } = env.step(rng.int(3));
      rewards.push(reward);
      if (done) return rewards;
    }
  };
  assert.deepEqual(trace(5), trace(5));
  const rewards = trace(6);
  assert.equal(rewards.length, EPISODE_STEPS);
  assert.ok(rewards.every((r) => r >= -1 && r <= 1));
});

test("the oracle tracker beats random play", () => {
  const env = new TrackingEnv(12, 12, 3);
  let oracleTotal = 0;
  let randomTotal = 0;
  for (let seed = 0; seed < 10; seed++) {
    env.reset(seed);
    for (;;) {
      const { reward, done } = env.step(env.oracleAction());
      oracleTotal += reward;
      if (done) break;
    }
    env.reset(seed);
    const rng = new Rng(seed + 1000);
    for (;;) {
      const { reward, done } = env.step(rng.int(3));
      randomTotal += reward;
      if (done) break;
    }
  }
  assert.ok(oracleTotal > randomTotal + 20,
    `oracle ${oracleTotal} vs random ${randomTotal}`);
});
