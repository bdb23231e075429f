import assert from "node:assert/strict";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";

import { loadExpert, saveExpert } from "../src/expert";
import { DEFAULT_HYPERPARAMS, RolloutStep, Sample, SoftmaxPolicy } from "../src/policy";
import { Rng } from "../src/rng";
import { zeros } from "../src/tensor";

function syntheticDataset(n: number, dim: number, seed: number): Sample[] {
  // action = argmax of three disjoint feature groups: linearly separable
  const rng = new Rng(seed);
  const data: Sample[] = [];
  for (let i = 0; i < n; i++) {
    const features = new Float32Array(dim);
    for (let d = 0; d < dim; d++) features[d] = rng.next();
    features[dim - 1] = 1;
    const groups = [features[0], features[1], features[2]];
    data.push({ features, action: groups.indexOf(Math.max(...groups)) });
  }
  return data;
}

test("behavior cloning strictly reduces imitation loss", () => {
  const data = syntheticDataset(120, 8, 3);
  const policy = new SoftmaxPolicy(8);
  const losses = policy.cloneFrom(data);
  assert.ok(Math.abs(losses[0] - Math.log(3)) < 1e-6, "zero init is uniform");
  assert.ok(losses[losses.length - 1] < losses[0]);
  for (let i = 1; i < losses.length; i++) assert.ok(losses[i] < losses[i - 1]);
});

test("clipped update pushes probability toward advantaged actions", () => {
  const policy = new SoftmaxPolicy(4);
  const features = new Float32Array([0.5, -0.2, 0.1, 1.0]);
  const before = policy.probs(features)[2];
  const batch: RolloutStep[] = [{
    features, action: 2, oldProb: policy.probs(features)[2], advantage: 1.0,
  }];
  for (let i = 0; i < 20; i++) {
    policy.clippedUpdate(batch, { ...DEFAULT_HYPERPARAMS, lr: 0.01 });
  }
  assert.ok(policy.probs(features)[2] > before);
});

test("clipping freezes the policy-gradient term once the ratio is out of range", () => {
  const policy = new SoftmaxPolicy(2);
  const features = new Float32Array([1, 1]);
  // oldProb tiny: ratio immediately above 1 + clip, so only entropy acts
  const batch: RolloutStep[] = [{ features, action: 0, oldProb: 1e-6, advantage: 5 }];
  policy.clippedUpdate(batch, { lr: 0.01, ppo_clip: 0.2, entropy: 0 });
  assert.ok(policy.weights.every((w) => w === 0));
});

test("expert files round-trip and cap on load", () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "expert-test-"));
  const file = path.join(dir, "e.bin");
  const frames = [];
  for (let i = 0; i < 5; i++) {
    const obs = zeros(3, 4, 2);
    obs.data[i] = i + 0.5;
    frames.push({ obs, action: i % 3 });
  }
  saveExpert(file, frames);
  const all = loadExpert(file, 100);
  assert.equal(all.length, 5);
  assert.equal(all[2].action, 2);
  assert.ok(Math.abs(all[3].obs.data[3] - 3.5) < 1e-6);
  assert.equal(all[0].obs.h, 3);
  const capped = loadExpert(file, 2);
  assert.equal(capped.length, 2);
  assert.throws(() => loadExpert(path.join(dir, "missing.bin"), 10));
  fs.writeFileSync(file, "not an expert file");
  assert.throws(() => loadExpert(file, 10), /not an expert dataset/);
});
