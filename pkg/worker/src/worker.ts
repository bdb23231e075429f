/**
 * Reference evaluation worker. Speaks the engine's NDJSON protocol on
 * stdin/stdout: after an init message it answers each evaluate request
 * with exactly one result (or error) and exits cleanly on shutdown.
 *
 * Per evaluation: decode the genome into a toy-scale feature extractor,
 * optionally warm-start the policy head by behavior cloning from the
 * teacher's expert dataset, train for fidelity.epochs episodes on the
 * tracking task with clipped policy-gradient updates, report the mean
 * reward of the final episodes, and save this policy's own greedy
 * (observation, action) pairs as the next expert dataset.
 */

import * as path from "path";

import { EPISODE_STEPS, TrackingEnv } from "./env";
import { ExpertFrame, expertDir, loadExpert, saveExpert } from "./expert";
import { FeatureExtractor, toyObservationShape } from "./network";
import {
  DEFAULT_HYPERPARAMS,
  Hyperparams,
  RolloutStep,
  SoftmaxPolicy,
} from "./policy";
import {
  EvaluateMessage,
  InitMessage,
  LineBuffer,
  parseEngineMessage,
  serialize,
} from "./protocol";
import { Rng, hashSeed } from "./rng";

const EXPERT_EPISODES = 8;
const REWARD_WINDOW = 5;
const UPDATE_EPOCHS = 2;
const BC_STEPS = 25;

function rollout(
  env: TrackingEnv, extractor: FeatureExtractor, policy: SoftmaxPolicy,
  seed: number, sampled: boolean,
): { steps: RolloutStep[]; total: number; frames: ExpertFrame[] } {
  const rng = new Rng(hashSeed(seed, "actions"));
  let obs = env.reset(seed);
  const steps: RolloutStep[] = [];
  const frames: ExpertFrame[] = [];
  const rewards: number[] = [];
  let total = 0;
  for (;;) {
    const features = extractor.extract(obs);
    const action = sampled ? policy.sample(features, rng) : policy.greedy(features);
    frames.push({ obs, action });
    const oldProb = policy.probs(features)[action];
    const { obs: next, reward, done } = env.step(action);
    steps.push({ features, action, oldProb, advantage: 0 });
    rewards.push(reward);
    total += reward;
    obs = next;
    if (done) break;
  }
  // returns-to-go against the episode mean as baseline
  let suffix = 0;
  const returns = new Array<number>(rewards.length);
  for (let i = rewards.length - 1; i >= 0; i--) {
    suffix += rewards[i];
    returns[i] = suffix;
  }
  const mean = returns.reduce((a, b) => a + b, 0) / returns.length;
  for (let i = 0; i < steps.length; i++) steps[i].advantage = returns[i] - mean;
  return { steps, total, frames };
}

function evaluate(msg: EvaluateMessage, init: InitMessage): {
  reward: number;
  expertHandle: string;
  metrics: Record<string, number>;
} {
  const fidelity = init.fidelity;
  const shape = toyObservationShape(fidelity);
  const extractor = new FeatureExtractor(msg.genome, fidelity, init.run_seed);
  const policy = new SoftmaxPolicy(extractor.featureDim);
  const env = new TrackingEnv(shape.h, shape.w, shape.c);
  const metrics: Record<string, number> = {};

  const hp: Hyperparams = { ...DEFAULT_HYPERPARAMS };
  if (msg.transfer !== null) {
    for (const key of ["lr", "ppo_clip", "entropy"] as const) {
      const v = msg.transfer.hyperparams[key];
      if (typeof v === "number" && v > 0) hp[key] = v;
    }
    const frames = loadExpert(msg.transfer.expert_handle, msg.transfer.expert_pairs);
    const data = frames.map((f) => ({
      features: extractor.extract(f.obs),
      action: f.action,
    }));
    const losses = policy.cloneFrom(data, BC_STEPS);
    metrics.bc_pairs = frames.length;
    metrics.bc_loss_before = losses[0];
    metrics.bc_loss_after = losses[losses.length - 1];
  }
  metrics.lr = hp.lr;
  metrics.ppo_clip = hp.ppo_clip;
  metrics.entropy = hp.entropy;

  const totals: number[] = [];
  for (let episode = 0; episode < fidelity.epochs; episode++) {
    const seed = hashSeed(msg.seed, "episode", episode);
    const { steps, total } = rollout(env, extractor, policy, seed, true);
    for (let e = 0; e < UPDATE_EPOCHS; e++) policy.clippedUpdate(steps, hp);
    totals.push(total);
  }
  const window = Math.min(REWARD_WINDOW, totals.length);
  const reward = totals.slice(-window).reduce((a, b) => a + b, 0) / window;
  metrics.episodes = totals.length;
  metrics.first_episode_reward = totals[0];
  metrics.last_episode_reward = totals[totals.length - 1];

  const frames: ExpertFrame[] = [];
  for (let episode = 0; episode < EXPERT_EPISODES; episode++) {
    const seed = hashSeed(msg.seed, "expert", episode);
    frames.push(...rollout(env, extractor, policy, seed, false).frames);
  }
  const cap = Math.min(frames.length, 12000);
  const handle = path.join(expertDir(), `${msg.id}-${(msg.seed >>> 0).toString(16)}.bin`);
  saveExpert(handle, frames.slice(0, cap));
  metrics.expert_pairs_saved = cap;

  return { reward, expertHandle: handle, metrics };
}

export function serve(): void {
  const buffer = new LineBuffer();
  let init: InitMessage | null = null;

  const emit = (msg: Parameters<typeof serialize>[0]) => {
    process.stdout.write(serialize(msg) + "\n");
  };

  process.stdin.setEncoding("utf8");
  process.stdin.on("data", (chunk: string) => {
    for (const line of buffer.push(chunk)) {
      let msg;
      try {
        msg = parseEngineMessage(line);
      } catch (e) {
        emit({ type: "error", id: "", message: (e as Error).message });
        continue;
      }
      if (msg.type === "init") {
        init = msg;
        continue;
      }
      if (msg.type === "shutdown") {
        process.stdin.destroy();
        process.exitCode = 0;
        return;
      }
      if (init === null) {
        emit({ type: "error", id: msg.id, message: "evaluate before init" });
        continue;
      }
      const started = Date.now();
      try {
        const { reward, expertHandle, metrics } = evaluate(msg, init);
        emit({
          type: "result", id: msg.id, reward,
          expert_handle: expertHandle, metrics,
          wall_seconds: (Date.now() - started) / 1000,
        });
      } catch (e) {
        emit({ type: "error", id: msg.id, message: (e as Error).message });
      }
    }
  });
  process.stdin.on("end", () => {
    process.exitCode = 0;
  });
}

if (require.main === module) {
  serve();
}
