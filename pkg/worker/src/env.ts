/**
 * Toy control task: keep the agent column aligned with a drifting target.
 *
 * Observations are small HxWxC images (target column, agent column, and a
 * fixed vertical gradient as texture), actions are {left, stay, right},
 * and the per-step reward is 1 - 2*|agent - target|/(W-1), so a perfect
 * tracker earns +1 per step and the worst possible policy -1. Episodes
 * are fully deterministic given their seed.
 */

import { Rng } from "./rng";
import { Tensor, zeros } from "./tensor";

export const N_ACTIONS = 3;
export const EPISODE_STEPS = 20;

export class TrackingEnv {
  private target = 0;
  private agent = 0;
  private step_ = 0;
  private rng = new Rng(0);

  constructor(readonly h: number, readonly w: number, readonly c: number) {}

  reset(seed: number): Tensor {
    this.rng = new Rng(seed);
    this.target = this.rng.int(this.w);
    this.agent = Math.floor(this.w / 2);
    this.step_ = 0;
    return this.render();
  }

  /** Apply an action; returns the next observation, reward, done flag. */
  step(action: number): { obs: Tensor; reward: number; done: boolean } {
    if (action < 0 || action >= N_ACTIONS) throw new Error(`bad action ${action}`);
    this.agent = Math.min(this.w - 1, Math.max(0, this.agent + (action - 1)));
    const drift = this.rng.next();
    if (drift < 0.35) this.target = Math.max(0, this.target - 1);
    else if (drift > 0.65) this.target = Math.min(this.w - 1, this.target + 1);
    this.step_ += 1;
    const reward = 1 - (2 * Math.abs(this.agent - this.target)) / (this.w - 1);
    return { obs: this.render(), reward, done: this.step_ >= EPISODE_STEPS };
  }

  /** Greedy-optimal action for the current state (expert baseline). */
  oracleAction(): number {
    if (this.target < this.agent) return 0;
    if (this.target > this.agent) return 2;
    return 1;
  }

  private render(): Tensor {
    const obs = zeros(this.h, this.w, this.c);
    for (let y = 0; y < this.h; y++) {
      for (let x = 0; x < this.w; x++) {
        const base = (y * this.w + x) * this.c;
        if (x === this.target) obs.data[base] = 1;
        else if (Math.abs(x - this.target) === 1) obs.data[base] = 0.4;
        if (this.c > 1 && x === this.agent) obs.data[base + 1] = 1;
        if (this.c > 2) obs.data[base + 2] = y / Math.max(1, this.h - 1);
      }
    }
    return obs;
  }
}
