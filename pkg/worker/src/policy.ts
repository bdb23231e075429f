/**
 * Linear softmax policy head over extracted features, with two trainers:
 * full-batch behavior cloning (gradient descent with backtracking, so the
 * loss strictly decreases whenever the gradient is nonzero) and a clipped
 * policy-gradient update in the PPO style for the rollout loop.
 */

import { N_ACTIONS } from "./env";
import { Rng } from "./rng";

export interface Hyperparams {
  lr: number;
  ppo_clip: number;
  entropy: number;
}

export const DEFAULT_HYPERPARAMS: Hyperparams = { lr: 3e-4, ppo_clip: 0.2, entropy: 0.01 };

/**
 * The engine forwards simulator-scale learning rates; the toy head needs
 * proportionally larger steps, so the raw lr is scaled by a constant and
 * every decayed lr still shifts the effective step the same way.
 */
export const LR_SCALE = 200;

export interface Sample {
  features: Float32Array;
  action: number;
}

export interface RolloutStep extends Sample {
  oldProb: number;
  advantage: number;
}

export class SoftmaxPolicy {
  weights: Float32Array; // N_ACTIONS x featureDim, row-major

  constructor(readonly featureDim: number) {
    this.weights = new Float32Array(N_ACTIONS * featureDim);
  }

  probs(features: Float32Array): Float32Array {
    const logits = new Float32Array(N_ACTIONS);
    for (let a = 0; a < N_ACTIONS; a++) {
      let acc = 0;
      const row = a * this.featureDim;
      for (let i = 0; i < this.featureDim; i++) acc += this.weights[row + i] * features[i];
      logits[a] = acc;
    }
    const top = Math.max(...logits);
    let z = 0;
    const out = new Float32Array(N_ACTIONS);
    for (let a = 0; a < N_ACTIONS; a++) {
      out[a] = Math.exp(logits[a] - top);
      z += out[a];
    }
    for (let a = 0; a < N_ACTIONS; a++) out[a] /= z;
    return out;
  }

  sample(features: Float32Array, rng: Rng): number {
    const p = this.probs(features);
    const u = rng.next();
    let acc = 0;
    for (let a = 0; a < N_ACTIONS; a++) {
      acc += p[a];
      if (u < acc) return a;
    }
    return N_ACTIONS - 1;
  }

  greedy(features: Float32Array): number {
    const p = this.probs(features);
    let best = 0;
    for (let a = 1; a < N_ACTIONS; a++) if (p[a] > p[best]) best = a;
    return best;
  }

  /** Mean cross-entropy of the dataset under the current head. */
  imitationLoss(data: Sample[]): number {
    let loss = 0;
    for (const { features, action } of data) {
      loss += -Math.log(Math.max(this.probs(features)[action], 1e-12));
    }
    return loss / data.length;
  }

  private imitationGradient(data: Sample[]): Float32Array {
    const grad = new Float32Array(this.weights.length);
    for (const { features, action } of data) {
      const p = this.probs(features);
      for (let a = 0; a < N_ACTIONS; a++) {
        const coeff = (p[a] - (a === action ? 1 : 0)) / data.length;
        const row = a * this.featureDim;
        for (let i = 0; i < this.featureDim; i++) grad[row + i] += coeff * features[i];
      }
    }
    return grad;
  }

  /**
   * Full-batch gradient descent with backtracking line search; returns the
   * loss trajectory. Each accepted step strictly reduces the loss.
   */
  cloneFrom(data: Sample[], steps = 25, initialStep = 2.0): number[] {
    const losses = [this.imitationLoss(data)];
    for (let s = 0; s < steps; s++) {
      const grad = this.imitationGradient(data);
      let stepSize = initialStep;
      const before = losses[losses.length - 1];
      const snapshot = this.weights.slice();
      let accepted = false;
      for (let tries = 0; tries < 10; tries++) {
        for (let i = 0; i < this.weights.length; i++) {
          this.weights[i] = snapshot[i] - stepSize * grad[i];
        }
        const after = this.imitationLoss(data);
        if (after < before) {
          losses.push(after);
          accepted = true;
          break;
        }
        stepSize /= 2;
      }
      if (!accepted) {
        this.weights = snapshot;
        break;
      }
    }
    return losses;
  }

  /** One clipped policy-gradient ascent step over a rollout batch. */
  clippedUpdate(batch: RolloutStep[], hp: Hyperparams): void {
    const grad = new Float32Array(this.weights.length);
    const lr = hp.lr * LR_SCALE;
    for (const { features, action, oldProb, advantage } of batch) {
      const p = this.probs(features);
      const ratio = p[action] / Math.max(oldProb, 1e-12);
      const clippedOut =
        (advantage >= 0 && ratio > 1 + hp.ppo_clip) ||
        (advantage < 0 && ratio < 1 - hp.ppo_clip);
      let entropy = 0;
      for (let a = 0; a < N_ACTIONS; a++) entropy -= p[a] * Math.log(Math.max(p[a], 1e-12));
      for (let a = 0; a < N_ACTIONS; a++) {
        let coeff = 0;
        if (!clippedOut) {
          // d(ratio*A)/dlogit_a for the sampled action's ratio
          coeff += advantage * ratio * ((a === action ? 1 : 0) - p[a]);
        }
        coeff += -hp.entropy * p[a] * (Math.log(Math.max(p[a], 1e-12)) + entropy);
        const row = a * this.featureDim;
        for (let i = 0; i < this.featureDim; i++) {
          grad[row + i] += (coeff * features[i]) / batch.length;
        }
      }
    }
    for (let i = 0; i < this.weights.length; i++) this.weights[i] += lr * grad[i];
  }
}
