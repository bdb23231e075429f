/**
 * Wire protocol shared with the engine: one JSON object per line over
 * stdin/stdout. Field names are fixed; every evaluate request is answered
 * by exactly one result or error carrying the same id.
 */

export interface WireFidelity {
  epochs: number;
  input: [number, number, number]; // height, width, channels
  cells: number;
  blocks: number;
  init_channels: number;
  head_output_dim: number;
}

export type WireGene = [number, number]; // operator code, input index
export type WireCell = WireGene[][]; // blocks of two genes

export interface WireGenome {
  normal: WireCell;
  reduction: WireCell;
}

export interface WireTransfer {
  teacher: string;
  expert_handle: string;
  expert_pairs: number;
  hyperparams: Record<string, number>;
}

export interface InitMessage {
  type: "init";
  protocol_version: number;
  fidelity: WireFidelity;
  run_seed: number;
}

export interface EvaluateMessage {
  type: "evaluate";
  id: string;
  seed: number;
  genome: WireGenome;
  transfer: WireTransfer | null;
}

export interface ShutdownMessage {
  type: "shutdown";
}

export type EngineMessage = InitMessage | EvaluateMessage | ShutdownMessage;

export interface ResultMessage {
  type: "result";
  id: string;
  reward: number;
  expert_handle: string | null;
  metrics: Record<string, number>;
  wall_seconds: number;
}

export interface ErrorMessage {
  type: "error";
  id: string;
  message: string;
}

export function parseEngineMessage(line: string): EngineMessage {
  let msg: unknown;
  try {
    msg = JSON.parse(line);
  } catch (e) {
    throw new Error(`not valid JSON: ${line.slice(0, 120)}`);
  }
  if (typeof msg !== "object" || msg === null || !("type" in msg)) {
    throw new Error("message without a type field");
  }
  const type = (msg as { type: unknown }).type;
  if (type !== "init" && type !== "evaluate" && type !== "shutdown") {
    throw new Error(`unknown message type ${String(type)}`);
  }
  return msg as EngineMessage;
}

export function serialize(msg: ResultMessage | ErrorMessage): string {
  return JSON.stringify(msg);
}

/** Split an incoming chunk stream into newline-delimited frames. */
export class LineBuffer {
  private pending = "";

  push(chunk: string): string[] {
    this.pending += chunk;
    const parts = this.pending.split("\n");
    this.pending = parts.pop() ?? "";
    return parts.filter((p) => p.trim().length > 0);
  }
}
