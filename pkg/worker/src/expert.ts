/**
 * Expert dataset files: raw (observation, action) pairs saved by the
 * generation champion and replayed by the next generation for behavior
 * cloning. Binary layout, little-endian:
 *
 *   bytes 0-3   magic "EVOX"
 *   byte  4     format version (1)
 *   bytes 5-8   uint32 pair count
 *   bytes 9-14  uint16 h, w, c
 *   then        count * h*w*c float32 observations
 *   then        count uint8 actions
 *
 * Observations are stored raw (not features) so students with different
 * genomes can run their own extractors over them. The handle passed over
 * the wire is simply the absolute file path; the engine never reads it.
 */

import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { Tensor } from "./tensor";

const MAGIC = "EVOX";
const VERSION = 1;
const HEADER_BYTES = 4 + 1 + 4 + 6;

export interface ExpertFrame {
  obs: Tensor;
  action: number;
}

export function expertDir(): string {
  const dir = process.env.EVOARCH_EXPERT_DIR ??
    path.join(os.tmpdir(), "evoarch-experts");
  fs.mkdirSync(dir, { recursive: true });
  return dir;
}

export function saveExpert(filePath: string, frames: ExpertFrame[]): void {
  if (frames.length === 0) throw new Error("refusing to save an empty expert dataset");
  const { h, w, c } = frames[0].obs;
  const obsFloats = h * w * c;
  const buf = Buffer.alloc(HEADER_BYTES + frames.length * (obsFloats * 4 + 1));
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt8(VERSION, 4);
  buf.writeUInt32LE(frames.length, 5);
  buf.writeUInt16LE(h, 9);
  buf.writeUInt16LE(w, 11);
  buf.writeUInt16LE(c, 13);
  let offset = HEADER_BYTES;
  for (const frame of frames) {
    for (let i = 0; i < obsFloats; i++) {
      buf.writeFloatLE(frame.obs.data[i], offset);
      offset += 4;
    }
  }
  for (const frame of frames) {
    buf.writeUInt8(frame.action, offset);
    offset += 1;
  }
  fs.writeFileSync(filePath, buf);
}

export function loadExpert(filePath: string, maxPairs: number): ExpertFrame[] {
  const buf = fs.readFileSync(filePath);
  if (buf.length < HEADER_BYTES || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`not an expert dataset: ${filePath}`);
  }
  if (buf.readUInt8(4) !== VERSION) {
    throw new Error(`unsupported expert dataset version in ${filePath}`);
  }
  const count = buf.readUInt32LE(5);
  const h = buf.readUInt16LE(9);
  const w = buf.readUInt16LE(11);
  const c = buf.readUInt16LE(13);
  const obsFloats = h * w * c;
  const take = Math.min(count, maxPairs);
  const frames: ExpertFrame[] = [];
  const actionsBase = HEADER_BYTES + count * obsFloats * 4;
  for (let n = 0; n < take; n++) {
    const data = new Float32Array(obsFloats);
    let offset = HEADER_BYTES + n * obsFloats * 4;
    for (let i = 0; i < obsFloats; i++) {
      data[i] = buf.readFloatLE(offset);
      offset += 4;
    }
    frames.push({ obs: { h, w, c, data }, action: buf.readUInt8(actionsBase + n) });
  }
  return frames;
}
