/**
 * NPFW weight file serializer, byte-compatible with the inference engine:
 * magic "NPFW", u32 version=1, u32 layer count, then per layer
 * u16 name length + UTF-8 name, u32 in/out/kh/kw, float32 LE kernel in
 * (out, in, kh, kw) order, float32 LE biases. Everything little-endian.
 */

import { LAYER_PLAN, NetworkParams } from "./network.js";

const MAGIC = "NPFW";
const VERSION = 1;

export function encodeWeights(params: NetworkParams): Buffer {
  const chunks: Buffer[] = [];
  const head = Buffer.alloc(12);
  head.write(MAGIC, 0, "ascii");
  head.writeUInt32LE(VERSION, 4);
  head.writeUInt32LE(LAYER_PLAN.length, 8);
  chunks.push(head);
  for (let i = 0; i < LAYER_PLAN.length; i++) {
    const spec = LAYER_PLAN[i];
    const name = Buffer.from(spec.name, "utf-8");
    const meta = Buffer.alloc(2 + name.length + 16);
    meta.writeUInt16LE(name.length, 0);
    name.copy(meta, 2);
    let off = 2 + name.length;
    meta.writeUInt32LE(spec.cin, off);
    meta.writeUInt32LE(spec.cout, off + 4);
    meta.writeUInt32LE(3, off + 8);
    meta.writeUInt32LE(3, off + 12);
    chunks.push(meta);
    const w = Float32Array.from(params.weights[i]);
    const b = Float32Array.from(params.biases[i]);
    chunks.push(Buffer.from(w.buffer, w.byteOffset, w.byteLength));
    chunks.push(Buffer.from(b.buffer, b.byteOffset, b.byteLength));
  }
  return Buffer.concat(chunks);
}

export function decodeWeights(buf: Buffer): NetworkParams {
  let off = 0;
  const need = (n: number, what: string) => {
    if (off + n > buf.length) throw new Error(`truncated NPFW file while reading ${what}`);
  };
  need(12, "header");
  if (buf.toString("ascii", 0, 4) !== MAGIC) throw new Error("bad magic, not an NPFW file");
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) throw new Error(`unsupported NPFW version ${version}`);
  const count = buf.readUInt32LE(8);
  if (count !== LAYER_PLAN.length) {
    throw new Error(`file declares ${count} layers, expected ${LAYER_PLAN.length}`);
  }
  off = 12;
  const weights: Float32Array[] = [];
  const biases: Float32Array[] = [];
  for (const spec of LAYER_PLAN) {
    need(2, "name length");
    const nameLen = buf.readUInt16LE(off);
    off += 2;
    need(nameLen + 16, `${spec.name} metadata`);
    const name = buf.toString("utf-8", off, off + nameLen);
    off += nameLen;
    if (name !== spec.name) throw new Error(`layer ${name} out of order, expected ${spec.name}`);
    const cin = buf.readUInt32LE(off);
    const cout = buf.readUInt32LE(off + 4);
    const kh = buf.readUInt32LE(off + 8);
    const kw = buf.readUInt32LE(off + 12);
    off += 16;
    if (cin !== spec.cin || cout !== spec.cout || kh !== 3 || kw !== 3) {
      throw new Error(`layer ${name} declares ${cin}/${cout} ${kh}x${kw}, expected ${spec.cin}/${spec.cout} 3x3`);
    }
    const nw = cout * cin * 9;
    need(4 * nw + 4 * cout, `${name} tensors`);
    weights.push(new Float32Array(buf.buffer.slice(buf.byteOffset + off, buf.byteOffset + off + 4 * nw)));
    off += 4 * nw;
    biases.push(new Float32Array(buf.buffer.slice(buf.byteOffset + off, buf.byteOffset + off + 4 * cout)));
    off += 4 * cout;
  }
  if (off !== buf.length) throw new Error(`${buf.length - off} trailing bytes after last layer`);
  return { weights, biases };
}
