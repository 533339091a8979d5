/**
 * Channels-first (c, h, w) tensors over flat typed arrays.
 *
 * Float32Array is the training dtype (matches the NPFW weight format);
 * Float64Array is used by the finite-difference gradient checks, where
 * float32 rounding would drown the difference quotients.
 */

export type FloatArray = Float32Array | Float64Array;

export interface Tensor {
  data: FloatArray;
  c: number;
  h: number;
  w: number;
}

export type ArrayCtor = Float32ArrayConstructor | Float64ArrayConstructor;

export function zeros(c: number, h: number, w: number, ctor: ArrayCtor = Float32Array): Tensor {
  return { data: new ctor(c * h * w), c, h, w };
}

export function fromData(data: FloatArray, c: number, h: number, w: number): Tensor {
  if (data.length !== c * h * w) {
    throw new Error(`tensor data length ${data.length} != ${c}x${h}x${w}`);
  }
  return { data, c, h, w };
}

export function clone(t: Tensor): Tensor {
  return { data: t.data.slice(), c: t.c, h: t.h, w: t.w };
}

export function ctorOf(t: Tensor): ArrayCtor {
  return t.data instanceof Float64Array ? Float64Array : Float32Array;
}

export function assertSameShape(a: Tensor, b: Tensor, what: string): void {
  if (a.c !== b.c || a.h !== b.h || a.w !== b.w) {
    throw new Error(`${what}: shape (${a.c},${a.h},${a.w}) vs (${b.c},${b.h},${b.w})`);
  }
}

/** Mulberry32: tiny deterministic PRNG for init and crop sampling. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Standard normal via Box-Muller on the given uniform source. */
export function gaussian(uniform: () => number): () => number {
  let spare: number | null = null;
  return () => {
    if (spare !== null) {
      const v = spare;
      spare = null;
      return v;
    }
    let u = 0;
    let v = 0;
    while (u === 0) u = uniform();
    v = uniform();
    const r = Math.sqrt(-2.0 * Math.log(u));
    spare = r * Math.sin(2.0 * Math.PI * v);
    return r * Math.cos(2.0 * Math.PI * v);
  };
}
