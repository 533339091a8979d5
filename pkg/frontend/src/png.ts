/**
 * Minimal PNG decoder for the dataset's ground-truth images: 8-bit RGB or
 * RGBA, non-interlaced, using node's zlib for the IDAT stream. Decoded
 * sRGB values are converted to linear light, matching the pipeline's
 * in-memory color convention.
 */

import * as zlib from "node:zlib";

import { Tensor, fromData } from "./tensor.js";

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export function srgbToLinear(v: number): number {
  const c = v / 255;
  return c <= 0.04045 ? c / 12.92 : Math.pow((c + 0.055) / 1.055, 2.4);
}

/** Decode an 8-bit RGB(A) PNG to a linear-light (3, h, w) tensor. */
export function decodePng(buf: Buffer): Tensor {
  if (!buf.subarray(0, 8).equals(SIGNATURE)) throw new Error("not a PNG file");
  let off = 8;
  let w = 0;
  let h = 0;
  let colorType = -1;
  const idat: Buffer[] = [];
  while (off < buf.length) {
    const len = buf.readUInt32BE(off);
    const type = buf.toString("ascii", off + 4, off + 8);
    const body = buf.subarray(off + 8, off + 8 + len);
    if (type === "IHDR") {
      w = body.readUInt32BE(0);
      h = body.readUInt32BE(4);
      const bitDepth = body.readUInt8(8);
      colorType = body.readUInt8(9);
      const interlace = body.readUInt8(12);
      if (bitDepth !== 8) throw new Error(`unsupported PNG bit depth ${bitDepth}`);
      if (colorType !== 2 && colorType !== 6) {
        throw new Error(`unsupported PNG color type ${colorType}`);
      }
      if (interlace !== 0) throw new Error("interlaced PNG not supported");
    } else if (type === "IDAT") {
      idat.push(body);
    } else if (type === "IEND") {
      break;
    }
    off += 12 + len;
  }
  if (!w || !h) throw new Error("PNG missing IHDR");
  const bpp = colorType === 6 ? 4 : 3;
  const raw = zlib.inflateSync(Buffer.concat(idat));
  const stride = w * bpp;
  if (raw.length < h * (stride + 1)) throw new Error("truncated PNG pixel data");

  const pixels = Buffer.alloc(h * stride);
  for (let y = 0; y < h; y++) {
    const filter = raw[y * (stride + 1)];
    const src = y * (stride + 1) + 1;
    const dst = y * stride;
    for (let i = 0; i < stride; i++) {
      const rawV = raw[src + i];
      const left = i >= bpp ? pixels[dst + i - bpp] : 0;
      const up = y > 0 ? pixels[dst - stride + i] : 0;
      const ul = y > 0 && i >= bpp ? pixels[dst - stride + i - bpp] : 0;
      let v: number;
      switch (filter) {
        case 0: v = rawV; break;
        case 1: v = rawV + left; break;
        case 2: v = rawV + up; break;
        case 3: v = rawV + ((left + up) >> 1); break;
        case 4: v = rawV + paeth(left, up, ul); break;
        default: throw new Error(`unknown PNG filter ${filter}`);
      }
      pixels[dst + i] = v & 0xff;
    }
  }

  const lut = new Float32Array(256);
  for (let i = 0; i < 256; i++) lut[i] = srgbToLinear(i);
  const out = new Float32Array(3 * h * w);
  for (let y = 0; y < h; y++) {
    for (let j = 0; j < w; j++) {
      const p = y * stride + j * bpp;
      out[0 * h * w + y * w + j] = lut[pixels[p]];
      out[1 * h * w + y * w + j] = lut[pixels[p + 1]];
      out[2 * h * w + y * w + j] = lut[pixels[p + 2]];
    }
  }
  return fromData(out, 3, h, w);
}
