/**
 * PFM reader/writer (little-endian, scale -1.0, bottom-to-top scanlines).
 * "Pf" single-channel maps and "PF" 3-channel maps; 3-channel data is
 * returned channels-first (c, h, w).
 */

import { Tensor, fromData } from "./tensor.js";

export interface PfmImage {
  channels: 1 | 3;
  h: number;
  w: number;
  /** (h*w) for Pf; channels-first (3*h*w) for PF, rows top-to-bottom. */
  data: Float32Array;
}

export function decodePfm(buf: Buffer): PfmImage {
  const nl1 = buf.indexOf(0x0a);
  const nl2 = buf.indexOf(0x0a, nl1 + 1);
  const nl3 = buf.indexOf(0x0a, nl2 + 1);
  if (nl1 < 0 || nl2 < 0 || nl3 < 0) throw new Error("malformed PFM header");
  const magic = buf.toString("ascii", 0, nl1);
  const channels = magic === "Pf" ? 1 : magic === "PF" ? 3 : 0;
  if (!channels) throw new Error(`unknown PFM magic ${magic}`);
  const [w, h] = buf
    .toString("ascii", nl1 + 1, nl2)
    .split(/\s+/)
    .map((v) => parseInt(v, 10));
  const scale = parseFloat(buf.toString("ascii", nl2 + 1, nl3));
  const count = w * h * channels;
  const payload = buf.subarray(nl3 + 1);
  if (payload.length < 4 * count) {
    throw new Error(`PFM payload has ${payload.length / 4} floats, expected ${count}`);
  }
  const raw = new Float32Array(count);
  const littleEndian = scale < 0;
  const view = new DataView(payload.buffer, payload.byteOffset, 4 * count);
  for (let i = 0; i < count; i++) raw[i] = view.getFloat32(4 * i, littleEndian);

  // flip bottom-to-top rows and, for PF, interleaved RGB -> channels-first
  const data = new Float32Array(count);
  for (let y = 0; y < h; y++) {
    const src = (h - 1 - y) * w * channels;
    if (channels === 1) {
      data.set(raw.subarray(src, src + w), y * w);
    } else {
      for (let j = 0; j < w; j++) {
        for (let c = 0; c < 3; c++) data[c * h * w + y * w + j] = raw[src + j * 3 + c];
      }
    }
  }
  return { channels: channels as 1 | 3, h, w, data };
}

export function encodePfm(img: PfmImage): Buffer {
  const { channels, h, w, data } = img;
  const header = Buffer.from(`${channels === 1 ? "Pf" : "PF"}\n${w} ${h}\n-1.0\n`, "ascii");
  const raw = new Float32Array(w * h * channels);
  for (let y = 0; y < h; y++) {
    const dst = (h - 1 - y) * w * channels;
    if (channels === 1) {
      raw.set(data.subarray(y * w, (y + 1) * w), dst);
    } else {
      for (let j = 0; j < w; j++) {
        for (let c = 0; c < 3; c++) raw[dst + j * 3 + c] = data[c * h * w + y * w + j];
      }
    }
  }
  return Buffer.concat([header, Buffer.from(raw.buffer)]);
}

export function pfmToTensor(img: PfmImage): Tensor {
  return fromData(img.data, img.channels, img.h, img.w);
}
