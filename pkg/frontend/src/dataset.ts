/**
 * Dataset access: the synthesis pipeline's dataset directory (manifest +
 * ground-truth eye PNGs) joined with an intermediates directory holding
 * the per-eye filtered views F_left/F_right (3-channel PFM) and the
 * pipeline's full-disocclusion mask M_full (PFM).
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { decodePfm, pfmToTensor } from "./pfm.js";
import { decodePng } from "./png.js";
import { Tensor } from "./tensor.js";

export interface TrainSample {
  caseName: string;
  eye: "eye_l" | "eye_r";
  fLeft: Tensor;
  fRight: Tensor;
  mask: Float32Array; // (h*w), 1 = fully disoccluded
  gt: Tensor;
}

export interface Dataset {
  samples: TrainSample[];
  h: number;
  w: number;
}

export function loadDataset(datasetDir: string, intermediatesDir: string): Dataset {
  const manifestPath = path.join(datasetDir, "manifest.json");
  const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  if (!Array.isArray(manifest.cases) || manifest.cases.length === 0) {
    throw new Error(`${manifestPath}: no cases in manifest`);
  }
  const samples: TrainSample[] = [];
  let h = 0;
  let w = 0;
  for (const c of manifest.cases) {
    for (const eye of ["eye_l", "eye_r"] as const) {
      const edir = path.join(intermediatesDir, c.name, eye);
      const fLeft = pfmToTensor(decodePfm(fs.readFileSync(path.join(edir, "F_left.pfm"))));
      const fRight = pfmToTensor(decodePfm(fs.readFileSync(path.join(edir, "F_right.pfm"))));
      const maskImg = decodePfm(fs.readFileSync(path.join(edir, "M_full.pfm")));
      const gt = decodePng(fs.readFileSync(path.join(datasetDir, c.name, `${eye}_gt.png`)));
      if (fLeft.c !== 3 || fRight.c !== 3) throw new Error(`${edir}: filtered views must be 3-channel`);
      if (maskImg.channels !== 1) throw new Error(`${edir}: mask must be single-channel`);
      if (gt.h !== fLeft.h || gt.w !== fLeft.w || maskImg.h !== fLeft.h) {
        throw new Error(`${c.name}/${eye}: size mismatch between dataset and intermediates`);
      }
      samples.push({ caseName: c.name, eye, fLeft, fRight, mask: maskImg.data, gt });
      h = gt.h;
      w = gt.w;
    }
  }
  return { samples, h, w };
}

/** Crop (c, h, w) tensors and the mask to a window at (y0, x0). */
export function cropSample(s: TrainSample, y0: number, x0: number, size: number): TrainSample {
  const pick = (t: Tensor): Tensor => {
    const out = new Float32Array(t.c * size * size);
    for (let c = 0; c < t.c; c++) {
      for (let y = 0; y < size; y++) {
        const src = c * t.h * t.w + (y0 + y) * t.w + x0;
        out.set(t.data.subarray(src, src + size) as Float32Array, c * size * size + y * size);
      }
    }
    return { data: out, c: t.c, h: size, w: size };
  };
  const mask = new Float32Array(size * size);
  for (let y = 0; y < size; y++) {
    const src = (y0 + y) * s.fLeft.w + x0;
    mask.set(s.mask.subarray(src, src + size), y * size);
  }
  return {
    caseName: s.caseName,
    eye: s.eye,
    fLeft: pick(s.fLeft),
    fRight: pick(s.fRight),
    mask,
    gt: pick(s.gt),
  };
}
