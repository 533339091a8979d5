import { describe, expect, it } from "vitest";

import { maskedLoss } from "../src/loss.js";
import { Tensor, fromData, rng } from "../src/tensor.js";

function randImage(h: number, w: number, seed: number): Tensor {
  const u = rng(seed);
  const data = new Float64Array(3 * h * w).map(() => u());
  return fromData(data, 3, h, w);
}

describe("masked loss", () => {
  it("scores -1 for perfect reconstruction", () => {
    const img = randImage(16, 16, 1);
    const { loss, l1, ssim } = maskedLoss(img, img, new Float64Array(256));
    expect(l1).toBe(0);
    expect(ssim).toBeCloseTo(1.0, 6);
    expect(loss).toBeCloseTo(-1.0, 6);
  });

  it("rejects a fully masked image", () => {
    const img = randImage(4, 4, 2);
    expect(() => maskedLoss(img, img, new Float64Array(16).fill(1))).toThrow(/masked/);
  });

  it("ignores changes to either side inside the mask", () => {
    const gt = randImage(20, 20, 3);
    const out = fromData(gt.data.slice(), 3, 20, 20);
    const mask = new Float64Array(400);
    for (let y = 6; y < 12; y++) for (let x = 4; x < 14; x++) mask[y * 20 + x] = 1;
    const base = maskedLoss(out, gt, mask).loss;

    const u = rng(4);
    const outDirty = fromData(out.data.slice(), 3, 20, 20);
    const gtDirty = fromData(gt.data.slice(), 3, 20, 20);
    for (let c = 0; c < 3; c++) {
      for (let p = 0; p < 400; p++) {
        if (mask[p] > 0.5) {
          outDirty.data[c * 400 + p] = u();
          gtDirty.data[c * 400 + p] = u();
        }
      }
    }
    expect(maskedLoss(outDirty, gt, mask).loss).toBe(base);
    expect(maskedLoss(out, gtDirty, mask).loss).toBe(base);
    expect(maskedLoss(outDirty, gtDirty, mask).loss).toBe(base);
  });

  it("gradient matches central finite differences", () => {
    const gt = randImage(12, 12, 5);
    const u = rng(6);
    const out = fromData(new Float64Array(3 * 144).map(() => u()), 3, 12, 12);
    const mask = new Float64Array(144);
    mask[40] = mask[41] = mask[55] = 1;
    const { grad } = maskedLoss(out, gt, mask);
    const h = 1e-6;
    for (const idx of [0, 17, 40, 150, 290, 40 + 144, 41 + 288]) {
      const orig = out.data[idx];
      out.data[idx] = orig + h;
      const up = maskedLoss(out, gt, mask).loss;
      out.data[idx] = orig - h;
      const down = maskedLoss(out, gt, mask).loss;
      out.data[idx] = orig;
      const fd = (up - down) / (2 * h);
      expect(grad.data[idx]).toBeCloseTo(fd, 5);
    }
  });

  it("zero gradient inside the mask", () => {
    const gt = randImage(8, 8, 7);
    const out = randImage(8, 8, 8);
    const mask = new Float64Array(64);
    mask[10] = mask[27] = 1;
    const { grad } = maskedLoss(out, gt, mask);
    for (const p of [10, 27]) {
      for (let c = 0; c < 3; c++) expect(grad.data[c * 64 + p]).toBe(0);
    }
  });
});
