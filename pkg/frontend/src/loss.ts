/**
 * Training objective: 10 * masked-mean L1  -  masked-mean SSIM.
 *
 * Pixels inside the full-disocclusion mask must contribute nothing: both
 * the prediction and the reference are replaced by zero there before any
 * window statistics are computed, so the loss (and its gradient) is
 * exactly invariant to content on either side within the mask. Perfect
 * reconstruction scores -1. SSIM uses an 11x11 Gaussian window
 * (sigma 1.5) with zero-padded borders, which keeps the window operator
 * self-adjoint for the analytic gradient.
 */

import { Tensor, ctorOf, zeros } from "./tensor.js";

const C1 = 0.01 * 0.01;
const C2 = 0.03 * 0.03;
const WIN = 11;
const SIGMA = 1.5;

function gaussian1d(): Float64Array {
  const r = (WIN - 1) / 2;
  const g = new Float64Array(WIN);
  let sum = 0;
  for (let i = 0; i < WIN; i++) {
    g[i] = Math.exp(-((i - r) * (i - r)) / (2 * SIGMA * SIGMA));
    sum += g[i];
  }
  for (let i = 0; i < WIN; i++) g[i] /= sum;
  return g;
}

const G1D = gaussian1d();

/** Separable zero-padded correlation with the Gaussian window (h, w plane). */
function blur(x: Float64Array, h: number, w: number): Float64Array {
  const r = (WIN - 1) / 2;
  const tmp = new Float64Array(h * w);
  for (let y = 0; y < h; y++) {
    const row = y * w;
    for (let j = 0; j < w; j++) {
      let acc = 0;
      const lo = Math.max(-r, -j);
      const hi = Math.min(r, w - 1 - j);
      for (let k = lo; k <= hi; k++) acc += G1D[k + r] * x[row + j + k];
      tmp[row + j] = acc;
    }
  }
  const out = new Float64Array(h * w);
  for (let j = 0; j < w; j++) {
    for (let y = 0; y < h; y++) {
      let acc = 0;
      const lo = Math.max(-r, -y);
      const hi = Math.min(r, h - 1 - y);
      for (let k = lo; k <= hi; k++) acc += G1D[k + r] * tmp[(y + k) * w + j];
      out[y * w + j] = acc;
    }
  }
  return out;
}

export interface LossResult {
  loss: number;
  l1: number;
  ssim: number;
  /** dLoss/dOut, zero inside the mask. */
  grad: Tensor;
}

/**
 * out, gt: (3, h, w); mask: (h, w) with 1 marking excluded pixels.
 * Returns the scalar loss plus its gradient with respect to `out`.
 */
export function maskedLoss(out: Tensor, gt: Tensor, mask: Float32Array | Float64Array): LossResult {
  const { c, h, w } = out;
  if (gt.c !== c || gt.h !== h || gt.w !== w) throw new Error("loss shape mismatch");
  if (mask.length !== h * w) throw new Error("mask size mismatch");
  const hw = h * w;
  let keepCount = 0;
  for (let p = 0; p < hw; p++) if (mask[p] <= 0.5) keepCount++;
  if (keepCount === 0) throw new Error("loss undefined: every pixel masked");

  const grad = zeros(c, h, w, ctorOf(out));
  const gd = grad.data;

  // L1 over unmasked pixels and channels, on zero-neutralized values
  // (inside the mask both sides are zero, and excluded anyway)
  let l1 = 0;
  const l1Scale = 10.0 / (keepCount * c);
  for (let ci = 0; ci < c; ci++) {
    const base = ci * hw;
    for (let p = 0; p < hw; p++) {
      if (mask[p] > 0.5) continue;
      const d = out.data[base + p] - gt.data[base + p];
      l1 += Math.abs(d);
      gd[base + p] = d > 0 ? l1Scale : d < 0 ? -l1Scale : 0;
    }
  }
  l1 /= keepCount * c;

  // SSIM per channel on neutralized planes; accumulate the masked mean and
  // the analytic gradient
  let ssimSum = 0;
  const kWeight = 1.0 / (keepCount * c); // objective weight per (pixel, channel)
  for (let ci = 0; ci < c; ci++) {
    const base = ci * hw;
    const x = new Float64Array(hw);
    const y = new Float64Array(hw);
    for (let p = 0; p < hw; p++) {
      if (mask[p] <= 0.5) {
        x[p] = out.data[base + p];
        y[p] = gt.data[base + p];
      }
    }
    const xx = new Float64Array(hw);
    const yy = new Float64Array(hw);
    const xy = new Float64Array(hw);
    for (let p = 0; p < hw; p++) {
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const mx = blur(x, h, w);
    const my = blur(y, h, w);
    const gxx = blur(xx, h, w);
    const gyy = blur(yy, h, w);
    const gxy = blur(xy, h, w);

    const dmu = new Float64Array(hw); // k * dS/dmu_x
    const dsx = new Float64Array(hw); // k * dS/dsigma_x2
    const dxy = new Float64Array(hw); // k * dS/dsigma_xy
    for (let p = 0; p < hw; p++) {
      const sx2 = gxx[p] - mx[p] * mx[p];
      const sy2 = gyy[p] - my[p] * my[p];
      const sxy = gxy[p] - mx[p] * my[p];
      const a1 = 2 * mx[p] * my[p] + C1;
      const a2 = 2 * sxy + C2;
      const b1 = mx[p] * mx[p] + my[p] * my[p] + C1;
      const b2 = sx2 + sy2 + C2;
      const s = (a1 * a2) / (b1 * b2);
      if (mask[p] <= 0.5) {
        ssimSum += s / c;
        const k = -kWeight; // loss subtracts the SSIM term
        dmu[p] = k * ((2 * my[p] * a2) / (b1 * b2) - (2 * mx[p] * a1 * a2) / (b1 * b1 * b2));
        dsx[p] = k * (-s / b2);
        dxy[p] = k * ((2 * a1) / (b1 * b2));
      }
    }
    // sigma_x2 = G(x^2) - mu_x^2 and sigma_xy = G(xy) - mu_x mu_y, so
    // d/dx = G*[dmu - 2 mu_x dsx - mu_y dxy] + 2x G*[dsx] + y G*[dxy]
    const inner = new Float64Array(hw);
    for (let p = 0; p < hw; p++) inner[p] = dmu[p] - 2 * mx[p] * dsx[p] - my[p] * dxy[p];
    const t1 = blur(inner, h, w);
    const t2 = blur(dsx, h, w);
    const t3 = blur(dxy, h, w);
    for (let p = 0; p < hw; p++) {
      if (mask[p] > 0.5) continue; // neutralized positions carry no gradient
      gd[base + p] += t1[p] + 2 * x[p] * t2[p] + y[p] * t3[p];
    }
  }
  const ssim = ssimSum / keepCount;
  return { loss: 10 * l1 - ssim, l1, ssim, grad };
}
