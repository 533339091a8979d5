/**
 * Network building blocks with explicit backward passes.
 *
 * Forward semantics mirror the inference engine exactly: 3x3 convolution
 * with zero padding + bias + relu, 2x2 average pooling, 2x bilinear
 * upsampling with half-pixel centers and clamped edges, channel
 * concatenation, and a final [0,1] clamp. Backward passes are hand-derived
 * adjoints, validated against central finite differences in the tests.
 */

import { ArrayCtor, Tensor, ctorOf, fromData, zeros } from "./tensor.js";

export interface ConvGrads {
  gx: Tensor;
  gw: FloatArrayLike;
  gb: FloatArrayLike;
}

type FloatArrayLike = Float32Array | Float64Array;

/** y = relu(conv3x3(x, w) + b); w layout (cout, cin, 3, 3) flattened. */
export function convForward(
  x: Tensor,
  w: FloatArrayLike,
  b: FloatArrayLike,
  cout: number,
  relu: boolean,
): Tensor {
  const { c: cin, h, w: wd } = x;
  if (w.length !== cout * cin * 9) throw new Error("conv weight size mismatch");
  if (b.length !== cout) throw new Error("conv bias size mismatch");
  const out = zeros(cout, h, wd, ctorOf(x));
  const xd = x.data;
  const od = out.data;
  const hw = h * wd;
  for (let co = 0; co < cout; co++) {
    for (let y = 0; y < h; y++) {
      const o = co * hw + y * wd;
      const bias = b[co];
      for (let j = 0; j < wd; j++) od[o + j] = bias;
      for (let ci = 0; ci < cin; ci++) {
        const wb = (co * cin + ci) * 9;
        const w00 = w[wb], w01 = w[wb + 1], w02 = w[wb + 2];
        const w10 = w[wb + 3], w11 = w[wb + 4], w12 = w[wb + 5];
        const w20 = w[wb + 6], w21 = w[wb + 7], w22 = w[wb + 8];
        const rm = ci * hw + y * wd;
        const r0 = y > 0 ? rm - wd : -1;
        const r2 = y < h - 1 ? rm + wd : -1;
        for (let j = 1; j < wd - 1; j++) {
          let acc = xd[rm + j - 1] * w10 + xd[rm + j] * w11 + xd[rm + j + 1] * w12;
          if (r0 >= 0) acc += xd[r0 + j - 1] * w00 + xd[r0 + j] * w01 + xd[r0 + j + 1] * w02;
          if (r2 >= 0) acc += xd[r2 + j - 1] * w20 + xd[r2 + j] * w21 + xd[r2 + j + 1] * w22;
          od[o + j] += acc;
        }
        let aL = xd[rm] * w11;
        let aR = xd[rm + wd - 1] * w11;
        if (wd > 1) {
          aL += xd[rm + 1] * w12;
          aR += xd[rm + wd - 2] * w10;
        }
        if (r0 >= 0) {
          aL += xd[r0] * w01;
          aR += xd[r0 + wd - 1] * w01;
          if (wd > 1) {
            aL += xd[r0 + 1] * w02;
            aR += xd[r0 + wd - 2] * w00;
          }
        }
        if (r2 >= 0) {
          aL += xd[r2] * w21;
          aR += xd[r2 + wd - 1] * w21;
          if (wd > 1) {
            aL += xd[r2 + 1] * w22;
            aR += xd[r2 + wd - 2] * w20;
          }
        }
        od[o] += aL;
        if (wd > 1) od[o + wd - 1] += aR;
      }
    }
  }
  if (relu) {
    for (let i = 0; i < od.length; i++) if (od[i] < 0) od[i] = 0;
  }
  return out;
}

/**
 * Gradients of the conv(+relu) layer. `y` is the forward output (for the
 * relu mask); pass relu=false for the final pre-clamp layer.
 */
export function convBackward(
  x: Tensor,
  w: FloatArrayLike,
  cout: number,
  y: Tensor,
  gy: Tensor,
  relu: boolean,
): ConvGrads {
  const { c: cin, h, w: wd } = x;
  const ctor = ctorOf(x);
  const hw = h * wd;
  // relu gate
  const gz = new ctor(gy.data.length);
  if (relu) {
    const yd = y.data;
    for (let i = 0; i < gz.length; i++) gz[i] = yd[i] > 0 ? gy.data[i] : 0;
  } else {
    gz.set(gy.data as never);
  }

  const gw = new ctor(cout * cin * 9);
  const gb = new ctor(cout);
  const gxT = zeros(cin, h, wd, ctor);
  const gxd = gxT.data;
  const xd = x.data;

  for (let co = 0; co < cout; co++) {
    let bsum = 0;
    const zb = co * hw;
    for (let p = 0; p < hw; p++) bsum += gz[zb + p];
    gb[co] = bsum;
    for (let ci = 0; ci < cin; ci++) {
      const wb = (co * cin + ci) * 9;
      const w00 = w[wb], w01 = w[wb + 1], w02 = w[wb + 2];
      const w10 = w[wb + 3], w11 = w[wb + 4], w12 = w[wb + 5];
      const w20 = w[wb + 6], w21 = w[wb + 7], w22 = w[wb + 8];
      let a00 = 0, a01 = 0, a02 = 0, a10 = 0, a11 = 0, a12 = 0, a20 = 0, a21 = 0, a22 = 0;
      for (let y0 = 0; y0 < h; y0++) {
        const zrow = zb + y0 * wd;
        const xm = ci * hw + y0 * wd;
        const x0 = y0 > 0 ? xm - wd : -1; // x row above (tap ky=0)
        const x2 = y0 < h - 1 ? xm + wd : -1; // x row below (tap ky=2)
        const gxm = ci * hw + y0 * wd;
        for (let j = 0; j < wd; j++) {
          const g = gz[zrow + j];
          if (g === 0) continue;
          const jm = j > 0 ? j - 1 : -1;
          const jp = j < wd - 1 ? j + 1 : -1;
          // weight gradients: gw[ky,kx] += g * x[y0+ky-1, j+kx-1]
          if (x0 >= 0) {
            if (jm >= 0) a00 += g * xd[x0 + jm];
            a01 += g * xd[x0 + j];
            if (jp >= 0) a02 += g * xd[x0 + jp];
          }
          if (jm >= 0) a10 += g * xd[xm + jm];
          a11 += g * xd[xm + j];
          if (jp >= 0) a12 += g * xd[xm + jp];
          if (x2 >= 0) {
            if (jm >= 0) a20 += g * xd[x2 + jm];
            a21 += g * xd[x2 + j];
            if (jp >= 0) a22 += g * xd[x2 + jp];
          }
          // input gradient: gx[y0+ky-1, j+kx-1] += g * w[ky,kx]
          if (x0 >= 0) {
            const r = gxm - wd;
            if (jm >= 0) gxd[r + jm] += g * w00;
            gxd[r + j] += g * w01;
            if (jp >= 0) gxd[r + jp] += g * w02;
          }
          if (jm >= 0) gxd[gxm + jm] += g * w10;
          gxd[gxm + j] += g * w11;
          if (jp >= 0) gxd[gxm + jp] += g * w12;
          if (x2 >= 0) {
            const r = gxm + wd;
            if (jm >= 0) gxd[r + jm] += g * w20;
            gxd[r + j] += g * w21;
            if (jp >= 0) gxd[r + jp] += g * w22;
          }
        }
      }
      gw[wb] = a00; gw[wb + 1] = a01; gw[wb + 2] = a02;
      gw[wb + 3] = a10; gw[wb + 4] = a11; gw[wb + 5] = a12;
      gw[wb + 6] = a20; gw[wb + 7] = a21; gw[wb + 8] = a22;
    }
  }
  return { gx: gxT, gw, gb };
}

export function avgPool2Forward(x: Tensor): Tensor {
  const { c, h, w } = x;
  if (h % 2 || w % 2) throw new Error(`pooling needs even dims, got ${h}x${w}`);
  const out = zeros(c, h / 2, w / 2, ctorOf(x));
  const xd = x.data;
  const od = out.data;
  const ho = h / 2;
  const wo = w / 2;
  for (let ci = 0; ci < c; ci++) {
    for (let y = 0; y < ho; y++) {
      const r0 = ci * h * w + 2 * y * w;
      const r1 = r0 + w;
      const o = ci * ho * wo + y * wo;
      for (let j = 0; j < wo; j++) {
        od[o + j] = 0.25 * (xd[r0 + 2 * j] + xd[r0 + 2 * j + 1] + xd[r1 + 2 * j] + xd[r1 + 2 * j + 1]);
      }
    }
  }
  return out;
}

export function avgPool2Backward(gy: Tensor): Tensor {
  const { c, h: ho, w: wo } = gy;
  const out = zeros(c, 2 * ho, 2 * wo, ctorOf(gy));
  const gd = gy.data;
  const od = out.data;
  const h = 2 * ho;
  const w = 2 * wo;
  for (let ci = 0; ci < c; ci++) {
    for (let y = 0; y < ho; y++) {
      const g0 = ci * ho * wo + y * wo;
      const r0 = ci * h * w + 2 * y * w;
      const r1 = r0 + w;
      for (let j = 0; j < wo; j++) {
        const v = 0.25 * gd[g0 + j];
        od[r0 + 2 * j] = v;
        od[r0 + 2 * j + 1] = v;
        od[r1 + 2 * j] = v;
        od[r1 + 2 * j + 1] = v;
      }
    }
  }
  return out;
}

/** Half-pixel-center 2x bilinear upsampling, edges clamped. */
export function bilinearUp2Forward(x: Tensor): Tensor {
  const { c, h, w } = x;
  const out = zeros(c, 2 * h, 2 * w, ctorOf(x));
  const xd = x.data;
  const od = out.data;
  for (let ci = 0; ci < c; ci++) {
    for (let yo = 0; yo < 2 * h; yo++) {
      const yc = yo >> 1;
      let yn = yo % 2 === 0 ? yc - 1 : yc + 1;
      if (yn < 0) yn = 0;
      if (yn > h - 1) yn = h - 1;
      const rc = ci * h * w + yc * w;
      const rn = ci * h * w + yn * w;
      const o = ci * 4 * h * w + yo * 2 * w;
      for (let j = 0; j < w; j++) {
        const v = 0.75 * xd[rc + j] + 0.25 * xd[rn + j];
        const jl = j > 0 ? j - 1 : 0;
        const jr = j < w - 1 ? j + 1 : w - 1;
        const vl = 0.75 * xd[rc + jl] + 0.25 * xd[rn + jl];
        const vr = 0.75 * xd[rc + jr] + 0.25 * xd[rn + jr];
        od[o + 2 * j] = 0.75 * v + 0.25 * vl;
        od[o + 2 * j + 1] = 0.75 * v + 0.25 * vr;
      }
    }
  }
  return out;
}

export function bilinearUp2Backward(gy: Tensor): Tensor {
  const { c, h: ho, w: wo } = gy;
  const h = ho / 2;
  const w = wo / 2;
  const out = zeros(c, h, w, ctorOf(gy));
  const gd = gy.data;
  const od = out.data;
  // exact adjoint of the forward scatter: each output pixel distributed
  // its value over (yc|yn) x (j|jn) with weights {0.75, 0.25} x {0.75, 0.25}
  for (let ci = 0; ci < c; ci++) {
    for (let yo = 0; yo < ho; yo++) {
      const yc = yo >> 1;
      let yn = yo % 2 === 0 ? yc - 1 : yc + 1;
      if (yn < 0) yn = 0;
      if (yn > h - 1) yn = h - 1;
      const rc = ci * h * w + yc * w;
      const rn = ci * h * w + yn * w;
      const g0 = ci * ho * wo + yo * wo;
      for (let j = 0; j < w; j++) {
        const jl = j > 0 ? j - 1 : 0;
        const jr = j < w - 1 ? j + 1 : w - 1;
        const ge = gd[g0 + 2 * j];
        const go = gd[g0 + 2 * j + 1];
        od[rc + j] += 0.5625 * (ge + go); // 0.75 * 0.75
        od[rn + j] += 0.1875 * (ge + go); // 0.25 * 0.75
        od[rc + jl] += 0.1875 * ge;
        od[rn + jl] += 0.0625 * ge; // 0.25 * 0.25
        od[rc + jr] += 0.1875 * go;
        od[rn + jr] += 0.0625 * go;
      }
    }
  }
  return out;
}

export function concatForward(a: Tensor, b: Tensor): Tensor {
  if (a.h !== b.h || a.w !== b.w) throw new Error("concat spatial mismatch");
  const ctor = ctorOf(a);
  const out = new ctor(a.data.length + b.data.length);
  out.set(a.data as never, 0);
  out.set(b.data as never, a.data.length);
  return fromData(out, a.c + b.c, a.h, a.w);
}

export function concatBackward(gy: Tensor, cA: number): [Tensor, Tensor] {
  const splitAt = cA * gy.h * gy.w;
  return [
    fromData(gy.data.slice(0, splitAt), cA, gy.h, gy.w),
    fromData(gy.data.slice(splitAt), gy.c - cA, gy.h, gy.w),
  ];
}

/** out = min(max(z, 0), 1); gradient passes only strictly inside (0, 1). */
export function clamp01Forward(z: Tensor): Tensor {
  const out = zeros(z.c, z.h, z.w, ctorOf(z));
  for (let i = 0; i < z.data.length; i++) {
    const v = z.data[i];
    out.data[i] = v < 0 ? 0 : v > 1 ? 1 : v;
  }
  return out;
}

export function clamp01Backward(z: Tensor, gy: Tensor): Tensor {
  const out = zeros(z.c, z.h, z.w, ctorOf(z));
  for (let i = 0; i < z.data.length; i++) {
    const v = z.data[i];
    out.data[i] = v > 0 && v < 1 ? gy.data[i] : 0;
  }
  return out;
}
