/**
 * The fusion U-Net: eleven 3x3 conv+relu layers over two pooling levels
 * with two concatenation skips, final output clamped to [0, 1]. Holds
 * parameters as flat arrays per layer and provides forward with cached
 * activations plus full backward.
 */

import {
  avgPool2Backward,
  avgPool2Forward,
  bilinearUp2Backward,
  bilinearUp2Forward,
  clamp01Backward,
  clamp01Forward,
  concatBackward,
  concatForward,
  convBackward,
  convForward,
} from "./layers.js";
import { ArrayCtor, FloatArray, Tensor, gaussian, rng } from "./tensor.js";

export interface LayerSpec {
  name: string;
  cin: number;
  cout: number;
}

export const LAYER_PLAN: LayerSpec[] = [
  { name: "conv0", cin: 6, cout: 16 },
  { name: "conv1", cin: 16, cout: 16 },
  { name: "conv2", cin: 16, cout: 32 },
  { name: "conv3", cin: 32, cout: 32 },
  { name: "conv4", cin: 32, cout: 64 },
  { name: "conv5", cin: 64, cout: 64 },
  { name: "conv6", cin: 96, cout: 32 },
  { name: "conv7", cin: 32, cout: 32 },
  { name: "conv8", cin: 48, cout: 16 },
  { name: "conv9", cin: 16, cout: 16 },
  { name: "conv10", cin: 16, cout: 3 },
];

export function parameterCount(): number {
  return LAYER_PLAN.reduce((acc, s) => acc + s.cout * s.cin * 9 + s.cout, 0);
}

export interface NetworkParams {
  weights: FloatArray[]; // per layer, (cout*cin*9)
  biases: FloatArray[]; // per layer, (cout)
}

export type InitKind = "identity" | "he";

/**
 * "identity" (the default for training) seeds an exact average-passthrough
 * through the full-resolution skip path — conv0/conv1 carry the six input
 * channels, conv8 averages the two views from the skip, conv9/conv10 pass
 * the average out — plus small He noise everywhere for symmetry breaking.
 * The network therefore starts as out = (F_left + F_right) / 2 + eps and
 * training only has to improve on a sensible fusion instead of
 * rediscovering one. "he" is plain He initialization.
 */
export function initParams(seed: number, ctor: ArrayCtor = Float32Array, kind: InitKind = "identity"): NetworkParams {
  const normal = gaussian(rng(seed));
  const weights: FloatArray[] = [];
  const biases: FloatArray[] = [];
  const noiseScale = kind === "identity" ? 0.1 : 1.0;
  for (const spec of LAYER_PLAN) {
    const std = noiseScale * Math.sqrt(2.0 / (spec.cin * 9));
    const w = new ctor(spec.cout * spec.cin * 9);
    for (let i = 0; i < w.length; i++) w[i] = normal() * std;
    weights.push(w);
    const b = new ctor(spec.cout);
    if (kind === "he" && spec.name === "conv10") b.fill(0.5); // avoid a dead clamp
    biases.push(b);
  }
  if (kind === "identity") {
    const center = (co: number, ci: number, cin: number) => (co * cin + ci) * 9 + 4;
    for (let k = 0; k < 6; k++) {
      weights[0][center(k, k, 6)] += 1.0; // conv0: keep the 6 inputs
      weights[1][center(k, k, 16)] += 1.0; // conv1: preserve them into the skip
    }
    for (let k = 0; k < 3; k++) {
      // conv8 input = concat(up(conv7)[32], conv1[16]); channels 32..37 of
      // it hold the original 6 inputs
      weights[8][center(k, 32 + k, 48)] += 0.5;
      weights[8][center(k, 32 + k + 3, 48)] += 0.5;
      weights[9][center(k, k, 16)] += 1.0;
      weights[10][center(k, k, 16)] += 1.0;
    }
  }
  return { weights, biases };
}

export interface ForwardCache {
  inputs: Tensor[]; // input tensor of each conv layer
  outputs: Tensor[]; // post-relu output of each conv layer
  preClamp: Tensor; // conv10 output before the clamp
  out: Tensor;
}

function conv(params: NetworkParams, idx: number, x: Tensor, relu = true): Tensor {
  const spec = LAYER_PLAN[idx];
  if (x.c !== spec.cin) {
    throw new Error(`${spec.name}: input has ${x.c} channels, expected ${spec.cin}`);
  }
  return convForward(x, params.weights[idx], params.biases[idx], spec.cout, relu);
}

/** fL, fR: (3, h, w) tensors with h, w divisible by 4. */
export function forward(params: NetworkParams, fL: Tensor, fR: Tensor): ForwardCache {
  if (fL.h % 4 || fL.w % 4) throw new Error("spatial dims must be divisible by 4");
  const inputs: Tensor[] = [];
  const outputs: Tensor[] = [];
  const push = (idx: number, x: Tensor, relu = true) => {
    inputs[idx] = x;
    outputs[idx] = conv(params, idx, x, relu);
    return outputs[idx];
  };
  const x0 = concatForward(fL, fR);
  const c0 = push(0, x0);
  const c1 = push(1, c0);
  const c2 = push(2, avgPool2Forward(c1));
  const c3 = push(3, c2);
  const c4 = push(4, avgPool2Forward(c3));
  const c5 = push(5, c4);
  const c6 = push(6, concatForward(bilinearUp2Forward(c5), c3));
  const c7 = push(7, c6);
  const c8 = push(8, concatForward(bilinearUp2Forward(c7), c1));
  const c9 = push(9, c8);
  const preClamp = push(10, c9, false);
  return { inputs, outputs, preClamp, out: clamp01Forward(preClamp) };
}

export interface Gradients {
  weights: FloatArray[];
  biases: FloatArray[];
}

function addInto(dst: Tensor, src: Tensor): void {
  for (let i = 0; i < dst.data.length; i++) dst.data[i] += src.data[i];
}

/** Backpropagate dLoss/dOut to parameter gradients. */
export function backward(params: NetworkParams, cache: ForwardCache, gOut: Tensor): Gradients {
  const gw: FloatArray[] = new Array(LAYER_PLAN.length);
  const gb: FloatArray[] = new Array(LAYER_PLAN.length);
  const back = (idx: number, gy: Tensor, relu = true): Tensor => {
    const spec = LAYER_PLAN[idx];
    const r = convBackward(cache.inputs[idx], params.weights[idx], spec.cout, cache.outputs[idx], gy, relu);
    gw[idx] = r.gw;
    gb[idx] = r.gb;
    return r.gx;
  };

  let g = clamp01Backward(cache.preClamp, gOut);
  g = back(10, g, false);
  g = back(9, g);
  const g8 = back(8, g);
  const [gUp7, gC1a] = concatBackward(g8, 32);
  g = back(7, bilinearUp2Backward(gUp7));
  const g6 = back(6, g);
  const [gUp5, gC3a] = concatBackward(g6, 64);
  g = back(5, bilinearUp2Backward(gUp5));
  g = back(4, g);
  const gC3 = avgPool2Backward(g);
  addInto(gC3, gC3a);
  g = back(3, gC3);
  g = back(2, g);
  const gC1 = avgPool2Backward(g);
  addInto(gC1, gC1a);
  g = back(1, gC1);
  back(0, g);
  return { weights: gw, biases: gb };
}

/** Inference-only forward (no cache retained). */
export function infer(params: NetworkParams, fL: Tensor, fR: Tensor): Tensor {
  return forward(params, fL, fR).out;
}
