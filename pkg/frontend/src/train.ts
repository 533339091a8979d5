/**
 * Training loop: Adam on the masked L1 - SSIM objective over random crops
 * of the filtered-view pairs, deterministic for a given seed. Exports NPFW
 * weights (atomically: temp file + rename) and a per-epoch loss curve CSV.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Adam } from "./adam.js";
import { Dataset, TrainSample, cropSample } from "./dataset.js";
import { maskedLoss } from "./loss.js";
import { NetworkParams, backward, forward, initParams } from "./network.js";
import { encodeWeights } from "./npfw.js";
import { rng } from "./tensor.js";

export interface TrainConfig {
  epochs: number;
  learningRate: number;
  seed: number;
  cropSize: number; // 0 = full frames
  cropsPerSample: number;
  exportPath: string;
  curvePath: string;
  logEvery?: number;
}

export const DEFAULT_CONFIG: Omit<TrainConfig, "exportPath" | "curvePath"> = {
  epochs: 30,
  learningRate: 2e-3,
  seed: 0,
  cropSize: 64,
  cropsPerSample: 2,
};

export interface TrainResult {
  params: NetworkParams;
  epochLosses: number[];
}

function maskFullyExcludes(sample: TrainSample): boolean {
  for (let p = 0; p < sample.mask.length; p++) if (sample.mask[p] <= 0.5) return false;
  return true;
}

export function train(dataset: Dataset, config: TrainConfig, log: (msg: string) => void = () => {}): TrainResult {
  const params = initParams(config.seed);
  const flat = [...params.weights, ...params.biases];
  const adam = new Adam(flat, config.learningRate);
  const uniform = rng(config.seed ^ 0x5eed);
  const epochLosses: number[] = [];

  const useCrops = config.cropSize > 0 && config.cropSize < dataset.h;
  for (let epoch = 0; epoch < config.epochs; epoch++) {
    // cosine decay to a tenth of the initial rate
    const progress = config.epochs > 1 ? epoch / (config.epochs - 1) : 1;
    adam.setLearningRate(config.learningRate * (0.55 + 0.45 * Math.cos(Math.PI * progress)));
    let lossSum = 0;
    let steps = 0;
    for (const sample of dataset.samples) {
      const crops = useCrops ? config.cropsPerSample : 1;
      for (let k = 0; k < crops; k++) {
        let s = sample;
        if (useCrops) {
          const y0 = Math.floor(uniform() * (dataset.h - config.cropSize + 1));
          const x0 = Math.floor(uniform() * (dataset.w - config.cropSize + 1));
          s = cropSample(sample, y0, x0, config.cropSize);
        }
        if (maskFullyExcludes(s)) continue;
        const cache = forward(params, s.fLeft, s.fRight);
        const { loss, grad } = maskedLoss(cache.out, s.gt, s.mask);
        if (!Number.isFinite(loss)) {
          throw new Error(`non-finite loss at epoch ${epoch}, case ${s.caseName}/${s.eye}`);
        }
        const grads = backward(params, cache, grad);
        adam.step([...grads.weights, ...grads.biases]);
        lossSum += loss;
        steps += 1;
      }
    }
    const epochLoss = lossSum / Math.max(steps, 1);
    epochLosses.push(epochLoss);
    if (!config.logEvery || epoch % config.logEvery === 0 || epoch === config.epochs - 1) {
      log(`epoch ${epoch + 1}/${config.epochs}: masked loss ${epochLoss.toFixed(4)}`);
    }
  }

  exportWeights(params, config.exportPath);
  const curve = ["epoch,masked_loss", ...epochLosses.map((l, i) => `${i + 1},${l}`)].join("\n") + "\n";
  fs.writeFileSync(config.curvePath, curve);
  return { params, epochLosses };
}

/** Atomic NPFW export: write a temp file in place, then rename. */
export function exportWeights(params: NetworkParams, exportPath: string): void {
  const dir = path.dirname(exportPath);
  fs.mkdirSync(dir, { recursive: true });
  const tmp = path.join(dir, `.${path.basename(exportPath)}.tmp`);
  fs.writeFileSync(tmp, encodeWeights(params));
  fs.renameSync(tmp, exportPath);
}
