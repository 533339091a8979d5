import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import { Dataset, TrainSample } from "../src/dataset.js";
import { decodeWeights } from "../src/npfw.js";
import { Tensor, fromData, rng } from "../src/tensor.js";
import { train } from "../src/train.js";

const tmp = () => fs.mkdtempSync(path.join(os.tmpdir(), "train-"));

/** Tiny in-memory dataset: target is the mean of the two smooth inputs. */
function syntheticDataset(n: number, size: number, seed: number): Dataset {
  const samples: TrainSample[] = [];
  const u = rng(seed);
  for (let k = 0; k < n; k++) {
    const mk = (): Tensor => {
      const data = new Float32Array(3 * size * size);
      for (let c = 0; c < 3; c++) {
        const fx = 1 + u() * 3;
        const fy = 1 + u() * 3;
        const ph = u() * 6.28;
        for (let y = 0; y < size; y++) {
          for (let x = 0; x < size; x++) {
            data[c * size * size + y * size + x] =
              0.5 + 0.4 * Math.sin((fx * x + fy * y) / size * 6.28 + ph) * 0.5;
          }
        }
      }
      return fromData(data, 3, size, size);
    };
    const fLeft = mk();
    const fRight = mk();
    // an asymmetric blend the identity-seeded init does not already produce
    const gt = fromData(new Float32Array(3 * size * size), 3, size, size);
    for (let i = 0; i < gt.data.length; i++) gt.data[i] = 0.75 * fLeft.data[i] + 0.25 * fRight.data[i];
    const mask = new Float32Array(size * size);
    mask[0] = 1; // a token masked pixel
    samples.push({ caseName: `synthetic_${k}`, eye: "eye_l", fLeft, fRight, mask, gt });
  }
  return { samples, h: size, w: size };
}

describe("training loop", () => {
  it("reduces the loss and exports a valid NPFW file", () => {
    const dir = tmp();
    const dataset = syntheticDataset(4, 32, 5);
    const result = train(dataset, {
      epochs: 8,
      learningRate: 2e-3,
      seed: 0,
      cropSize: 0,
      cropsPerSample: 1,
      exportPath: path.join(dir, "w.npfw"),
      curvePath: path.join(dir, "curve.csv"),
    });
    expect(result.epochLosses.length).toBe(8);
    const first = result.epochLosses[0];
    const last = result.epochLosses[7];
    expect(last).toBeLessThan(first * 0.5);
    const params = decodeWeights(fs.readFileSync(path.join(dir, "w.npfw")));
    expect(params.weights.length).toBe(11);
    const curve = fs.readFileSync(path.join(dir, "curve.csv"), "utf-8").trim().split("\n");
    expect(curve[0]).toBe("epoch,masked_loss");
    expect(curve.length).toBe(9);
  }, 240_000);

  it("is deterministic for a fixed seed", () => {
    const dir = tmp();
    const make = (tag: string) =>
      train(syntheticDataset(2, 16, 9), {
        epochs: 2,
        learningRate: 1e-3,
        seed: 7,
        cropSize: 0,
        cropsPerSample: 1,
        exportPath: path.join(dir, `${tag}.npfw`),
        curvePath: path.join(dir, `${tag}.csv`),
      });
    const a = make("a");
    const b = make("b");
    expect(a.epochLosses).toEqual(b.epochLosses);
    expect(fs.readFileSync(path.join(dir, "a.npfw")).equals(fs.readFileSync(path.join(dir, "b.npfw")))).toBe(true);
  }, 240_000);
});
