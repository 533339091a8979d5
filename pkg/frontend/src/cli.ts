/**
 * Trainer CLI.
 *
 *   node dist/cli.js train --dataset DIR --intermediates DIR --out W.npfw \
 *        [--curve loss_curve.csv] [--epochs 30] [--lr 2e-3] [--seed 0] \
 *        [--crop-size 64] [--crops 2]
 *
 *   node dist/cli.js infer --weights W.npfw --f-left A.pfm --f-right B.pfm \
 *        --out OUT.pfm
 */

import * as fs from "node:fs";

import { loadDataset } from "./dataset.js";
import { infer } from "./network.js";
import { decodeWeights } from "./npfw.js";
import { decodePfm, encodePfm, pfmToTensor } from "./pfm.js";
import { DEFAULT_CONFIG, train } from "./train.js";

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`malformed arguments near ${argv[i]}`);
    }
    out.set(argv[i].slice(2), argv[i + 1]);
  }
  return out;
}

function requireArg(args: Map<string, string>, name: string): string {
  const v = args.get(name);
  if (!v) throw new Error(`missing required --${name}`);
  return v;
}

function cmdTrain(args: Map<string, string>): number {
  const dataset = loadDataset(requireArg(args, "dataset"), requireArg(args, "intermediates"));
  const exportPath = requireArg(args, "out");
  const result = train(
    dataset,
    {
      epochs: parseInt(args.get("epochs") ?? String(DEFAULT_CONFIG.epochs), 10),
      learningRate: parseFloat(args.get("lr") ?? String(DEFAULT_CONFIG.learningRate)),
      seed: parseInt(args.get("seed") ?? "0", 10),
      cropSize: parseInt(args.get("crop-size") ?? String(DEFAULT_CONFIG.cropSize), 10),
      cropsPerSample: parseInt(args.get("crops") ?? String(DEFAULT_CONFIG.cropsPerSample), 10),
      exportPath,
      curvePath: args.get("curve") ?? "loss_curve.csv",
    },
    (msg) => console.log(msg),
  );
  const first = result.epochLosses[0];
  const last = result.epochLosses[result.epochLosses.length - 1];
  console.log(`done: epoch-1 loss ${first.toFixed(4)}, final ${last.toFixed(4)}; weights at ${exportPath}`);
  return 0;
}

function cmdInfer(args: Map<string, string>): number {
  const params = decodeWeights(fs.readFileSync(requireArg(args, "weights")));
  const fL = pfmToTensor(decodePfm(fs.readFileSync(requireArg(args, "f-left"))));
  const fR = pfmToTensor(decodePfm(fs.readFileSync(requireArg(args, "f-right"))));
  const out = infer(params, fL, fR);
  fs.writeFileSync(
    requireArg(args, "out"),
    encodePfm({ channels: 3, h: out.h, w: out.w, data: out.data as Float32Array }),
  );
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    const args = parseArgs(rest);
    if (command === "train") return cmdTrain(args);
    if (command === "infer") return cmdInfer(args);
    console.error(`unknown command ${command ?? "(none)"}; expected train | infer`);
    return 2;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return err instanceof Error && /missing required|malformed|unknown command/.test(err.message) ? 2 : 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
