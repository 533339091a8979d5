import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    testTimeout: 120_000,
    hookTimeout: 2_400_000,
    // training and the cross-process parity checks are CPU-bound; run files
    // sequentially so timings stay predictable on small machines
    pool: "forks",
    poolOptions: { forks: { singleFork: true } },
  },
});
