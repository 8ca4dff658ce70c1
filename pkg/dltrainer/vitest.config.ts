import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 600_000,
    hookTimeout: 120_000,
    // tfjs keeps state per process; run files sequentially for stable timing
    fileParallelism: false,
  },
});
