import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // the acceptance file spawns a control-loop server that saturates a
    // core; keep files sequential so timing-sensitive runs get the CPU
    fileParallelism: false,
    include: ["test/**/*.test.ts"],
    environment: "node",
    testTimeout: 15_000,
  },
});
