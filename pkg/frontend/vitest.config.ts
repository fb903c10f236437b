import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // each suite boots a real service process, so hooks need headroom;
    // run files one at a time so four services do not fight over the CPU
    // while tests assert wall-clock poll bounds
    fileParallelism: false,
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
