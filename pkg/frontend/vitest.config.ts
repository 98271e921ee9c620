import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    // the test harness talks to the spawned service cross-origin; the real
    // page is served same-origin by the service itself
    environmentOptions: {
      happyDOM: { settings: { fetch: { disableSameOriginPolicy: true } } },
    },
    include: ["tests/**/*.test.ts"],
    // each live-service file spawns its own server; keep them sequential
    fileParallelism: false,
    testTimeout: 30000,
    hookTimeout: 90000,
  },
});
