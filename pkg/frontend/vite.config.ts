import { defineConfig } from "vite";

export default defineConfig({
  build: { outDir: "dist" },
  server: {
    proxy: {
      // dev-mode convenience: forward API calls to a locally running service
      "^/(entities|records|explain|unlink|datasets|jobs)": "http://127.0.0.1:8000",
    },
  },
});
