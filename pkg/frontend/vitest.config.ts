import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'happy-dom',
    // The deployed UI is served from the review service's own origin (the
    // static mount), so tests run same-origin with the live fixture server.
    environmentOptions: {
      happyDOM: { url: 'http://127.0.0.1:18744' },
    },
    include: ['tests/**/*.test.ts'],
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
