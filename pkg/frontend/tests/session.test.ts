import { describe, expect, test } from "vitest";

import { DEFAULT_POLL_MS, MIN_POLL_MS, annotatorFor, makeSession } from "../src/session.js";

describe("makeSession", () => {
  test("empty config falls back to same-origin defaults", () => {
    const session = makeSession({});
    expect(session.serviceUrl).toBe("");
    expect(session.pollIntervalMs).toBe(DEFAULT_POLL_MS);
    expect(session.userId).toBe("");
  });

  test("non-object config is treated as empty", () => {
    for (const config of [null, undefined, [], "x", 3]) {
      expect(makeSession(config).pollIntervalMs).toBe(DEFAULT_POLL_MS);
    }
  });

  test("serviceUrl keeps its value minus trailing slashes", () => {
    const session = makeSession({ serviceUrl: "http://h:8000//" });
    expect(session.serviceUrl).toBe("http://h:8000");
  });

  test("non-string serviceUrl is rejected", () => {
    expect(() => makeSession({ serviceUrl: 8000 })).toThrow(/serviceUrl/);
  });

  test("poll interval honors the configured value down to the floor", () => {
    expect(makeSession({ pollIntervalMs: 3000 }).pollIntervalMs).toBe(3000);
    expect(makeSession({ pollIntervalMs: MIN_POLL_MS }).pollIntervalMs).toBe(MIN_POLL_MS);
  });

  test("poll interval below the floor is a config error, not a clamp", () => {
    expect(() => makeSession({ pollIntervalMs: MIN_POLL_MS - 1 })).toThrow(/at least 500/);
  });

  test("poll interval must be an integer", () => {
    expect(() => makeSession({ pollIntervalMs: 999.5 })).toThrow(/integer/);
    expect(() => makeSession({ pollIntervalMs: "2000" })).toThrow(/integer/);
  });

  test("userId passes through and shapes the annotator string", () => {
    const session = makeSession({}, "casey");
    expect(session.userId).toBe("casey");
    expect(annotatorFor(session)).toBe("user:casey");
  });
});
