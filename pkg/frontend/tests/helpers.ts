/** Shared plumbing for the differential suites.
 *
 * Each suite boots the real service as a subprocess and talks to it twice:
 * once through the console modules under test, once through raw fetch as
 * the oracle. Raw access deliberately avoids src/api.ts so a client bug
 * cannot cancel itself out.
 */

import { spawn, type ChildProcess } from "node:child_process";

export interface Service {
  base: string;
  stop: () => void;
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function startService(): Promise<Service> {
  const port = 17000 + Math.floor(Math.random() * 15000);
  const proc: ChildProcess = spawn(
    "python3",
    ["-m", "cityforge.cli", "serve", "--port", String(port)],
    { stdio: ["ignore", "ignore", "pipe"] },
  );
  let stderr = "";
  proc.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });
  const base = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 20000;
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) {
      throw new Error(`service exited early (code ${proc.exitCode}): ${stderr}`);
    }
    try {
      const response = await fetch(`${base}/`, { signal: AbortSignal.timeout(500) });
      if (response.ok) {
        return { base, stop: () => void proc.kill("SIGTERM") };
      }
    } catch {
      // not listening yet
    }
    await sleep(100);
  }
  proc.kill("SIGTERM");
  throw new Error(`service did not come up on ${base}: ${stderr}`);
}

/** Oracle-side GET; throws with the response text for anything non-2xx. */
export async function raw<T>(base: string, path: string): Promise<T> {
  const response = await fetch(base + path);
  const text = await response.text();
  if (!response.ok) {
    throw new Error(`GET ${path} -> ${response.status}: ${text}`);
  }
  return JSON.parse(text) as T;
}

export async function rawSend<T>(
  base: string,
  method: string,
  path: string,
  body: unknown,
): Promise<T> {
  const response = await fetch(base + path, {
    method,
    headers: { "content-type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const text = await response.text();
  if (!response.ok) {
    throw new Error(`${method} ${path} -> ${response.status}: ${text}`);
  }
  return (text ? JSON.parse(text) : null) as T;
}

export const STREET = "urn:oc:tagDomain:street";
export const TAG_BROKEN = `${STREET}:broken`;
export const TAG_FLOODED = `${STREET}:flooded`;
export const TAG_BLOCKED = `${STREET}:blocked`;
export const TAG_CLEAR = `${STREET}:clear`;

export async function seedStreetDomain(base: string): Promise<void> {
  await rawSend(base, "POST", "/warehouse/tagDomains", {
    urn: STREET,
    name: "street state",
    description: "condition reports for street assets",
    tags: [
      { urn: TAG_BROKEN, name: "broken" },
      { urn: TAG_FLOODED, name: "flooded" },
      { urn: TAG_BLOCKED, name: "blocked" },
      { urn: TAG_CLEAR, name: "clear" },
    ],
  });
}

export interface SeedAnnotation {
  assetUrn: string;
  tagUrn: string;
  annotator?: string;
  note?: string | number;
  timestamp?: string;
  location?: { lat: number; lon: number };
}

interface AnnotationWire {
  id: string;
  assetUrn: string;
  tagUrn: string;
  annotator: string;
  note: string | number;
  timestamp: string;
  validation: string;
  location?: { lat: number; lon: number };
  reviewedBy?: string;
}

export async function addAnnotation(base: string, seed: SeedAnnotation): Promise<AnnotationWire> {
  return rawSend<AnnotationWire>(base, "POST", "/warehouse/annotations", {
    annotator: "machine:1",
    note: "seeded",
    ...seed,
  });
}

/** ISO timestamp n minutes past a fixed epoch, so ordering is explicit. */
export function minuteStamp(n: number): string {
  const t = Date.UTC(2017, 10, 15, 0, 0, 0) + n * 60_000;
  return new Date(t).toISOString().replace(".000Z", "Z");
}

export async function waitFor(
  predicate: () => boolean,
  timeoutMs: number,
  stepMs = 25,
): Promise<number> {
  const started = Date.now();
  while (Date.now() - started < timeoutMs) {
    if (predicate()) return Date.now() - started;
    await sleep(stepMs);
  }
  throw new Error(`condition not met within ${timeoutMs} ms`);
}

export function texts(root: Element, selector: string): string[] {
  return Array.from(root.querySelectorAll(selector)).map((node) => node.textContent ?? "");
}
