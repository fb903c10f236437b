/** The feed watched while a real classification job is running: scripted
 * context updates flow broker -> job -> warehouse, and the console must
 * show each batch within two poll intervals, newest first, identical to
 * the raw feed response. */

import { afterAll, beforeAll, describe, expect, test } from "vitest";

import { FeedPanel } from "../src/panels.js";
import { makeSession } from "../src/session.js";
import {
  Service,
  minuteStamp,
  raw,
  rawSend,
  startService,
  texts,
  waitFor,
} from "./helpers.js";

interface Wire {
  id: string;
  assetUrn: string;
  tagUrn: string;
  annotator: string;
  note: string | number;
  timestamp: string;
  validation: string;
}

const LIGHT = "urn:oc:tagDomain:light";
const POLL_MS = 500;
const ROUND_TRIP_MS = 2 * POLL_MS + 250;
const READINGS = [5, 90, 310, 150, 0, 280, 45, 120, 305, 70, 20, 260];

let service: Service;

async function postReading(entity: string, value: number, timestamp: string): Promise<void> {
  await rawSend(service.base, "POST", `/v2/entities/${entity}/attrs?type=light`, {
    illuminance: { value, metadata: { timestamp } },
  });
}

beforeAll(async () => {
  service = await startService();
  await rawSend(service.base, "POST", "/warehouse/tagDomains", {
    urn: LIGHT,
    name: "light",
    description: "ambient light bands",
    tags: [
      { urn: `${LIGHT}:night`, name: "night" },
      { urn: `${LIGHT}:sunlight`, name: "sunlight" },
      { urn: `${LIGHT}:overcast`, name: "overcast" },
    ],
  });
  const job = await rawSend<{ id: number }>(service.base, "POST", "/jobs", {
    kind: "classification",
    query: { idPattern: "urn:oc:entity:santander:light:.*" },
    attribute: "illuminance",
    tagDomain: LIGHT,
  });
  await rawSend(service.base, "POST", `/jobs/${job.id}/train`, [
    { tag: "night", value: 0.0 },
    { tag: "sunlight", value: 100.0 },
    { tag: "overcast", value: 300.0 },
  ]);
  await rawSend(service.base, "POST", `/jobs/${job.id}/start`, undefined);
});

afterAll(() => service.stop());

describe("feed under a running job", () => {
  test("machine annotations stream in batch by batch, newest first", async () => {
    const container = document.createElement("div");
    document.body.append(container);
    const session = makeSession({ serviceUrl: service.base, pollIntervalMs: POLL_MS }, "casey");
    const panel = new FeedPanel(container, session);
    panel.start();

    const counts: number[] = [];
    let newest = "";
    try {
      for (let batch = 0; batch < 4; batch++) {
        for (let j = 0; j < 3; j++) {
          const i = batch * 3 + j;
          newest = minuteStamp(500 + i * 10);
          await postReading(
            `urn:oc:entity:santander:light:n${(i % 2) + 1}`,
            READINGS[i]!,
            newest,
          );
        }
        // each batch becomes visible within two poll intervals (plus slack)
        await waitFor(
          () => container.querySelectorAll("tbody tr").length >= (batch + 1) * 3,
          ROUND_TRIP_MS,
        );
        counts.push(container.querySelectorAll("tbody tr").length);
      }
    } finally {
      panel.stop();
    }

    for (let k = 1; k < counts.length; k++) {
      expect(counts[k]!).toBeGreaterThanOrEqual(counts[k - 1]!);
    }
    expect(counts[counts.length - 1]).toBe(READINGS.length);

    const stamps = texts(container, "tbody tr .produced-at");
    expect(stamps).toEqual([...stamps].sort().reverse());
    expect(stamps[0]).toBe(newest);

    const oracle = await raw<Wire[]>(service.base, "/warehouse/annotations?limit=200");
    expect(oracle.length).toBe(READINGS.length);
    const rows = Array.from(container.querySelectorAll("tbody tr"));
    expect(rows.length).toBe(oracle.length);
    oracle.forEach((a, i) => {
      const row = rows[i]!;
      expect(row.getAttribute("data-id")).toBe(a.id);
      expect(row.querySelector(".produced-at")!.textContent).toBe(a.timestamp);
      expect(row.querySelector(".asset-urn")!.textContent).toBe(a.assetUrn);
      expect(row.querySelector(".tag-urn")!.textContent).toBe(a.tagUrn);
      expect(row.querySelector(".note")!.textContent).toBe(String(a.note));
      expect(row.querySelector(".annotator")!.textContent).toBe(a.annotator);
      expect(row.querySelector(".validation")!.textContent).toBe(a.validation);
    });
  });
});
