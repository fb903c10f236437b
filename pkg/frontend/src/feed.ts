/** Live annotation feed: a polling loop over GET /warehouse/annotations.
 *
 * Each poll replaces the local entries with the server's newest-first
 * response, so the display is always a straight projection of one API
 * call. The client keeps at most FEED_LIMIT entries. A failed poll keeps
 * the last good entries and retries on a doubling delay.
 */

import { Annotation, listFeed } from "./api.js";

export const FEED_LIMIT = 200;

// delay never grows past this many base intervals
const MAX_BACKOFF_FACTOR = 8;

/** Display projection of an annotation. producedAt is the measurement
 * timestamp the warehouse orders the feed by. */
export interface FeedEntry {
  id: string;
  assetUrn: string;
  tagUrn: string;
  annotator: string;
  note: string;
  producedAt: string;
  validation: string;
}

export function toFeedEntry(annotation: Annotation): FeedEntry {
  return {
    id: annotation.id,
    assetUrn: annotation.assetUrn,
    tagUrn: annotation.tagUrn,
    annotator: annotation.annotator,
    note: String(annotation.note),
    producedAt: annotation.timestamp,
    validation: annotation.validation,
  };
}

export type FeedListener = (poller: FeedPoller) => void;

export class FeedPoller {
  entries: FeedEntry[] = [];
  failing = false;
  consecutiveFailures = 0;
  lastError = "";
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = true;
  private inFlight = false;

  constructor(
    readonly base: string,
    readonly intervalMs: number,
    private readonly onChange: FeedListener,
    private readonly limit: number = FEED_LIMIT,
  ) {}

  start(): void {
    this.stopped = false;
    void this.poll();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  /** Delay before the next poll; doubles per consecutive failure. */
  delayMs(): number {
    if (this.consecutiveFailures === 0) return this.intervalMs;
    const factor = Math.min(2 ** this.consecutiveFailures, MAX_BACKOFF_FACTOR);
    return this.intervalMs * factor;
  }

  /** One fetch-and-project cycle. Safe to call between timer ticks, e.g.
   * right after a mutation. */
  async poll(): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    try {
      const annotations = await listFeed(this.base, this.limit);
      this.entries = annotations.slice(0, this.limit).map(toFeedEntry);
      this.failing = false;
      this.consecutiveFailures = 0;
      this.lastError = "";
    } catch (err) {
      this.failing = true;
      this.consecutiveFailures += 1;
      this.lastError = err instanceof Error ? err.message : String(err);
    } finally {
      this.inFlight = false;
    }
    this.onChange(this);
    if (!this.stopped) {
      if (this.timer !== null) clearTimeout(this.timer);
      this.timer = setTimeout(() => void this.poll(), this.delayMs());
    }
  }
}
