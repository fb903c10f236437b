/** Console session settings.
 *
 * Deployment knobs (serviceUrl, pollIntervalMs) come from config.json next
 * to the bundle. The user id is self-declared in the header bar; there is
 * no authentication, reviews are attributed to whatever id the reviewer
 * typed in.
 */

export const DEFAULT_POLL_MS = 2000;
export const MIN_POLL_MS = 500;

export interface ConsoleSession {
  userId: string;
  serviceUrl: string;
  pollIntervalMs: number;
}

export function makeSession(config: unknown, userId = ""): ConsoleSession {
  const raw =
    config !== null && typeof config === "object" && !Array.isArray(config)
      ? (config as Record<string, unknown>)
      : {};

  let serviceUrl = "";
  if (raw.serviceUrl !== undefined) {
    if (typeof raw.serviceUrl !== "string") {
      throw new Error("serviceUrl must be a string");
    }
    serviceUrl = raw.serviceUrl.replace(/\/+$/, "");
  }

  let pollIntervalMs = DEFAULT_POLL_MS;
  if (raw.pollIntervalMs !== undefined) {
    if (typeof raw.pollIntervalMs !== "number" || !Number.isInteger(raw.pollIntervalMs)) {
      throw new Error("pollIntervalMs must be an integer");
    }
    pollIntervalMs = raw.pollIntervalMs;
  }
  if (pollIntervalMs < MIN_POLL_MS) {
    throw new Error(`pollIntervalMs must be at least ${MIN_POLL_MS}`);
  }

  return { userId, serviceUrl, pollIntervalMs };
}

/** Annotator string sent with console-made annotations. */
export function annotatorFor(session: ConsoleSession): string {
  return `user:${session.userId}`;
}

/** Missing or unreadable config falls back to same-origin defaults. */
export async function loadConfig(url = "config.json"): Promise<unknown> {
  try {
    const response = await fetch(url);
    if (!response.ok) return {};
    return await response.json();
  } catch {
    return {};
  }
}
