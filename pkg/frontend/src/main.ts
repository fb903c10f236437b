/** Console entry point: load config.json, check the service, mount panels. */

import { liveness } from "./api.js";
import { clear, el, errorBanner, messageOf } from "./dom.js";
import { FeedPanel, BrowserPanel } from "./panels.js";
import { ConsoleSession, loadConfig, makeSession } from "./session.js";

const USER_KEY = "cityforge-console-user";

let feed: FeedPanel | null = null;

async function mount(root: HTMLElement, statusEl: HTMLElement, session: ConsoleSession): Promise<void> {
  feed?.stop();
  feed = null;
  clear(root);
  try {
    const live = await liveness(session.serviceUrl);
    statusEl.textContent = `${live.service} ${live.version}: ${live.status}`;
    statusEl.className = "service-status ok";
  } catch (err) {
    statusEl.textContent = "unreachable";
    statusEl.className = "service-status down";
    root.append(errorBanner(messageOf(err), () => void mount(root, statusEl, session)));
    return;
  }

  const feedBox = el("div", { id: "feed" });
  const browserBox = el("div", { id: "browser" });
  root.append(
    el("section", { id: "feed-panel" }, el("h2", {}, "live feed"), feedBox),
    el("section", { id: "browser-panel" }, el("h2", {}, "asset browser"), browserBox),
  );

  feed = new FeedPanel(feedBox, session);
  const browser = new BrowserPanel(browserBox, session, () => void feed?.poller.poll());
  void browser.refresh();
  feed.start();
}

async function boot(): Promise<void> {
  const root = document.getElementById("console-root");
  const statusEl = document.getElementById("service-status");
  const userInput = document.getElementById("user-id");
  if (!root || !statusEl || !(userInput instanceof HTMLInputElement)) return;

  let session: ConsoleSession;
  try {
    session = makeSession(await loadConfig(), window.localStorage.getItem(USER_KEY) ?? "");
  } catch (err) {
    clear(root);
    root.append(el("div", { class: "error-banner" }, `config.json: ${messageOf(err)}`));
    return;
  }

  userInput.value = session.userId;
  userInput.addEventListener("change", () => {
    session.userId = userInput.value.trim();
    window.localStorage.setItem(USER_KEY, session.userId);
  });

  await mount(root, statusEl, session);
}

void boot();
