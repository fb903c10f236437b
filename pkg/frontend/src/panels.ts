/** DOM controllers for the two console panels.
 *
 * FeedPanel renders the polled annotation feed and offers confirm/reject
 * on every row. BrowserPanel renders find_assets results, opens a
 * per-asset annotation timeline on selection, and carries the add-tag
 * form. Neither computes anything: every cell is copied from an API
 * response, and mutations go through the documented warehouse endpoints.
 */

import {
  Annotation,
  AssetMatch,
  listAssetAnnotations,
  listTagDomains,
  reviewAnnotation,
  createAnnotation,
  suggestTags,
} from "./api.js";
import { AssetFilters, fetchAssets, locatedEntries, tagLabel } from "./browser.js";
import { FeedEntry, FeedPoller, toFeedEntry } from "./feed.js";
import { ConsoleSession, annotatorFor } from "./session.js";
import { clear, el, errorBanner, messageOf, validationChip } from "./dom.js";

type Verdict = "confirmed" | "rejected";

// display pagination only; the find_assets response is kept whole
export const PAGE_SIZE = 50;

function reviewButtons(
  id: string,
  error: string | undefined,
  onReview: (id: string, verdict: Verdict) => void,
): HTMLTableCellElement {
  const cell = el("td", { class: "review" });
  for (const verdict of ["confirmed", "rejected"] as const) {
    const label = verdict === "confirmed" ? "confirm" : "reject";
    const button = el("button", { class: label, type: "button", "data-id": id }, label);
    button.addEventListener("click", () => onReview(id, verdict));
    cell.append(button);
  }
  if (error) {
    cell.append(el("span", { class: "row-error" }, error));
  }
  return cell;
}

export class FeedPanel {
  readonly poller: FeedPoller;
  private readonly status: HTMLElement;
  private readonly rows: HTMLElement;
  // survives re-renders so a failed review stays visible until resolved
  private readonly rowErrors = new Map<string, string>();

  constructor(
    readonly container: HTMLElement,
    private readonly session: ConsoleSession,
  ) {
    this.status = el("div", { class: "poll-status" });
    this.rows = el("div", { class: "feed-rows" });
    container.append(this.status, this.rows);
    this.poller = new FeedPoller(session.serviceUrl, session.pollIntervalMs, () => this.render());
  }

  start(): void {
    this.poller.start();
  }

  stop(): void {
    this.poller.stop();
  }

  render(): void {
    this.renderStatus();
    clear(this.rows);
    if (this.poller.entries.length === 0) {
      this.rows.append(el("p", { class: "hint" }, "no annotations yet"));
      return;
    }
    const head = el(
      "tr",
      {},
      ...["time", "asset", "tag", "note", "annotator", "verdict", "review"].map((h) =>
        el("th", {}, h),
      ),
    );
    const body = el("tbody", {});
    for (const entry of this.poller.entries) {
      body.append(this.feedRow(entry));
    }
    this.rows.append(el("table", { class: "feed" }, el("thead", {}, head), body));
  }

  private feedRow(entry: FeedEntry): HTMLTableRowElement {
    return el(
      "tr",
      { "data-id": entry.id },
      el("td", { class: "produced-at" }, entry.producedAt),
      el("td", { class: "asset-urn" }, entry.assetUrn),
      el("td", { class: "tag-urn" }, entry.tagUrn),
      el("td", { class: "note" }, entry.note),
      el("td", { class: "annotator" }, entry.annotator),
      el("td", { class: "validation" }, validationChip(entry.validation)),
      reviewButtons(entry.id, this.rowErrors.get(entry.id), (id, verdict) =>
        void this.review(id, verdict),
      ),
    );
  }

  private renderStatus(): void {
    const p = this.poller;
    if (p.failing) {
      this.status.className = "poll-status stalled";
      this.status.textContent = `stalled, retrying in ${p.delayMs() / 1000}s`;
      this.status.title = p.lastError;
    } else {
      this.status.className = "poll-status live";
      this.status.textContent = "live";
      this.status.title = `polling every ${p.intervalMs} ms`;
    }
  }

  private async review(id: string, verdict: Verdict): Promise<void> {
    if (!this.session.userId) {
      this.rowErrors.set(id, "set a user id first");
      this.render();
      return;
    }
    try {
      const updated = await reviewAnnotation(this.poller.base, id, verdict, this.session.userId);
      this.rowErrors.delete(id);
      const at = this.poller.entries.findIndex((e) => e.id === id);
      if (at >= 0) this.poller.entries[at] = toFeedEntry(updated);
      this.render();
      void this.poller.poll();
    } catch (err) {
      this.rowErrors.set(id, messageOf(err));
      this.render();
    }
  }
}

export class BrowserPanel {
  filters: AssetFilters = { tags: [] };
  selected: string | null = null;
  private readonly errorSlot: HTMLElement;
  private readonly form: HTMLFormElement;
  private readonly assetsBox: HTMLElement;
  private readonly detailBox: HTMLElement;
  private rowErrors = new Map<string, string>();
  private lastMatches: AssetMatch[] = [];
  private page = 0;

  constructor(
    readonly container: HTMLElement,
    private readonly session: ConsoleSession,
    private readonly onMutation?: () => void,
  ) {
    this.errorSlot = el("div", { class: "error-slot" });
    this.form = this.buildFilterForm();
    this.assetsBox = el("div", { class: "assets" });
    this.detailBox = el("div", { class: "asset-detail" });
    container.append(this.form, this.errorSlot, this.assetsBox, this.detailBox);
  }

  private get base(): string {
    return this.session.serviceUrl;
  }

  private buildFilterForm(): HTMLFormElement {
    const tags = el("input", { class: "filter-tags", placeholder: "tag urns, comma separated" });
    const bbox = el("input", {
      class: "filter-bbox",
      placeholder: "bbox latMin,lonMin,latMax,lonMax",
    });
    const text = el("input", { class: "filter-text", placeholder: "urn contains" });
    const rejected = el("input", { class: "filter-rejected", type: "checkbox" });
    const form = el(
      "form",
      { class: "asset-filter-form" },
      tags,
      bbox,
      text,
      el("label", {}, rejected, " include rejected"),
      el("button", { type: "submit" }, "search"),
    );
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      this.filters = {
        tags: tags.value
          .split(",")
          .map((t) => t.trim())
          .filter((t) => t.length > 0),
        bbox: bbox.value.trim() || undefined,
        text: text.value.trim() || undefined,
        includeRejected: rejected.checked || undefined,
      };
      void this.refresh();
    });
    return form;
  }

  async refresh(): Promise<void> {
    if (this.filters.tags.length === 0) {
      clear(this.errorSlot);
      clear(this.assetsBox);
      this.assetsBox.append(el("p", { class: "hint" }, "enter at least one tag urn to search"));
      return;
    }
    try {
      const matches = await fetchAssets(this.base, this.filters);
      clear(this.errorSlot);
      this.lastMatches = matches;
      this.page = 0;
      this.renderAssets();
    } catch (err) {
      this.showError(err, () => void this.refresh());
    }
  }

  /** Service trouble clears the stale list; the banner offers a retry. */
  private showError(err: unknown, retry: () => void): void {
    clear(this.errorSlot);
    clear(this.assetsBox);
    this.errorSlot.append(errorBanner(messageOf(err), retry));
  }

  private renderAssets(): void {
    const matches = this.lastMatches;
    clear(this.assetsBox);
    if (matches.length === 0) {
      this.assetsBox.append(el("p", { class: "hint" }, "no assets match"));
      return;
    }
    const pages = Math.max(1, Math.ceil(matches.length / PAGE_SIZE));
    if (this.page >= pages) this.page = pages - 1;
    const window = matches.slice(this.page * PAGE_SIZE, (this.page + 1) * PAGE_SIZE);
    const list = el("ul", { class: "asset-list" });
    for (const match of window) {
      const open = el(
        "button",
        { class: "asset-open", type: "button", "data-asset": match.assetUrn },
        match.assetUrn,
      );
      open.addEventListener("click", () => void this.open(match.assetUrn));
      const chips = el("span", { class: "chips" });
      for (const [urn, count] of Object.entries(match.tags)) {
        chips.append(
          el(
            "span",
            { class: "chip tag-chip", "data-tag": urn, "data-count": String(count), title: urn },
            `${tagLabel(urn)} x${count}`,
          ),
        );
      }
      list.append(
        el(
          "li",
          { "data-asset": match.assetUrn },
          open,
          el("span", { class: "total" }, String(match.total)),
          chips,
        ),
      );
    }
    this.assetsBox.append(list);
    if (pages > 1) {
      const prev = el("button", { class: "page-prev", type: "button" }, "prev");
      const next = el("button", { class: "page-next", type: "button" }, "next");
      prev.disabled = this.page === 0;
      next.disabled = this.page === pages - 1;
      prev.addEventListener("click", () => {
        this.page -= 1;
        this.renderAssets();
      });
      next.addEventListener("click", () => {
        this.page += 1;
        this.renderAssets();
      });
      const label = `page ${this.page + 1}/${pages}, ${matches.length} assets`;
      this.assetsBox.append(
        el("div", { class: "pager" }, prev, el("span", { class: "page-label" }, label), next),
      );
    }
  }

  async open(assetUrn: string): Promise<void> {
    if (this.selected !== assetUrn) this.rowErrors = new Map();
    this.selected = assetUrn;
    try {
      const annotations = await listAssetAnnotations(this.base, assetUrn);
      clear(this.errorSlot);
      await this.renderDetail(assetUrn, annotations);
    } catch (err) {
      this.showError(err, () => void this.open(assetUrn));
    }
  }

  private async renderDetail(assetUrn: string, annotations: Annotation[]): Promise<void> {
    clear(this.detailBox);
    this.detailBox.append(el("h3", { class: "selected-asset" }, assetUrn));
    this.detailBox.append(this.timelineTable(annotations));
    this.detailBox.append(this.locationList(annotations));
    this.detailBox.append(await this.buildAddTagForm(assetUrn));
  }

  /** Rows appear exactly as served: oldest first. */
  private timelineTable(annotations: Annotation[]): HTMLElement {
    if (annotations.length === 0) {
      return el("p", { class: "hint timeline-empty" }, "no annotations for this asset");
    }
    const head = el(
      "tr",
      {},
      ...["time", "tag", "note", "annotator", "verdict", "review"].map((h) => el("th", {}, h)),
    );
    const body = el("tbody", {});
    for (const a of annotations) {
      body.append(
        el(
          "tr",
          { "data-id": a.id },
          el("td", { class: "produced-at" }, a.timestamp),
          el("td", { class: "tag-urn" }, a.tagUrn),
          el("td", { class: "note" }, String(a.note)),
          el("td", { class: "annotator" }, a.annotator),
          el("td", { class: "validation" }, validationChip(a.validation)),
          reviewButtons(a.id, this.rowErrors.get(a.id), (id, verdict) =>
            void this.review(id, verdict),
          ),
        ),
      );
    }
    return el("table", { class: "timeline" }, el("thead", {}, head), body);
  }

  private locationList(annotations: Annotation[]): HTMLElement {
    const located = locatedEntries(annotations);
    const box = el("div", { class: "locations" }, el("h4", {}, "locations"));
    if (located.length === 0) {
      box.append(el("p", { class: "hint" }, "no located annotations"));
      return box;
    }
    const list = el("ol", { class: "location-list" });
    for (const entry of located) {
      list.append(
        el(
          "li",
          { "data-id": entry.id, "data-lat": String(entry.lat), "data-lon": String(entry.lon) },
          el("span", { class: "coords" }, `${entry.lat}, ${entry.lon}`),
          " ",
          el("span", { class: "tag-urn" }, entry.tagUrn),
          " ",
          el("span", { class: "when" }, entry.producedAt),
        ),
      );
    }
    box.append(list);
    return box;
  }

  private async buildAddTagForm(assetUrn: string): Promise<HTMLElement> {
    const domains = await listTagDomains(this.base);
    const domainSelect = el("select", { class: "domain-select" });
    domainSelect.append(el("option", { value: "" }, "choose domain"));
    for (const domain of domains) {
      domainSelect.append(el("option", { value: domain.urn }, domain.name));
    }
    const tagSelect = el("select", { class: "tag-select" });
    const note = el("input", { class: "note-input", placeholder: "note" });
    const formError = el("span", { class: "form-error" });
    const form = el(
      "form",
      { class: "add-tag" },
      domainSelect,
      tagSelect,
      note,
      el("button", { type: "submit" }, "add tag"),
      formError,
    );

    domainSelect.addEventListener("change", () => {
      void (async () => {
        clear(tagSelect);
        if (!domainSelect.value) return;
        try {
          // suggestions come ordered by usage; keep that order
          const suggestions = await suggestTags(this.base, domainSelect.value);
          for (const tag of suggestions) {
            tagSelect.append(el("option", { value: tag.urn, title: tag.urn }, tag.name));
          }
          formError.textContent = "";
        } catch (err) {
          formError.textContent = messageOf(err);
        }
      })();
    });

    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void (async () => {
        if (!this.session.userId) {
          formError.textContent = "set a user id first";
          return;
        }
        if (!tagSelect.value) {
          formError.textContent = "choose a tag";
          return;
        }
        try {
          await createAnnotation(this.base, {
            assetUrn,
            tagUrn: tagSelect.value,
            annotator: annotatorFor(this.session),
            note: note.value,
          });
          formError.textContent = "";
          this.onMutation?.();
          await this.open(assetUrn);
        } catch (err) {
          formError.textContent = messageOf(err);
        }
      })();
    });
    return form;
  }

  private async review(id: string, verdict: Verdict): Promise<void> {
    if (!this.session.userId) {
      this.rowErrors.set(id, "set a user id first");
      if (this.selected) await this.rerenderTimelineErrors();
      return;
    }
    try {
      await reviewAnnotation(this.base, id, verdict, this.session.userId);
      this.rowErrors.delete(id);
      this.onMutation?.();
      if (this.selected) await this.open(this.selected);
    } catch (err) {
      this.rowErrors.set(id, messageOf(err));
      await this.rerenderTimelineErrors();
    }
  }

  private async rerenderTimelineErrors(): Promise<void> {
    for (const [id, message] of this.rowErrors) {
      const row = this.detailBox.querySelector(`tr[data-id="${id}"] td.review`);
      if (!row) continue;
      const existing = row.querySelector(".row-error");
      if (existing) existing.textContent = message;
      else row.append(el("span", { class: "row-error" }, message));
    }
  }
}
