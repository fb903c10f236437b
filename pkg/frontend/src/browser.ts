/** Asset-browser data helpers.
 *
 * Tag and bbox filtering happen server-side via find_assets. The free-text
 * filter is a display concern (the API has no text parameter) and only
 * narrows which returned rows are shown; it never invents data.
 */

import { Annotation, AssetMatch, findAssets } from "./api.js";

export interface AssetFilters {
  tags: string[];
  bbox?: string;
  text?: string;
  includeRejected?: boolean;
}

export async function fetchAssets(base: string, filters: AssetFilters): Promise<AssetMatch[]> {
  const matches = await findAssets(base, {
    tags: filters.tags,
    bbox: filters.bbox,
    includeRejected: filters.includeRejected,
  });
  const text = (filters.text ?? "").trim();
  if (!text) return matches;
  return matches.filter((m) => m.assetUrn.includes(text));
}

/** One row of the coordinate list that stands in for a map. */
export interface LocatedAnnotation {
  id: string;
  lat: number;
  lon: number;
  tagUrn: string;
  producedAt: string;
}

/** No tile source ships with the console, so spatial context degrades to
 * a list sorted by latitude then longitude. */
export function locatedEntries(annotations: Annotation[]): LocatedAnnotation[] {
  const out: LocatedAnnotation[] = [];
  for (const a of annotations) {
    if (!a.location) continue;
    out.push({
      id: a.id,
      lat: a.location.lat,
      lon: a.location.lon,
      tagUrn: a.tagUrn,
      producedAt: a.timestamp,
    });
  }
  out.sort(
    (p, q) =>
      p.lat - q.lat ||
      p.lon - q.lon ||
      (p.producedAt < q.producedAt ? -1 : p.producedAt > q.producedAt ? 1 : 0),
  );
  return out;
}

/** Short label for a tag URN; the full URN stays in the title attribute. */
export function tagLabel(tagUrn: string): string {
  const idx = tagUrn.lastIndexOf(":");
  return idx >= 0 ? tagUrn.slice(idx + 1) : tagUrn;
}
