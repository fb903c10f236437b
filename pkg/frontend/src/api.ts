/** Typed access to the warehouse side of the service API.
 *
 * Every call resolves with the parsed JSON body or throws ServiceError
 * carrying the server's `{"error": ...}` message. Nothing here reshapes
 * data beyond parsing; the console displays what the service returns.
 */

export interface Location {
  lat: number;
  lon: number;
}

export interface Annotation {
  id: string;
  assetUrn: string;
  tagUrn: string;
  annotator: string;
  note: string | number;
  timestamp: string;
  validation: string;
  location?: Location;
  reviewedBy?: string;
}

export interface AssetMatch {
  assetUrn: string;
  tags: Record<string, number>;
  total: number;
}

export interface Tag {
  urn: string;
  name: string;
  domain: string;
}

export interface TagDomain {
  urn: string;
  name: string;
  description: string;
  tags: Tag[];
}

export interface Liveness {
  service: string;
  version: string;
  status: string;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

/** status 0 marks a network-level failure (no HTTP response at all). */
export function isUnreachable(err: unknown): boolean {
  return err instanceof ServiceError && err.status === 0;
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(base + path, init);
  } catch {
    throw new ServiceError(0, `cannot reach ${base || "the service"}`);
  }
  const text = await response.text();
  let payload: unknown = null;
  if (text) {
    try {
      payload = JSON.parse(text);
    } catch {
      payload = null;
    }
  }
  if (!response.ok) {
    const envelope = payload as { error?: unknown } | null;
    const message =
      envelope && typeof envelope.error === "string"
        ? envelope.error
        : `${response.status} ${response.statusText}`;
    throw new ServiceError(response.status, message);
  }
  return payload as T;
}

function jsonInit(body: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  };
}

export function liveness(base: string): Promise<Liveness> {
  return request<Liveness>(base, "/");
}

export function listFeed(base: string, limit: number): Promise<Annotation[]> {
  return request<Annotation[]>(base, `/warehouse/annotations?limit=${limit}`);
}

export interface AssetAnnotationQuery {
  from?: string;
  to?: string;
  domain?: string;
}

export function listAssetAnnotations(
  base: string,
  assetUrn: string,
  query: AssetAnnotationQuery = {},
): Promise<Annotation[]> {
  const params = new URLSearchParams();
  if (query.from) params.set("from", query.from);
  if (query.to) params.set("to", query.to);
  if (query.domain) params.set("domain", query.domain);
  const qs = params.toString();
  const path = `/warehouse/assets/${encodeURIComponent(assetUrn)}/annotations${qs ? "?" + qs : ""}`;
  return request<Annotation[]>(base, path);
}

export interface AssetQuery {
  tags: string[];
  bbox?: string;
  from?: string;
  to?: string;
  includeRejected?: boolean;
}

export function findAssets(base: string, query: AssetQuery): Promise<AssetMatch[]> {
  const params = new URLSearchParams();
  params.set("tags", query.tags.join(","));
  if (query.bbox) params.set("bbox", query.bbox);
  if (query.from) params.set("from", query.from);
  if (query.to) params.set("to", query.to);
  if (query.includeRejected) params.set("includeRejected", "true");
  return request<AssetMatch[]>(base, `/warehouse/assets?${params.toString()}`);
}

export function listTagDomains(base: string): Promise<TagDomain[]> {
  return request<TagDomain[]>(base, "/warehouse/tagDomains");
}

export function suggestTags(base: string, domainUrn: string): Promise<Tag[]> {
  return request<Tag[]>(base, `/warehouse/tagDomains/${encodeURIComponent(domainUrn)}/suggest`);
}

export function reviewAnnotation(
  base: string,
  annotationId: string,
  verdict: "confirmed" | "rejected",
  userId: string,
): Promise<Annotation> {
  const path = `/warehouse/annotations/${encodeURIComponent(annotationId)}/review`;
  return request<Annotation>(base, path, jsonInit({ verdict, userId }));
}

export interface NewAnnotation {
  assetUrn: string;
  tagUrn: string;
  annotator: string;
  note: string | number;
  location?: Location;
}

export function createAnnotation(base: string, body: NewAnnotation): Promise<Annotation> {
  return request<Annotation>(base, "/warehouse/annotations", jsonInit(body));
}
