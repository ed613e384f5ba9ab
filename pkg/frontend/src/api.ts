/**
 * Typed client for the matching service. The console renders only what
 * these endpoints return — no score is recomputed client-side.
 */

// -- Types --------------------------------------------------------------------

export interface EntitySummary {
  entity_id: string;
  size: number;
  representative: string;
}

export interface EntityListPage {
  items: EntitySummary[];
  next_page_token: number | null;
  total: number;
}

export interface MemberRecord {
  record_id: string;
  attributes: Record<string, string>;
}

export interface PairScore {
  a: string;
  b: string;
  total: number;
  class: string | null;
  contrib: Record<string, number>;
}

export interface EntityDetail {
  entity_id: string;
  representative: string;
  members: MemberRecord[];
  edges: { member: string; representative: string }[];
  pair_scores: PairScore[];
}

export interface Attribution {
  a: string;
  b: string;
  contributions: Record<string, number>;
  intercept: number;
  r2: number;
}

export interface Explanation {
  a: string;
  b: string;
  proxy_probability: number;
  fidelity: number;
  mask_rollup: Record<string, number>;
  top_attributes: { attribute: string; score: number }[];
  attribution: Attribution;
}

export interface UnlinkResult {
  separating: boolean;
  already_applied: boolean;
  new_partition_summary: {
    entities: number;
    entity_of_a: string | null;
    entity_of_b: string | null;
  };
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

// -- Transport ----------------------------------------------------------------

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(path, init);
  } catch {
    throw new ApiError(0, "unreachable", "service unreachable");
  }
  if (!response.ok) {
    let code = "http_error";
    let message = `${response.status}`;
    try {
      const body = await response.json();
      code = body?.error?.code ?? code;
      message = body?.error?.message ?? message;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, code, message);
  }
  return response.json() as Promise<T>;
}

function post<T>(path: string, body: unknown): Promise<T> {
  return request<T>(path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
}

// -- Endpoints ----------------------------------------------------------------

export function listEntities(
  opts: { minSize?: number; limit?: number; pageToken?: number } = {},
): Promise<EntityListPage> {
  const params = new URLSearchParams();
  if (opts.minSize !== undefined) params.set("min_size", String(opts.minSize));
  if (opts.limit !== undefined) params.set("limit", String(opts.limit));
  if (opts.pageToken !== undefined) params.set("page_token", String(opts.pageToken));
  const qs = params.toString();
  return request<EntityListPage>(qs ? `/entities?${qs}` : "/entities");
}

export function getEntity(entityId: string): Promise<EntityDetail> {
  return request<EntityDetail>(`/entities/${encodeURIComponent(entityId)}`);
}

export function explainPair(a: string, b: string): Promise<Explanation> {
  return post<Explanation>("/explain", { a, b });
}

export function unlinkPair(
  a: string,
  b: string,
  author: string,
): Promise<UnlinkResult> {
  return post<UnlinkResult>("/unlink", { a, b, author });
}
