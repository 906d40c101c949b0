import type { ApprovalView, MetricsView, QueueView } from "./types.js";

export interface DecisionBody {
  verdict: "Approve" | "Reject";
  actor: string;
  comment: string;
  ban_action?: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

/** Thin typed client over the pipeline's HTTP API. The portal displays only
 * what these calls return; it keeps no authoritative state of its own. */
export class ApiClient {
  private fetchImpl: typeof fetch;

  constructor(
    private base = "",
    fetchImpl?: typeof fetch,
  ) {
    this.fetchImpl = fetchImpl ?? fetch;
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.base}${path}`);
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
    return (await response.json()) as T;
  }

  queue(): Promise<QueueView> {
    return this.get("/api/queue");
  }

  approvals(status: "pending" | "decided" | "all" = "pending"): Promise<{ approvals: ApprovalView[] }> {
    return this.get(`/api/approvals?status=${status}`);
  }

  metrics(): Promise<MetricsView> {
    return this.get("/api/metrics");
  }

  async decide(planId: string, body: DecisionBody): Promise<void> {
    const response = await this.fetchImpl(`${this.base}/api/approvals/${planId}/decision`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
  }

  async contain(findingId: string, actor: string): Promise<void> {
    const response = await this.fetchImpl(`${this.base}/api/findings/${findingId}/contain`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ actor }),
    });
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: string };
    return body.detail ?? response.statusText;
  } catch {
    return response.statusText;
  }
}
