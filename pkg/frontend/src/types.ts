export interface AuditEvent {
  seq: number;
  tick: number;
  kind: string;
  payload: Record<string, unknown>;
  prev_hash: string;
  hash: string;
}

export interface QueueEntry {
  finding_id: string;
  asset_id: string;
  cve_id: string | null;
  catalog_entry_id: string | null;
  detected_tick: number;
  risk_band: string | null;
  impact_score: number | null;
  rank: number | null;
  lifecycle: string;
}

export interface QueueView {
  tick: number;
  entries: QueueEntry[];
}

export interface ApprovalView {
  plan_id: string;
  finding_id?: string;
  asset_id?: string;
  actions?: string[];
  rationale?: { state?: string; pinned?: boolean; q_values?: Record<string, number> };
  impact_score?: number | null;
  script_format?: string;
  script_text?: string;
  status?: string;
  requested_tick?: number | null;
  decision?: { verdict: string; actor: string; comment: string; tick: number } | null;
}

export interface MetricRow {
  metric: string;
  traditional: number | null;
  aisa: number | null;
  savings_pct: number | null;
  direction: string;
}

export interface MetricsView {
  run_id: string;
  mode: string;
  tick: number;
  finished: boolean;
  metrics: Record<string, number | null>;
  comparison?: { rows: MetricRow[] };
}

export type StreamStatus = "connecting" | "live" | "stale" | "ended";
