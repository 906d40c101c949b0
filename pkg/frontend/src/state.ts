import type { ApiClient } from "./api.js";
import type {
  ApprovalView,
  AuditEvent,
  MetricsView,
  QueueView,
  StreamStatus,
} from "./types.js";

const FEED_LIMIT = 200;

export interface PortalViewModel {
  status: StreamStatus;
  queue: QueueView;
  pending: ApprovalView[];
  decided: ApprovalView[];
  metrics: MetricsView | null;
  feed: AuditEvent[];
  notice: string | null;
}

/** Holds the current view model. Every displayed value comes from snapshot
 * endpoints; stream events only tell the store *when* to refresh, plus feed
 * the event tail. A full page refresh therefore reproduces identical views. */
export class PortalStore {
  view: PortalViewModel = {
    status: "connecting",
    queue: { tick: 0, entries: [] },
    pending: [],
    decided: [],
    metrics: null,
    feed: [],
    notice: null,
  };

  private listeners: Array<(view: PortalViewModel) => void> = [];
  private refreshing: Promise<void> | null = null;
  private refreshAgain = false;

  constructor(private api: ApiClient) {}

  subscribe(listener: (view: PortalViewModel) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.view);
  }

  setStatus(status: StreamStatus): void {
    if (this.view.status !== status) {
      this.view = { ...this.view, status };
      this.emit();
    }
  }

  setNotice(notice: string | null): void {
    this.view = { ...this.view, notice };
    this.emit();
  }

  onEvent(event: AuditEvent): void {
    const feed = [...this.view.feed, event].slice(-FEED_LIMIT);
    this.view = { ...this.view, feed };
    this.emit();
    void this.refresh();
  }

  /** Re-pull all snapshots; collapses bursts into at most one trailing run. */
  refresh(): Promise<void> {
    if (this.refreshing) {
      this.refreshAgain = true;
      return this.refreshing;
    }
    this.refreshing = this.doRefresh().finally(() => {
      this.refreshing = null;
      if (this.refreshAgain) {
        this.refreshAgain = false;
        void this.refresh();
      }
    });
    return this.refreshing;
  }

  private async doRefresh(): Promise<void> {
    try {
      const [queue, pending, decided, metrics] = await Promise.all([
        this.api.queue(),
        this.api.approvals("pending"),
        this.api.approvals("decided"),
        this.api.metrics(),
      ]);
      this.view = {
        ...this.view,
        queue,
        pending: pending.approvals,
        decided: decided.approvals,
        metrics,
      };
      this.emit();
    } catch {
      this.setStatus("stale");
    }
  }
}
