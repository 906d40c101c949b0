import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { PortalStore } from "../src/state.js";
import type { AuditEvent } from "../src/types.js";

function jsonResponse(body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status: 200,
    headers: { "content-type": "application/json" },
  });
}

function fakeApi(snapshots: { queue?: unknown; pending?: unknown; decided?: unknown; metrics?: unknown }) {
  let calls = 0;
  const fetchImpl = (async (url: RequestInfo | URL) => {
    calls += 1;
    const path = String(url);
    if (path.includes("/api/queue")) return jsonResponse(snapshots.queue ?? { tick: 0, entries: [] });
    if (path.includes("status=pending")) return jsonResponse({ approvals: snapshots.pending ?? [] });
    if (path.includes("status=decided")) return jsonResponse({ approvals: snapshots.decided ?? [] });
    if (path.includes("/api/metrics")) {
      return jsonResponse(
        snapshots.metrics ?? { run_id: "r", mode: "aisa", tick: 0, finished: false, metrics: {} },
      );
    }
    throw new Error(`unexpected ${path}`);
  }) as typeof fetch;
  return { api: new ApiClient("", fetchImpl), callCount: () => calls };
}

function event(seq: number): AuditEvent {
  return { seq, tick: seq, kind: "Scored", payload: {}, prev_hash: "", hash: "" };
}

describe("PortalStore", () => {
  it("applies snapshots on refresh", async () => {
    const { api } = fakeApi({
      queue: { tick: 9, entries: [{ finding_id: "f1", lifecycle: "Queued" }] },
      pending: [{ plan_id: "p1" }],
    });
    const store = new PortalStore(api);
    await store.refresh();
    expect(store.view.queue.tick).toBe(9);
    expect(store.view.queue.entries).toHaveLength(1);
    expect(store.view.pending[0]?.plan_id).toBe("p1");
  });

  it("collapses event bursts into bounded refreshes", async () => {
    const { api, callCount } = fakeApi({});
    const store = new PortalStore(api);
    for (let i = 0; i < 25; i += 1) store.onEvent(event(i));
    await store.refresh();
    await new Promise((resolve) => setTimeout(resolve, 20));
    // 4 endpoints per refresh; a 25-event burst must not mean 25 refreshes
    expect(callCount()).toBeLessThan(25 * 4);
    expect(store.view.feed).toHaveLength(25);
  });

  it("caps the feed tail", () => {
    const { api } = fakeApi({});
    const store = new PortalStore(api);
    for (let i = 0; i < 250; i += 1) store.onEvent(event(i));
    expect(store.view.feed).toHaveLength(200);
    expect(store.view.feed[0]?.seq).toBe(50);
  });

  it("notifies subscribers on status changes only when changed", () => {
    const { api } = fakeApi({});
    const store = new PortalStore(api);
    let renders = 0;
    store.subscribe(() => {
      renders += 1;
    });
    store.setStatus("live");
    store.setStatus("live");
    store.setStatus("stale");
    expect(renders).toBe(2);
  });

  it("marks the view stale when a snapshot fetch fails", async () => {
    const failingFetch = (async () => new Response("x", { status: 500 })) as typeof fetch;
    const store = new PortalStore(new ApiClient("", failingFetch));
    await store.refresh();
    expect(store.view.status).toBe("stale");
  });
});
