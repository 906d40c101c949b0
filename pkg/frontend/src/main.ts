import { ApiClient, ApiError } from "./api.js";
import { renderAll } from "./render.js";
import { PortalStore } from "./state.js";
import { EventStream } from "./stream.js";

function mustGet(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

export function boot(base = ""): { store: PortalStore; stream: EventStream } {
  const api = new ApiClient(base);
  const store = new PortalStore(api);
  const roots = {
    status: mustGet("status"),
    queue: mustGet("queue"),
    approvals: mustGet("approvals"),
    metrics: mustGet("metrics"),
    feed: mustGet("feed"),
    notice: mustGet("notice"),
  };

  const onDecision = (
    planId: string,
    verdict: "Approve" | "Reject",
    comment: string,
    banAction?: string,
  ) => {
    api
      .decide(planId, { verdict, actor: "portal-sme", comment, ban_action: banAction })
      .then(() => {
        store.setNotice(null);
        return store.refresh();
      })
      .catch((error: unknown) => {
        if (error instanceof ApiError && error.status === 409) {
          store.setNotice(`Plan ${planId} was already decided elsewhere.`);
          void store.refresh();
        } else {
          store.setNotice(String(error));
        }
      });
  };

  store.subscribe((view) => renderAll(roots, view, onDecision));
  void store.refresh();

  const stream = new EventStream(base, {
    onEvent: (event) => store.onEvent(event),
    onStatus: (status) => store.setStatus(status),
  });
  void stream.run();
  return { store, stream };
}

declare global {
  interface Window {
    aisaPortal?: ReturnType<typeof boot>;
  }
}

if (typeof document !== "undefined" && document.getElementById("status")) {
  window.aisaPortal = boot("");
}
