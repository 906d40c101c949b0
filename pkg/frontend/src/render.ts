import type { PortalViewModel } from "./state.js";
import type { ApprovalView, AuditEvent, MetricRow, QueueEntry } from "./types.js";

export function formatCell(value: number | null | undefined, digits = 2): string {
  if (value === null || value === undefined) return "not measured";
  return value.toFixed(digits);
}

export function lifecycleBadgeClass(lifecycle: string): string {
  const map: Record<string, string> = {
    Queued: "badge-info",
    Analyzed: "badge-info",
    Planned: "badge-planning",
    AwaitingApproval: "badge-pending",
    Remediating: "badge-running",
    Resolved: "badge-ok",
    Failed: "badge-fail",
    Rejected: "badge-fail",
  };
  return map[lifecycle] ?? "badge-info";
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

// happy-dom lacks the insertRow/insertCell conveniences, so tables are built
// from plain elements.
function table(headers: string[]): { table: HTMLTableElement; body: HTMLElement } {
  const node = el("table", "grid") as HTMLTableElement;
  const thead = el("thead", "");
  const headRow = el("tr", "");
  for (const title of headers) headRow.append(el("th", "", title));
  thead.append(headRow);
  const body = el("tbody", "");
  node.append(thead, body);
  return { table: node, body };
}

function cell(text: string): HTMLElement {
  return el("td", "", text);
}

export function renderStatus(target: HTMLElement, view: PortalViewModel): void {
  target.textContent = "";
  const dot = el("span", `dot dot-${view.status}`);
  const label = {
    connecting: "connecting",
    live: "live",
    stale: "connection lost, data may be stale",
    ended: "run complete",
  }[view.status];
  target.append(dot, el("span", "status-text", ` ${label}`));
  target.className = view.status === "stale" ? "statusbar stale-banner" : "statusbar";
}

export function renderQueue(target: HTMLElement, entries: QueueEntry[]): void {
  target.textContent = "";
  if (!entries.length) {
    target.append(el("p", "empty", "No findings in the queue."));
    return;
  }
  const { table: grid, body } = table(["#", "Finding", "Asset", "CVE", "Risk", "Impact", "Lifecycle"]);
  for (const entry of entries) {
    const row = el("tr", "") as HTMLTableRowElement;
    row.dataset.findingId = entry.finding_id;
    row.append(
      cell(entry.rank === null ? "-" : String(entry.rank)),
      cell(entry.finding_id),
      cell(entry.asset_id),
      cell(entry.cve_id ?? "-"),
      cell(entry.risk_band ?? "-"),
      cell(entry.impact_score === null ? "-" : entry.impact_score.toFixed(2)),
    );
    const badgeCell = cell("");
    badgeCell.append(el("span", `badge ${lifecycleBadgeClass(entry.lifecycle)}`, entry.lifecycle));
    row.append(badgeCell);
    body.append(row);
  }
  target.append(grid);
}

export interface DecisionHandler {
  (planId: string, verdict: "Approve" | "Reject", comment: string, banAction?: string): void;
}

export function renderApprovals(
  target: HTMLElement,
  pending: ApprovalView[],
  onDecision: DecisionHandler,
): void {
  target.textContent = "";
  if (!pending.length) {
    target.append(el("p", "empty", "No plans waiting for review."));
    return;
  }
  for (const approval of pending) {
    const card = el("section", "card approval-card");
    card.dataset.planId = approval.plan_id;
    card.append(el("h3", "", `${approval.plan_id} on ${approval.asset_id ?? "?"}`));
    const meta = el("p", "meta");
    meta.textContent =
      `impact ${formatCell(approval.impact_score)} | ` +
      `state ${approval.rationale?.state ?? "?"}` +
      (approval.rationale?.pinned ? " | pinned by expert" : "");
    card.append(meta);

    const columns = el("div", "columns");
    const stepsCol = el("div", "col");
    stepsCol.append(el("h4", "", "Plan steps"));
    const list = el("ol", "steps");
    for (const action of approval.actions ?? []) list.append(el("li", "", action));
    stepsCol.append(list);
    const qv = approval.rationale?.q_values ?? {};
    const qList = el("ul", "qvalues");
    for (const [action, q] of Object.entries(qv).sort((a, b) => b[1] - a[1]).slice(0, 5)) {
      qList.append(el("li", "", `${action}: ${q.toFixed(3)}`));
    }
    stepsCol.append(el("h4", "", "Learned values"), qList);
    columns.append(stepsCol);

    const scriptCol = el("div", "col");
    scriptCol.append(el("h4", "", `Script (${approval.script_format ?? "?"})`));
    const pre = el("pre", "script-text");
    pre.textContent = approval.script_text ?? "(unavailable)";
    scriptCol.append(pre);
    columns.append(scriptCol);
    card.append(columns);

    const form = el("form", "decision-form") as HTMLFormElement;
    const comment = document.createElement("input");
    comment.type = "text";
    comment.name = "comment";
    comment.placeholder = "review comment";
    const banBox = document.createElement("input");
    banBox.type = "checkbox";
    banBox.name = "ban";
    banBox.id = `ban-${approval.plan_id}`;
    const banLabel = el("label", "ban-label");
    const primary = primaryAction(approval);
    banLabel.append(banBox, document.createTextNode(` ban ${primary ?? "action"} for this situation`));
    const approve = el("button", "approve", "Approve") as HTMLButtonElement;
    approve.type = "submit";
    approve.dataset.verdict = "Approve";
    const reject = el("button", "reject", "Reject") as HTMLButtonElement;
    reject.type = "submit";
    reject.dataset.verdict = "Reject";
    let verdict: "Approve" | "Reject" = "Approve";
    approve.addEventListener("click", () => (verdict = "Approve"));
    reject.addEventListener("click", () => (verdict = "Reject"));
    form.append(comment, approve, reject, banLabel);
    form.addEventListener("submit", (submitEvent) => {
      submitEvent.preventDefault();
      const ban = verdict === "Reject" && banBox.checked && primary ? primary : undefined;
      onDecision(approval.plan_id, verdict, comment.value, ban);
    });
    card.append(form);
    target.append(card);
  }
}

/** The learned core step: the plan minus the isolation prefix and restart
 * suffix wrappers. */
export function primaryAction(approval: ApprovalView): string | undefined {
  const actions = approval.actions ?? [];
  const core = actions.filter(
    (a, i) => !(i === 0 && a === "IsolateSegment" && actions.length > 1) && a !== "RestartService",
  );
  return core[0] ?? actions[0];
}

export function renderMetrics(target: HTMLElement, view: PortalViewModel): void {
  target.textContent = "";
  const metrics = view.metrics;
  if (!metrics) {
    target.append(el("p", "empty", "No metrics yet."));
    return;
  }
  target.append(
    el("p", "meta", `run ${metrics.run_id} | mode ${metrics.mode} | tick ${metrics.tick}` +
      (metrics.finished ? " | finished" : "")),
  );
  if (metrics.comparison) {
    target.append(renderComparisonTable(metrics.comparison.rows));
    return;
  }
  const { table: grid, body } = table(["Metric", "Value"]);
  for (const [key, value] of Object.entries(metrics.metrics)) {
    const row = el("tr", "");
    row.append(cell(key), cell(formatCell(value)));
    body.append(row);
  }
  target.append(grid);
}

export function renderComparisonTable(rows: MetricRow[]): HTMLTableElement {
  const { table: grid, body } = table(["Metric", "Traditional", "AISA", "Savings %"]);
  for (const row of rows) {
    const tr = el("tr", "");
    tr.append(
      cell(row.metric),
      cell(formatCell(row.traditional)),
      cell(formatCell(row.aisa)),
      cell(row.savings_pct === null ? "not measured" : `${row.savings_pct.toFixed(1)}%`),
    );
    body.append(tr);
  }
  return grid;
}

export function renderFeed(target: HTMLElement, feed: AuditEvent[]): void {
  target.textContent = "";
  for (const event of feed.slice(-50).reverse()) {
    const line = el("div", "feed-line");
    line.append(
      el("span", "feed-seq", `#${event.seq}`),
      el("span", "feed-tick", `t${event.tick}`),
      el("span", `feed-kind kind-${event.kind}`, event.kind),
      el("span", "feed-detail", feedDetail(event)),
    );
    target.append(line);
  }
}

function feedDetail(event: AuditEvent): string {
  const p = event.payload as Record<string, unknown>;
  const bits: string[] = [];
  for (const key of ["finding_id", "plan_id", "verdict", "integrity", "impact_score"]) {
    if (p[key] !== undefined && p[key] !== null) bits.push(`${key}=${String(p[key])}`);
  }
  return bits.join(" ");
}

export function renderAll(
  roots: {
    status: HTMLElement;
    queue: HTMLElement;
    approvals: HTMLElement;
    metrics: HTMLElement;
    feed: HTMLElement;
    notice: HTMLElement;
  },
  view: PortalViewModel,
  onDecision: DecisionHandler,
): void {
  renderStatus(roots.status, view);
  renderQueue(roots.queue, view.queue.entries);
  renderApprovals(roots.approvals, view.pending, onDecision);
  renderMetrics(roots.metrics, view);
  renderFeed(roots.feed, view.feed);
  roots.notice.textContent = view.notice ?? "";
  roots.notice.style.display = view.notice ? "block" : "none";
}
