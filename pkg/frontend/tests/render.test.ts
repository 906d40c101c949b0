// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from "vitest";

import {
  formatCell,
  lifecycleBadgeClass,
  primaryAction,
  renderApprovals,
  renderComparisonTable,
  renderMetrics,
  renderQueue,
} from "../src/render.js";
import type { PortalViewModel } from "../src/state.js";
import type { ApprovalView } from "../src/types.js";

function target(): HTMLElement {
  const node = document.createElement("div");
  document.body.append(node);
  return node;
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("formatting", () => {
  it("renders missing values as not measured", () => {
    expect(formatCell(null)).toBe("not measured");
    expect(formatCell(undefined)).toBe("not measured");
    expect(formatCell(0.973, 2)).toBe("0.97");
  });

  it("maps lifecycles to badge classes", () => {
    expect(lifecycleBadgeClass("Resolved")).toBe("badge-ok");
    expect(lifecycleBadgeClass("AwaitingApproval")).toBe("badge-pending");
    expect(lifecycleBadgeClass("Failed")).toBe("badge-fail");
  });
});

describe("renderQueue", () => {
  it("renders ranked rows with lifecycle badges", () => {
    const node = target();
    renderQueue(node, [
      {
        finding_id: "f1",
        asset_id: "scada-1",
        cve_id: "CVE-2024-21302",
        catalog_entry_id: "unpatched-systems",
        detected_tick: 61,
        risk_band: "High",
        impact_score: 0.97,
        rank: 1,
        lifecycle: "AwaitingApproval",
      },
    ]);
    const row = node.querySelector("tbody tr") as HTMLTableRowElement;
    expect(row.dataset.findingId).toBe("f1");
    expect(row.textContent).toContain("CVE-2024-21302");
    expect(row.textContent).toContain("0.97");
    const badge = row.querySelector(".badge") as HTMLElement;
    expect(badge.className).toContain("badge-pending");
    expect(badge.textContent).toBe("AwaitingApproval");
  });

  it("renders an empty message without entries", () => {
    const node = target();
    renderQueue(node, []);
    expect(node.textContent).toContain("No findings");
  });
});

describe("renderApprovals", () => {
  const approval: ApprovalView = {
    plan_id: "plan-1",
    finding_id: "f1",
    asset_id: "scada-1",
    actions: ["IsolateSegment", "FirmwareUpgrade", "RestartService"],
    rationale: { state: "unpatched-systems|ScadaController|InternetFacing", pinned: false,
                 q_values: { FirmwareUpgrade: 0.5, AutoPatch: 0.25 } },
    impact_score: 0.97,
    script_format: "WorkflowAutomation",
    script_text: "- step: IsolateSegment | asset=scada-1\n- step: FirmwareUpgrade | asset=scada-1 | target_version=X.1.3\n",
  };

  it("shows the script text verbatim beside the structured steps", () => {
    const node = target();
    renderApprovals(node, [approval], () => undefined);
    const pre = node.querySelector(".script-text") as HTMLElement;
    expect(pre.textContent).toBe(approval.script_text);
    const steps = [...node.querySelectorAll(".steps li")].map((li) => li.textContent);
    expect(steps).toEqual(["IsolateSegment", "FirmwareUpgrade", "RestartService"]);
    expect(node.textContent).toContain("impact 0.97");
  });

  it("submits an approval without ban", () => {
    const node = target();
    const got: unknown[] = [];
    renderApprovals(node, [approval], (...args) => got.push(args));
    (node.querySelector("input[name=comment]") as HTMLInputElement).value = "looks fine";
    (node.querySelector("button.approve") as HTMLButtonElement).click();
    expect(got).toEqual([["plan-1", "Approve", "looks fine", undefined]]);
  });

  it("ban applies only on explicit reject with the box checked", () => {
    const node = target();
    const got: unknown[] = [];
    renderApprovals(node, [approval], (...args) => got.push(args));
    (node.querySelector("input[name=ban]") as HTMLInputElement).checked = true;
    (node.querySelector("button.reject") as HTMLButtonElement).click();
    expect(got).toEqual([["plan-1", "Reject", "", "FirmwareUpgrade"]]);
  });

  it("approve ignores the ban checkbox", () => {
    const node = target();
    const got: unknown[][] = [];
    renderApprovals(node, [approval], (...args) => got.push(args));
    (node.querySelector("input[name=ban]") as HTMLInputElement).checked = true;
    (node.querySelector("button.approve") as HTMLButtonElement).click();
    expect(got[0]?.[3]).toBeUndefined();
  });

  it("extracts the learned core step, not the wrappers", () => {
    expect(primaryAction(approval)).toBe("FirmwareUpgrade");
    expect(primaryAction({ plan_id: "p", actions: ["IsolateSegment"] })).toBe("IsolateSegment");
    expect(primaryAction({ plan_id: "p", actions: ["RateLimit"] })).toBe("RateLimit");
  });
});

describe("metrics rendering", () => {
  it("renders dash cells as not measured", () => {
    const table = renderComparisonTable([
      { metric: "Patching Time (weeks)", traditional: null, aisa: 0.01, savings_pct: null,
        direction: "lower" },
    ]);
    expect(table.textContent).toContain("not measured");
    expect(table.textContent).toContain("Patching Time (weeks)");
  });

  it("renders the comparison when present", () => {
    const node = target();
    const view = {
      status: "live",
      queue: { tick: 1, entries: [] },
      pending: [],
      decided: [],
      feed: [],
      notice: null,
      metrics: {
        run_id: "r1",
        mode: "aisa",
        tick: 100,
        finished: true,
        metrics: {},
        comparison: {
          rows: [
            { metric: "Number of Breaches", traditional: 2, aisa: 0, savings_pct: 100,
              direction: "lower" },
          ],
        },
      },
    } as unknown as PortalViewModel;
    renderMetrics(node, view);
    expect(node.textContent).toContain("Number of Breaches");
    expect(node.textContent).toContain("100.0%");
  });
});
