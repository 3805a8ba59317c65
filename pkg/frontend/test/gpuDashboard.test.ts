// GPU dashboard: ratios and per-session means displayed raw, node table,
// and the drill-down history chart.

import { describe, expect, it } from "vitest";
import {
  renderAggregate,
  renderGpuHistory,
  renderNodes,
  renderSessionBars,
} from "../src/gpuDashboard.js";
import type { Aggregate, NodesResponse, SessionTelemetry } from "../src/types.js";
import { fixture } from "./fixtures.js";

const agg = fixture<Aggregate>("aggregate.json");
const nodes = fixture<NodesResponse>("nodes.json");
const telemetry = fixture<SessionTelemetry>("session_telemetry_s1.json");

describe("gpu dashboard", () => {
  it("headline ratios are byte-equal to the aggregate payload", () => {
    const html = renderAggregate(agg);
    expect(html).toContain(
      `<div class="value" id="running-ratio">${String(agg.running_ratio)}</div>`);
    expect(html).toContain(
      `<div class="value" id="over80-ratio">${String(agg.over80_ratio)}</div>`);
    expect(html).toContain(String(agg.total_gpus));
  });

  it("per-session bars carry the raw mean and the session id", () => {
    const html = renderSessionBars(agg);
    for (const [sid, mean] of Object.entries(agg.per_session_mean)) {
      expect(html).toContain(`data-session-id="${sid}"`);
      expect(html).toContain(`<span class="value">${String(mean)}</span>`);
    }
  });

  it("empty windows get an explicit empty state", () => {
    const html = renderAggregate({ ...agg, empty: true });
    expect(html).toContain("no telemetry in window");
  });

  it("node table mirrors the nodes payload", () => {
    const html = renderNodes(nodes);
    for (const n of nodes.nodes) {
      expect(html).toContain(`data-node-id="${n.node_id}"`);
      expect(html).toContain(`${String(n.available_gpus)}/${String(n.total_gpus)}`);
      for (const ds of n.cached_datasets) {
        expect(html).toContain(ds);
      }
    }
  });

  it("drill-down renders one polyline per gpu of the session", () => {
    const html = renderGpuHistory(telemetry);
    const gpus = new Set(telemetry.samples.map(
      (s) => `${s.node_id}/gpu${s.gpu_index}`));
    expect([...html.matchAll(/<polyline/g)]).toHaveLength(gpus.size);
    expect(html).toContain(`data-session-id="${telemetry.session_id}"`);
  });
});
