// Fleet utilization: headline ratios for the chosen window, average
// utilization bars per session, node inventory, and a per-GPU history chart
// for a drilled-in session.

import { cell, esc, tag } from "./render.js";
import type { Aggregate, NodesResponse, SessionTelemetry } from "./types.js";

export function renderAggregate(agg: Aggregate): string {
  if (agg.empty) {
    return `<p class="muted" id="agg-empty">no telemetry in window ` +
      `${cell(agg.window[0])}..${cell(agg.window[1])}</p>`;
  }
  return (
    `<div id="agg">` +
    `<div class="stat"><div class="label">running GPUs</div>` +
    `<div class="value" id="running-ratio">${cell(agg.running_ratio)}</div></div>` +
    `<div class="stat"><div class="label">over 80% util</div>` +
    `<div class="value" id="over80-ratio">${cell(agg.over80_ratio)}</div></div>` +
    `<div class="stat"><div class="label">total GPUs</div>` +
    `<div class="value">${cell(agg.total_gpus)}</div></div>` +
    `</div>`
  );
}

export function renderSessionBars(agg: Aggregate): string {
  const entries = Object.entries(agg.per_session_mean);
  if (entries.length === 0) {
    return `<p class="muted">no attributed samples</p>`;
  }
  const rows = entries
    .map(([sid, mean]) => {
      const width = Math.max(1, Math.min(100, mean));
      return tag(
        "div",
        { class: "bar-row", "data-session-id": sid },
        `<span class="mono name">${cell(sid)}</span>` +
        `<span class="bar"><span class="fill" style="width:${width}%"></span></span>` +
        `<span class="value">${cell(mean)}</span>`,
      );
    })
    .join("");
  return `<div id="session-bars">${rows}</div>`;
}

export function renderNodes(payload: NodesResponse): string {
  const rows = payload.nodes
    .map((n) =>
      `<tr data-node-id="${esc(n.node_id)}">` +
      `<td class="mono">${cell(n.node_id)}</td>` +
      `<td>${cell(n.liveness)}</td>` +
      `<td>${cell(n.available_gpus)}/${cell(n.total_gpus)}</td>` +
      `<td class="mono">${n.cached_datasets.map(cell).join(", ")}</td>` +
      `<td>${cell(n.last_heartbeat)}</td></tr>`,
    )
    .join("");
  return tag("table", { class: "grid", id: "node-table" },
    "<thead><tr><th>node</th><th>liveness</th><th>free gpus</th>" +
    "<th>cached datasets</th><th>last heartbeat</th></tr></thead>" +
    `<tbody>${rows}</tbody>`);
}

const W = 420;
const H = 140;
const PAD = 20;

export function renderGpuHistory(telemetry: SessionTelemetry): string {
  const byGpu = new Map<string, Array<[number, number]>>();
  for (const row of telemetry.samples) {
    const key = `${row.node_id}/gpu${row.gpu_index}`;
    if (!byGpu.has(key)) {
      byGpu.set(key, []);
    }
    byGpu.get(key)!.push([row.ts, row.utilization_pct]);
  }
  if (byGpu.size === 0) {
    return `<p class="muted">no samples for ${cell(telemetry.session_id)}</p>`;
  }
  const ts = telemetry.samples.map((r) => r.ts);
  const loX = Math.min(...ts);
  const spanX = Math.max(...ts) - loX || 1;
  const lines = [...byGpu.entries()]
    .map(([key, points], i) => {
      const path = points
        .map(([x, y]) => {
          const px = PAD + ((x - loX) / spanX) * (W - 2 * PAD);
          const py = H - PAD - (y / 100) * (H - 2 * PAD);
          return `${px.toFixed(1)},${py.toFixed(1)}`;
        })
        .join(" ");
      return `<polyline fill="none" data-gpu="${esc(key)}" ` +
        `stroke="hsl(${(i * 67) % 360} 70% 60%)" stroke-width="1.5" ` +
        `points="${path}"></polyline>`;
    })
    .join("");
  return (
    `<figure class="chart" id="gpu-history" data-session-id="${esc(telemetry.session_id)}">` +
    `<figcaption>utilization history: ${cell(telemetry.session_id)}</figcaption>` +
    `<svg viewBox="0 0 ${W} ${H}" width="${W}" height="${H}">${lines}</svg>` +
    `</figure>`
  );
}
