// Multi-session comparison: the common/exclusive argument matrix straight
// from the compare endpoint, plus one line chart per metric name. Hovering a
// chart line highlights the matching matrix row and vice versa; the linkage
// runs on data-session-id attributes, wired by the app shell.

import { cell, esc, tag } from "./render.js";
import type { CompareReport, EventsResponse } from "./types.js";

export const PALETTE = ["#e8833a", "#4ea3df", "#7bc67b", "#c678dd",
  "#e06c75", "#d6c25a"];

export function colorFor(index: number): string {
  return PALETTE[index % PALETTE.length];
}

export function renderCommonArgs(report: CompareReport): string {
  const entries = Object.entries(report.common_args);
  if (entries.length === 0) {
    return `<p class="muted">no common arguments</p>`;
  }
  const items = entries
    .map(([k, v]) => `<span class="pair">${cell(k)}=${cell(v)}</span>`)
    .join(" ");
  return `<p class="common">${items}</p>`;
}

export function renderCompareMatrix(report: CompareReport): string {
  const header =
    "<tr><th>session</th>" +
    report.params.map((p) => `<th>${cell(p)}</th>`).join("") +
    "</tr>";
  const rows = report.rows
    .map((row, i) => {
      const cells = report.params
        .map((p) => {
          const value = row.values[p];
          if (value === null || value === undefined) {
            return `<td class="absent" title="not set"></td>`;
          }
          return `<td title="${esc(p)}=${esc(value)}">${cell(value)}</td>`;
        })
        .join("");
      const swatch = `<span class="swatch" style="background:${colorFor(i)}"></span>`;
      return tag(
        "tr",
        { "data-session-id": row.session_id, class: "cmp-row" },
        `<td class="mono">${swatch}${cell(row.session_id)}</td>${cells}`,
      );
    })
    .join("");
  return tag("table", { class: "grid matrix", id: "compare-matrix" },
    `<thead>${header}</thead><tbody>${rows}</tbody>`);
}

export interface Series {
  sessionId: string;
  color: string;
  points: Array<[number, number]>; // [step, value]
}

// regroup event tuples by metric name; values pass through untouched
export function seriesByMetric(
  eventsBySession: Array<EventsResponse>,
): Map<string, Series[]> {
  const metrics = new Map<string, Series[]>();
  eventsBySession.forEach((payload, index) => {
    const mine = new Map<string, Series>();
    for (const [step, name, value] of payload.events) {
      let series = mine.get(name);
      if (!series) {
        series = { sessionId: payload.session_id, color: colorFor(index), points: [] };
        mine.set(name, series);
        if (!metrics.has(name)) {
          metrics.set(name, []);
        }
        metrics.get(name)!.push(series);
      }
      series.points.push([step, value]);
    }
  });
  return metrics;
}

const W = 420;
const H = 160;
const PAD = 24;

function scale(points: Array<[number, number]>, los: number[], his: number[]): string {
  const [loX, loY] = los;
  const [hiX, hiY] = his;
  const spanX = hiX - loX || 1;
  const spanY = hiY - loY || 1;
  return points
    .map(([x, y]) => {
      const px = PAD + ((x - loX) / spanX) * (W - 2 * PAD);
      const py = H - PAD - ((y - loY) / spanY) * (H - 2 * PAD);
      return `${px.toFixed(1)},${py.toFixed(1)}`;
    })
    .join(" ");
}

export function renderMetricChart(name: string, series: Series[]): string {
  const all = series.flatMap((s) => s.points);
  const xs = all.map((p) => p[0]);
  const ys = all.map((p) => p[1]);
  const los = [Math.min(...xs), Math.min(...ys)];
  const his = [Math.max(...xs), Math.max(...ys)];
  const lines = series
    .map((s) =>
      `<polyline class="line" data-session-id="${esc(s.sessionId)}" ` +
      `fill="none" stroke="${s.color}" stroke-width="1.5" ` +
      `points="${scale(s.points, los, his)}"></polyline>`,
    )
    .join("");
  return (
    `<figure class="chart" data-metric="${esc(name)}">` +
    `<figcaption>${esc(name)}</figcaption>` +
    `<svg viewBox="0 0 ${W} ${H}" width="${W}" height="${H}">${lines}</svg>` +
    `</figure>`
  );
}

export function renderCompareView(
  report: CompareReport,
  eventsBySession: EventsResponse[],
): string {
  const charts = [...seriesByMetric(eventsBySession).entries()]
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([name, series]) => renderMetricChart(name, series))
    .join("");
  return (
    `<section id="compare-args"><h3>common arguments</h3>` +
    renderCommonArgs(report) +
    `<h3>exclusive arguments</h3>` +
    renderCompareMatrix(report) +
    `</section>` +
    `<section id="compare-charts">${charts}</section>`
  );
}
