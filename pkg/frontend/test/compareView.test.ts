// Matrix content must equal the compare endpoint's output; chart lines and
// matrix rows carry the session ids the hover linkage keys on.

import { describe, expect, it } from "vitest";
import {
  renderCommonArgs,
  renderCompareMatrix,
  renderCompareView,
  renderMetricChart,
  seriesByMetric,
} from "../src/compareView.js";
import type { CompareReport, EventsResponse } from "../src/types.js";
import { fixture } from "./fixtures.js";

const report = fixture<CompareReport>("compare.json");
const events = [
  fixture<EventsResponse>("events_s1.json"),
  fixture<EventsResponse>("events_s2.json"),
  fixture<EventsResponse>("events_s3.json"),
];

describe("compare matrix", () => {
  it("renders exactly the fixture's params as columns", () => {
    const html = renderCompareMatrix(report);
    const headers = [...html.matchAll(/<th>([^<]*)<\/th>/g)].map((m) => m[1]);
    expect(headers).toEqual(["session", ...report.params]);
  });

  it("cells are byte-equal to the payload values, absent stays empty", () => {
    const html = renderCompareMatrix(report);
    for (const row of report.rows) {
      const rowMatch = html.match(new RegExp(
        `<tr data-session-id="${row.session_id}"[^>]*>(.*?)</tr>`, "s"));
      expect(rowMatch).not.toBeNull();
      const cells = [...rowMatch![1].matchAll(/<td[^>]*>(.*?)<\/td>/g)]
        .map((m) => m[1].replace(/<[^>]+>/g, ""));
      expect(cells[0]).toBe(row.session_id);
      report.params.forEach((param, i) => {
        const value = row.values[param];
        expect(cells[i + 1]).toBe(value === null ? "" : String(value));
      });
    }
    // the fixture includes an absent param so the branch is actually covered
    expect(report.rows.some((r) =>
      report.params.some((p) => r.values[p] === null))).toBe(true);
    expect(html).toContain('class="absent"');
  });

  it("common arguments render verbatim", () => {
    const html = renderCommonArgs(report);
    if (Object.keys(report.common_args).length === 0) {
      expect(html).toContain("no common arguments");
    } else {
      for (const [k, v] of Object.entries(report.common_args)) {
        expect(html).toContain(`${k}=${String(v)}`);
      }
    }
  });
});

describe("compare charts", () => {
  it("groups events by metric name without touching values", () => {
    const metrics = seriesByMetric(events);
    expect([...metrics.keys()]).toEqual(["accuracy"]);
    const series = metrics.get("accuracy")!;
    expect(series.map((s) => s.sessionId)).toEqual(
      events.map((e) => e.session_id));
    series.forEach((s, i) => {
      expect(s.points).toEqual(events[i].events.map(([step, , value]) =>
        [step, value]));
    });
  });

  it("renders one polyline per session, tagged for hover linkage", () => {
    const metrics = seriesByMetric(events);
    const html = renderMetricChart("accuracy", metrics.get("accuracy")!);
    for (const e of events) {
      expect(html).toContain(`data-session-id="${e.session_id}"`);
    }
    expect([...html.matchAll(/<polyline/g)]).toHaveLength(events.length);
  });

  it("full view emits one chart per metric plus the matrix", () => {
    const html = renderCompareView(report, events);
    expect([...html.matchAll(/<figure class="chart"/g)]).toHaveLength(1);
    expect(html).toContain('id="compare-matrix"');
    // every session id appears both in the matrix and on a line
    for (const row of report.rows) {
      const hits = [...html.matchAll(
        new RegExp(`data-session-id="${row.session_id}"`, "g"))];
      expect(hits.length).toBeGreaterThanOrEqual(2);
    }
  });
});
