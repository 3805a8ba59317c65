// Leaderboard rendering: ranks, scores, and history exactly as served.

import { describe, expect, it } from "vitest";
import { renderHistory, renderLeaderboard } from "../src/leaderboardView.js";
import type { Leaderboard } from "../src/types.js";
import { fixture } from "./fixtures.js";

const board = fixture<Leaderboard>("leaderboard.json");

describe("leaderboard", () => {
  it("renders entries in the served order with byte-equal fields", () => {
    const html = renderLeaderboard(board);
    const users = [...html.matchAll(/<span class="user">([^<]*)<\/span>/g)]
      .map((m) => m[1]);
    expect(users).toEqual(board.entries.map((e) => e.user_id));
    const ranks = [...html.matchAll(/<span class="rank">([^<]*)<\/span>/g)]
      .map((m) => m[1]);
    expect(ranks).toEqual(board.entries.map((e) => String(e.rank)));
    const scores = [...html.matchAll(/<span class="score">([^<]*)<\/span>/g)]
      .map((m) => m[1]);
    expect(scores).toEqual(board.entries.map((e) => String(e.score)));
    expect(html).toContain(board.metric_name);
    expect(html).toContain(`(${board.order})`);
  });

  it("expandable history lists every submission for the user", () => {
    for (const entry of board.entries) {
      const html = renderHistory(board, entry.user_id);
      const rows = [...html.matchAll(/<tr><td/g)];
      expect(rows).toHaveLength(board.history[entry.user_id].length);
      for (const h of board.history[entry.user_id]) {
        expect(html).toContain(h.submission_id);
        expect(html).toContain(String(h.score));
      }
    }
    // fixture really exercises a multi-submission history
    expect(Object.values(board.history).some((h) => h.length > 1)).toBe(true);
  });

  it("fixture ordering matches its own rank fields", () => {
    expect(board.entries.map((e) => e.rank)).toEqual(
      board.entries.map((_, i) => i + 1));
  });
});
