// Leaderboard: ranked best score per user with expandable per-user
// submission history. Ordering and scores come from the gateway verbatim.

import { cell, esc, tag } from "./render.js";
import type { Leaderboard } from "./types.js";

export function renderHistory(board: Leaderboard, userId: string): string {
  const rows = (board.history[userId] ?? [])
    .map((h) =>
      `<tr><td class="mono">${cell(h.submission_id)}</td>` +
      `<td>${cell(h.score)}</td>` +
      `<td class="mono">${cell(h.session_id)}</td>` +
      `<td class="mono">${cell(h.checkpoint_id)}</td>` +
      `<td>${cell(h.ts)}</td></tr>`,
    )
    .join("");
  return tag("table", { class: "grid history" },
    "<thead><tr><th>submission</th><th>score</th><th>session</th>" +
    "<th>checkpoint</th><th>at</th></tr></thead>" +
    `<tbody>${rows}</tbody>`);
}

export function renderLeaderboard(board: Leaderboard): string {
  const caption =
    `<p class="muted">dataset <b>${cell(board.dataset_id)}</b>, metric ` +
    `<b>${cell(board.metric_name)}</b> (${cell(board.order)})</p>`;
  const rows = board.entries
    .map((entry) => {
      const history = renderHistory(board, entry.user_id);
      return (
        `<details class="entry" data-user="${esc(entry.user_id)}">` +
        `<summary><span class="rank">${cell(entry.rank)}</span>` +
        `<span class="user">${cell(entry.user_id)}</span>` +
        `<span class="score">${cell(entry.score)}</span>` +
        `<span class="mono session">${cell(entry.session_id)}</span>` +
        `<span class="muted">${cell(entry.submission_count)} submissions</span>` +
        `</summary>${history}</details>`
      );
    })
    .join("");
  return `<section id="leaderboard">${caption}${rows || '<p class="muted">no submissions yet</p>'}</section>`;
}
