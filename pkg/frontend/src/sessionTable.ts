// Session table with lifecycle actions. Stop/fork/rm buttons are enabled
// exactly where the lifecycle allows the transition; everything shown is a
// raw gateway value.

import { cell, esc, tag } from "./render.js";
import type { SessionInfo, SessionsResponse } from "./types.js";

const STOPPABLE = new Set(["queued", "preparing", "running", "serving"]);
const TERMINAL = new Set(["done", "failed", "stopped", "killed_oom"]);

export interface ActionSpec {
  action: "stop" | "fork" | "rm";
  enabled: boolean;
}

export function actionsFor(session: SessionInfo): ActionSpec[] {
  return [
    { action: "stop", enabled: STOPPABLE.has(session.state) },
    // forking needs a checkpoint or a finished parent; queued sessions have neither
    { action: "fork", enabled: session.state !== "queued" },
    { action: "rm", enabled: TERMINAL.has(session.state) },
  ];
}

// the one place action names map onto endpoint calls
export function actionRequest(
  action: ActionSpec["action"],
  sessionId: string,
): { method: string; path: string; body: Record<string, unknown> } {
  return {
    method: "POST",
    path: `/v1/sessions/${sessionId}/${action}`,
    body: action === "fork" ? { overrides: {} } : {},
  };
}

export function renderSessionRow(session: SessionInfo): string {
  const buttons = actionsFor(session)
    .map((spec) =>
      tag("button", {
        "data-action": spec.action,
        "data-session-id": session.session_id,
        class: "act",
        disabled: spec.enabled ? null : "disabled",
      }, spec.action),
    )
    .join("");
  const select = `<input type="checkbox" class="sel" data-session-id="${esc(session.session_id)}">`;
  return tag(
    "tr",
    { "data-session-id": session.session_id },
    `<td>${select}</td>` +
    `<td class="mono">${cell(session.session_id)}</td>` +
    `<td>${tag("span", { class: `chip chip-${esc(session.state)}` }, cell(session.state))}</td>` +
    `<td>${cell(session.owner)}</td>` +
    `<td>${cell(session.dataset_id)}</td>` +
    `<td>${cell(session.image_id)}</td>` +
    `<td>${cell(session.gpus)}</td>` +
    `<td>${cell(session.node_id)}</td>` +
    `<td class="mono">${cell(session.memo)}</td>` +
    `<td class="actions">${buttons}</td>`,
  );
}

export function renderSessionTable(payload: SessionsResponse): string {
  const header =
    "<tr><th></th><th>session</th><th>state</th><th>owner</th><th>dataset</th>" +
    "<th>image</th><th>gpus</th><th>node</th><th>memo</th><th>actions</th></tr>";
  const rows = payload.sessions.map(renderSessionRow).join("");
  return tag("table", { class: "grid", id: "session-table" },
    `<thead>${header}</thead><tbody>${rows}</tbody>`);
}
