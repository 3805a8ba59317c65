// App shell: token handling, tab switching, polling, and event wiring.
// All rendering is delegated to the pure view modules; this file owns the
// only live DOM access.

import { Api, ApiError } from "./api.js";
import { renderCompareView } from "./compareView.js";
import {
  renderAggregate,
  renderGpuHistory,
  renderNodes,
  renderSessionBars,
} from "./gpuDashboard.js";
import { renderLeaderboard } from "./leaderboardView.js";
import { actionRequest, renderSessionTable } from "./sessionTable.js";
import { esc } from "./render.js";

const POLL_MS = Number(localStorage.getItem("deskml.poll_ms") ?? "2000");

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function token(): string {
  let stored = localStorage.getItem("deskml.token");
  if (!stored) {
    stored = window.prompt("API token") ?? "";
    localStorage.setItem("deskml.token", stored);
  }
  return stored;
}

const api = new Api("", token());
const selected = new Set<string>();
let currentDataset = "";
let windowSeconds = 60;
let drilledSession: string | null = null;
let inflight = false;

function showError(message: string): void {
  const box = el("error");
  box.textContent = message;
  box.classList.remove("hidden");
  window.setTimeout(() => box.classList.add("hidden"), 6000);
}

async function refreshSessions(): Promise<void> {
  const payload = await api.listSessions();
  el("sessions").innerHTML = renderSessionTable(payload);
  for (const input of document.querySelectorAll<HTMLInputElement>("input.sel")) {
    input.checked = selected.has(input.dataset.sessionId ?? "");
  }
  const datasets = [...new Set(payload.sessions.map((s) => s.dataset_id))];
  if (!currentDataset && datasets.length > 0) {
    currentDataset = datasets[0];
  }
  el("dataset-picker").innerHTML = datasets
    .map((d) =>
      `<option value="${esc(d)}"${d === currentDataset ? " selected" : ""}>${esc(d)}</option>`)
    .join("");
}

async function refreshCompare(): Promise<void> {
  const panel = el("compare");
  if (selected.size < 2) {
    panel.innerHTML = `<p class="muted">select two or more sessions to compare</p>`;
    return;
  }
  const ids = [...selected].sort();
  const report = await api.compare(ids);
  const events = await Promise.all(ids.map((sid) => api.events(sid)));
  panel.innerHTML = renderCompareView(report, events);
}

async function refreshLeaderboard(): Promise<void> {
  if (!currentDataset) return;
  el("board").innerHTML = renderLeaderboard(await api.leaderboard(currentDataset));
}

async function refreshGpus(): Promise<void> {
  const status = await api.status();
  const to = status.now_ms;
  const from = Math.max(0, to - windowSeconds * 1000);
  const agg = await api.aggregate(from, to);
  el("gpu-aggregate").innerHTML = renderAggregate(agg);
  el("gpu-bars").innerHTML = renderSessionBars(agg);
  el("gpu-nodes").innerHTML = renderNodes(await api.nodes());
  if (drilledSession) {
    el("gpu-drill").innerHTML =
      renderGpuHistory(await api.sessionTelemetry(drilledSession));
  }
  el("statusline").textContent =
    `epoch ${status.scheduler_epoch} (${status.leader}) | ` +
    `${status.alive_nodes}/${status.nodes} nodes | ` +
    `queue ${status.queue_depth} | t=${status.now_ms}ms`;
}

async function refresh(): Promise<void> {
  if (inflight) return;
  inflight = true;
  try {
    await refreshSessions();
    await refreshCompare();
    await refreshLeaderboard();
    await refreshGpus();
  } catch (err) {
    showError(err instanceof ApiError ? err.message : String(err));
  } finally {
    inflight = false;
  }
}

function wire(): void {
  document.body.addEventListener("click", async (event) => {
    const target = event.target as HTMLElement;
    const button = target.closest<HTMLElement>("button.act");
    if (button && !button.hasAttribute("disabled")) {
      const action = button.dataset.action as "stop" | "fork" | "rm";
      const sid = button.dataset.sessionId!;
      const request = actionRequest(action, sid);
      try {
        if (action === "stop") await api.stopSession(sid);
        else if (action === "rm") await api.rmSession(sid);
        else {
          const raw = window.prompt("override (key=value), empty for none") ?? "";
          const overrides: Record<string, unknown> = {};
          if (raw.includes("=")) {
            const [k, v] = raw.split("=", 2);
            try { overrides[k] = JSON.parse(v); } catch { overrides[k] = v; }
          }
          await api.forkSession(sid, overrides);
        }
      } catch (err) {
        showError(err instanceof ApiError
          ? `${request.method} ${request.path}: ${err.message}`
          : String(err));
      }
      await refresh();
    }
  });

  document.body.addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    if (input.matches("input.sel")) {
      const sid = input.dataset.sessionId!;
      if (input.checked) selected.add(sid);
      else selected.delete(sid);
      void refreshCompare();
    }
  });

  // hover linkage between chart lines, matrix rows, and bar rows
  document.body.addEventListener("mouseover", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>(
      "[data-session-id]");
    if (!target?.dataset.sessionId) return;
    for (const node of document.querySelectorAll<HTMLElement>(
      `[data-session-id="${CSS.escape(target.dataset.sessionId)}"]`)) {
      node.classList.add("hl");
    }
  });
  document.body.addEventListener("mouseout", () => {
    for (const node of document.querySelectorAll<HTMLElement>(".hl")) {
      node.classList.remove("hl");
    }
  });

  document.body.addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest<HTMLElement>(
      "#session-bars .bar-row");
    if (row?.dataset.sessionId) {
      drilledSession = row.dataset.sessionId;
      void refreshGpus();
    }
  });

  el("dataset-picker").addEventListener("change", (event) => {
    currentDataset = (event.target as HTMLSelectElement).value;
    void refreshLeaderboard();
  });
  el("window-picker").addEventListener("change", (event) => {
    windowSeconds = Number((event.target as HTMLSelectElement).value);
    void refreshGpus();
  });
  el("logout").addEventListener("click", () => {
    localStorage.removeItem("deskml.token");
    location.reload();
  });
}

wire();
void refresh();
window.setInterval(() => void refresh(), POLL_MS);
