// API payload shapes, mirroring the gateway's JSON bodies.

export interface SessionInfo {
  session_id: string;
  owner: string;
  team: string | null;
  dataset_id: string;
  image_id: string;
  config: Record<string, unknown>;
  gpus: number;
  memory: number;
  state: string;
  node_id: string | null;
  parent: string | null;
  seed: number;
  created_at: number;
  started_at: number | null;
  finished_at: number | null;
  start_step: number;
  sweep_id: string | null;
  memo: string;
  command: string;
  serving_checkpoint: string | null;
}

export interface SessionsResponse {
  sessions: SessionInfo[];
  total: number;
}

export interface CompareRow {
  session_id: string;
  values: Record<string, unknown>;
}

export interface CompareReport {
  common_args: Record<string, unknown>;
  params: string[];
  rows: CompareRow[];
}

// events come as [step, name, value, ts] tuples
export type EventTuple = [number, string, number, number];

export interface EventsResponse {
  session_id: string;
  events: EventTuple[];
  total: number;
}

export interface LeaderboardEntry {
  rank: number;
  user_id: string;
  score: number;
  session_id: string;
  checkpoint_id: string;
  submitted_at: number;
  submission_count: number;
}

export interface HistoryEntry {
  submission_id: string;
  score: number;
  ts: number;
  session_id: string;
  checkpoint_id: string;
}

export interface Leaderboard {
  dataset_id: string;
  metric_name: string;
  order: string;
  entries: LeaderboardEntry[];
  history: Record<string, HistoryEntry[]>;
}

export interface Aggregate {
  running_ratio: number;
  over80_ratio: number;
  per_session_mean: Record<string, number>;
  empty: boolean;
  window: [number, number];
  total_gpus: number;
}

export interface NodeInfo {
  node_id: string;
  total_gpus: number;
  available_gpus: number;
  total_memory: number;
  available_memory: number;
  cached_datasets: string[];
  cached_images: string[];
  liveness: string;
  last_heartbeat: number;
}

export interface NodesResponse {
  nodes: NodeInfo[];
}

export interface TelemetryRow {
  node_id: string;
  gpu_index: number;
  utilization_pct: number;
  memory_used: number;
  ts: number;
}

export interface SessionTelemetry {
  session_id: string;
  samples: TelemetryRow[];
}

export interface Status {
  scheduler_epoch: number;
  leader: string;
  nodes: number;
  alive_nodes: number;
  queue_depth: number;
  sessions: number;
  now_ms: number;
}
