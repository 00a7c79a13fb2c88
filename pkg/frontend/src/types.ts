/** Wire types mirrored from the platform's HTTP and push interfaces. */

export type StageName = "mine" | "label" | "update-data" | "train" | "evaluate";

export const STAGE_ORDER: StageName[] = [
  "mine",
  "label",
  "update-data",
  "train",
  "evaluate",
];

export interface ProjectState {
  project_id: string;
  name: string;
  class_names: string[];
  data_superset: string;
  training_data: string | null;
  validation_data: string;
  target_accuracy: number;
  mining_batch_size: number;
  auto_advance: boolean;
  round_index: number;
  stage: StageName | "finished";
  current_model: string | null;
  current_accuracy: number;
  output_model: string | null;
  finish_reason: string | null;
  warning: string | null;
  stage_failed: boolean;
  stage_error: string | null;
  user_id: string;
  history: Array<[number, number, number]>; // [round, accuracy, training size]
  next_action?: NextAction;
}

export interface NextAction {
  stage: StageName | "finished";
  in_progress?: boolean;
  task_id?: string;
  round?: number;
  failed?: boolean;
  error?: string;
  description?: string;
  reason?: string;
}

export interface TaskView {
  task_id: string;
  user_id: string;
  kind: string;
  state: "pending" | "preparing" | "running" | "done" | "failure" | "broken";
  progress: number;
  created: number;
  started: number | null;
  finished: number | null;
  gpu_grant: number[] | null;
  outputs: Record<string, unknown>;
  error_message: string | null;
}

export interface StatusDoc {
  task_id: string;
  user_id: string;
  progress: number;
  state_code: number; // 1 pending, 2 running, 3 done, 4 error
  state_message?: string;
  error_message?: string;
  timestamp_ms: number;
}

/** Push frames are status docs; the channel also sends keepalive pings. */
export type PushMessage = StatusDoc | { type: "ping" };

export interface ParamSpec {
  key: string;
  type: "str" | "int" | "float" | "bool";
  default: string | number | boolean | null;
  required: boolean;
}

export interface ManifestView {
  name: string;
  version: string;
  kinds: string[];
  entry: string[];
  params: ParamSpec[];
  description: string;
}

export interface AssetPage {
  snapshot_id: string;
  total: number;
  offset: number;
  items: Array<{
    asset_id: string;
    size: number;
    annotations: Array<{ class_id: number; box: number[] }>;
  }>;
  class_names: string[];
}

export interface LabelTaskDoc {
  label_task_id: string;
  dataset: string;
  class_names: string[];
  state: "created" | "in-progress" | "completed" | "failed";
  progress: number;
  stale: boolean;
  retryable: boolean;
  last_error: string | null;
  result_snapshot: string | null;
}

export function isPing(message: PushMessage): message is { type: "ping" } {
  return "type" in message && message.type === "ping";
}
