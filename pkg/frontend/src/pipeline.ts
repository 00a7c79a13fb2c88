/** Pipeline view model: the connected-stage strip at the top of a project
 * page. The UI never decides stage availability itself — the server's
 * next_action response is the single source of truth. */

import { STAGE_ORDER, type NextAction, type ProjectState, type StageName } from "./types.js";

export type StageStatus = "locked" | "actionable" | "running" | "done" | "failed";

export interface StageView {
  name: StageName;
  status: StageStatus;
  /** 0..1, present only while the stage is running. */
  progress?: number;
}

export interface PipelineViewModel {
  projectId: string;
  stages: StageView[];
  roundIndex: number;
  accuracyHistory: Array<{ round: number; accuracy: number; trainingSize: number }>;
  autoAdvance: boolean;
  finished: boolean;
  finishReason: string | null;
  interruptEnabled: boolean;
  outputModel: string | null;
  error: string | null;
}

/** Round 0 has no mining: the loop enters at label (or train when the
 * initial data is already labeled), so earlier stages never ran. */
function stageRan(stage: StageName, current: StageName, roundIndex: number): boolean {
  const order = STAGE_ORDER.indexOf(stage);
  const now = STAGE_ORDER.indexOf(current);
  if (order >= now) return false;
  if (roundIndex === 0 && (stage === "mine" || stage === "update-data")) return false;
  return true;
}

export function buildPipelineView(
  project: ProjectState,
  next: NextAction,
  runningProgress?: number,
): PipelineViewModel {
  const base = {
    projectId: project.project_id,
    roundIndex: project.round_index,
    accuracyHistory: project.history.map(([round, accuracy, trainingSize]) => ({
      round,
      accuracy,
      trainingSize,
    })),
    autoAdvance: project.auto_advance,
    finishReason: project.finish_reason,
    outputModel: project.output_model,
  };

  if (next.stage === "finished") {
    return {
      ...base,
      stages: STAGE_ORDER.map((name) => ({ name, status: "done" as const })),
      finished: true,
      interruptEnabled: false,
      error: null,
    };
  }

  const current = next.stage;
  const stages: StageView[] = STAGE_ORDER.map((name) => {
    if (name === current) {
      if (next.failed) return { name, status: "failed" };
      if (next.in_progress) return { name, status: "running", progress: runningProgress ?? 0 };
      return { name, status: "actionable" };
    }
    return {
      name,
      status: stageRan(name, current, project.round_index) ? "done" : "locked",
    };
  });

  return {
    ...base,
    stages,
    finished: false,
    interruptEnabled: true,
    error: next.failed ? next.error ?? "stage failed" : null,
  };
}

/** Exactly one stage may be actionable or running at a time; a finished or
 * failed pipeline has none. Guards against drift from the server contract. */
export function checkPipelineInvariant(view: PipelineViewModel): void {
  const active = view.stages.filter(
    (s) => s.status === "actionable" || s.status === "running",
  );
  const expected = view.finished || view.error !== null ? 0 : 1;
  if (active.length !== expected) {
    throw new Error(
      `pipeline invariant violated: ${active.length} active stages (expected ${expected})`,
    );
  }
}
