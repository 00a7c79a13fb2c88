/** DOM rendering. Everything here is a pure render of view models built in
 * pipeline.ts / forms.ts; no stage-availability logic lives in the UI. */

import type { ApiClient } from "./api.js";
import {
  buildPipelineView,
  checkPipelineInvariant,
  type PipelineViewModel,
  type StageView,
} from "./pipeline.js";
import type { ProgressStore } from "./progress.js";
import type { ProjectState, TaskView } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function stageNode(stage: StageView): HTMLElement {
  const node = el("li", `stage stage-${stage.status}`);
  node.appendChild(el("span", "stage-name", stage.name));
  if (stage.status === "running") {
    const pct = Math.round((stage.progress ?? 0) * 100);
    node.appendChild(el("span", "stage-progress", `${pct}%`));
  } else {
    node.appendChild(el("span", "stage-status", stage.status));
  }
  return node;
}

export function renderPipeline(
  container: HTMLElement,
  view: PipelineViewModel,
  onAdvance: () => void,
  onInterrupt: () => void,
): void {
  checkPipelineInvariant(view);
  container.replaceChildren();

  const header = el("div", "pipeline-header");
  header.appendChild(el("span", "round", `round ${view.roundIndex}`));
  const auto = el("label", "auto-advance");
  const toggle = el("input") as HTMLInputElement;
  toggle.type = "checkbox";
  toggle.checked = view.autoAdvance;
  toggle.disabled = true; // set at project creation; shown for context
  auto.appendChild(toggle);
  auto.appendChild(document.createTextNode("auto-advance"));
  header.appendChild(auto);
  container.appendChild(header);

  const strip = el("ul", "pipeline");
  for (const stage of view.stages) strip.appendChild(stageNode(stage));
  container.appendChild(strip);

  if (view.error) {
    container.appendChild(el("div", "banner banner-error", view.error));
  }

  const actions = el("div", "pipeline-actions");
  const actionable = view.stages.find((s) => s.status === "actionable" || s.status === "failed");
  if (!view.finished && actionable) {
    const advance = el("button", "advance", actionable.status === "failed" ? "retry" : "run");
    advance.onclick = onAdvance;
    actions.appendChild(advance);
  }
  const interrupt = el("button", "interrupt", "interrupt");
  interrupt.disabled = !view.interruptEnabled;
  interrupt.onclick = onInterrupt;
  actions.appendChild(interrupt);
  container.appendChild(actions);

  if (view.finished && view.outputModel) {
    const card = el("div", "model-card");
    card.appendChild(el("h3", undefined, "output model"));
    card.appendChild(el("code", undefined, view.outputModel));
    card.appendChild(el("p", undefined, `finished: ${view.finishReason ?? ""}`));
    container.appendChild(card);
  }

  if (view.accuracyHistory.length > 0) {
    const history = el("table", "history");
    for (const row of view.accuracyHistory) {
      const tr = el("tr");
      tr.appendChild(el("td", undefined, `round ${row.round}`));
      tr.appendChild(el("td", undefined, row.accuracy.toFixed(3)));
      tr.appendChild(el("td", undefined, `${row.trainingSize} assets`));
      history.appendChild(tr);
    }
    container.appendChild(history);
  }
}

export function renderTaskList(
  container: HTMLElement,
  tasks: TaskView[],
  store: ProgressStore,
  onStop: (taskId: string) => void,
): void {
  container.replaceChildren();
  const table = el("table", "tasks");
  for (const task of tasks) {
    const tr = el("tr", `task task-${task.state}`);
    tr.appendChild(el("td", undefined, task.task_id));
    tr.appendChild(el("td", undefined, task.kind));
    tr.appendChild(el("td", undefined, task.state));
    const live = store.get(task.task_id);
    const progress = live ? live.progress : task.progress;
    tr.appendChild(el("td", undefined, `${Math.round(progress * 100)}%`));
    const cell = el("td");
    if (task.state === "pending" || task.state === "preparing" || task.state === "running") {
      const stop = el("button", "stop", "stop");
      stop.onclick = () => onStop(task.task_id);
      cell.appendChild(stop);
    }
    tr.appendChild(cell);
    table.appendChild(tr);
  }
  container.appendChild(table);
}

export function renderErrorBanner(container: HTMLElement, message: string, onRetry: () => void): void {
  container.replaceChildren();
  const banner = el("div", "banner banner-error");
  banner.appendChild(el("span", undefined, message));
  const retry = el("button", "retry", "retry");
  retry.onclick = onRetry;
  banner.appendChild(retry);
  container.appendChild(banner);
}

export async function showProject(
  api: ApiClient,
  store: ProgressStore,
  container: HTMLElement,
  projectId: string,
): Promise<void> {
  let project: ProjectState;
  try {
    project = await api.getProject(projectId);
  } catch (exc) {
    renderErrorBanner(
      container,
      `failed to load project: ${(exc as Error).message}`,
      () => void showProject(api, store, container, projectId),
    );
    return;
  }
  const next = project.next_action ?? { stage: project.stage };
  const runningTask = next.in_progress && next.task_id ? store.get(next.task_id) : undefined;
  const view = buildPipelineView(project, next, runningTask?.progress);
  renderPipeline(
    container,
    view,
    () => void api.advanceProject(projectId).then(() => showProject(api, store, container, projectId)),
    () => void api.interruptProject(projectId).then(() => showProject(api, store, container, projectId)),
  );
}
