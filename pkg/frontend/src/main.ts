/** Entry point: wires the API client, the push channel, and the views. */

import { ApiClient } from "./api.js";
import { renderTaskList, showProject } from "./app.js";
import { ProgressStore, PushChannel } from "./progress.js";

const BASE_URL = (window as { ITERFORGE_URL?: string }).ITERFORGE_URL ?? "http://127.0.0.1:8400";
const USER_ID = "u1";

function start(): void {
  const api = new ApiClient(BASE_URL);
  const store = new ProgressStore();
  const channel = new PushChannel(api.pushUrl(USER_ID), store, {
    socketFactory: (url) => new WebSocket(url) as unknown as import("./progress.js").SocketLike,
    fetchStatus: (taskId) => api.getTaskStatus(taskId),
  });
  channel.connect();

  const projectsRoot = document.getElementById("projects")!;
  const pipelineRoot = document.getElementById("pipeline")!;
  const tasksRoot = document.getElementById("tasks")!;
  const staleRoot = document.getElementById("stale")!;

  async function refresh(): Promise<void> {
    staleRoot.textContent = channel.stale ? "live updates interrupted — reconnecting" : "";
    const projects = await api.listProjects();
    projectsRoot.replaceChildren();
    for (const project of projects) {
      const link = document.createElement("a");
      link.textContent = `${project.name} (${project.stage})`;
      link.href = "#";
      link.onclick = (event) => {
        event.preventDefault();
        void showProject(api, store, pipelineRoot, project.project_id);
      };
      projectsRoot.appendChild(link);
      projectsRoot.appendChild(document.createElement("br"));
    }
    const tasks = await api.listTasks();
    renderTaskList(tasksRoot, tasks, store, (taskId) => void api.stopTask(taskId));
  }

  store.subscribe(() => void refresh());
  void refresh();
  setInterval(() => void refresh(), 5000); // read-only fallback when push is down
}

start();
