/** Thin typed client for the platform's HTTP API. */

import type {
  AssetPage,
  LabelTaskDoc,
  ManifestView,
  ProjectState,
  StatusDoc,
  TaskView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string,
  ) {
    super(detail);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, doc.error ?? "error", doc.detail ?? "request failed");
    }
    return doc as T;
  }

  listProjects(): Promise<ProjectState[]> {
    return this.request("GET", "/api/projects");
  }

  getProject(projectId: string): Promise<ProjectState> {
    return this.request("GET", `/api/projects/${projectId}`);
  }

  createProject(body: Record<string, unknown>): Promise<{ project_id: string }> {
    return this.request("POST", "/api/projects", body);
  }

  advanceProject(projectId: string): Promise<ProjectState> {
    return this.request("POST", `/api/projects/${projectId}/advance`);
  }

  interruptProject(projectId: string): Promise<ProjectState> {
    return this.request("POST", `/api/projects/${projectId}/interrupt`);
  }

  importDataset(body: Record<string, unknown>): Promise<{ task_id: string }> {
    return this.request("POST", "/api/datasets/import", body);
  }

  listAssets(snapshotId: string, offset = 0, limit = 50): Promise<AssetPage> {
    return this.request(
      "GET",
      `/api/datasets/${snapshotId}/assets?offset=${offset}&limit=${limit}`,
    );
  }

  datasetOp(body: Record<string, unknown>): Promise<{ task_id: string }> {
    return this.request("POST", "/api/datasets/ops", body);
  }

  createTask(body: Record<string, unknown>): Promise<{ task_id: string }> {
    return this.request("POST", "/api/tasks", body);
  }

  listTasks(): Promise<TaskView[]> {
    return this.request("GET", "/api/tasks");
  }

  getTask(taskId: string): Promise<TaskView> {
    return this.request("GET", `/api/tasks/${taskId}`);
  }

  getTaskStatus(taskId: string): Promise<StatusDoc> {
    return this.request("GET", `/api/tasks/${taskId}/status`);
  }

  stopTask(taskId: string): Promise<TaskView> {
    return this.request("POST", `/api/tasks/${taskId}/stop`);
  }

  listExecutors(kind?: string): Promise<ManifestView[]> {
    const suffix = kind ? `?kind=${encodeURIComponent(kind)}` : "";
    return this.request("GET", `/api/executors${suffix}`);
  }

  registerExecutor(packagePath: string): Promise<ManifestView> {
    return this.request("POST", "/api/executors", { package_path: packagePath });
  }

  createLabelTask(body: Record<string, unknown>): Promise<LabelTaskDoc> {
    return this.request("POST", "/api/labels", body);
  }

  getLabelTask(labelTaskId: string): Promise<LabelTaskDoc> {
    return this.request("GET", `/api/labels/${labelTaskId}`);
  }

  /** ws:// URL for a user's push channel, derived from the HTTP base URL. */
  pushUrl(userId: string): string {
    return this.baseUrl.replace(/^http/, "ws") + `/ws/${userId}`;
  }
}
