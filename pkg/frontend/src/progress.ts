/** Live progress: a store applying push frames idempotently, and a channel
 * that reconnects with backoff and reconciles from GET /status. Delivery is
 * at-least-once, so everything here must tolerate duplicates. */

import { isPing, type PushMessage, type StatusDoc } from "./types.js";

export type ProgressListener = (status: StatusDoc) => void;

export class ProgressStore {
  private latest = new Map<string, StatusDoc>();
  private listeners = new Set<ProgressListener>();

  subscribe(listener: ProgressListener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  get(taskId: string): StatusDoc | undefined {
    return this.latest.get(taskId);
  }

  taskIds(): string[] {
    return [...this.latest.keys()];
  }

  /** Apply one frame; returns false (and notifies nobody) for duplicates and
   * frames older than what is already shown. */
  apply(status: StatusDoc): boolean {
    const current = this.latest.get(status.task_id);
    if (current && status.timestamp_ms <= current.timestamp_ms) {
      return false;
    }
    this.latest.set(status.task_id, status);
    for (const listener of this.listeners) listener(status);
    return true;
  }
}

/** Minimal WebSocket surface so tests can inject a fake. */
export interface SocketLike {
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
  close(): void;
}

export interface PushChannelOptions {
  socketFactory: (url: string) => SocketLike;
  /** Called after every (re)connect to catch up on missed frames. */
  fetchStatus: (taskId: string) => Promise<StatusDoc>;
  initialBackoffMs?: number;
  maxBackoffMs?: number;
  setTimeoutImpl?: (fn: () => void, ms: number) => unknown;
}

export class PushChannel {
  private socket: SocketLike | null = null;
  private backoffMs: number;
  private closed = false;
  /** True while the link is down and the store may lag the server. */
  stale = false;

  constructor(
    private readonly url: string,
    private readonly store: ProgressStore,
    private readonly options: PushChannelOptions,
  ) {
    this.backoffMs = options.initialBackoffMs ?? 500;
  }

  connect(): void {
    if (this.closed) return;
    const socket = this.options.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.backoffMs = this.options.initialBackoffMs ?? 500;
      void this.reconcile();
    };
    socket.onmessage = (event) => this.handleMessage(event.data);
    socket.onclose = () => {
      this.stale = true;
      if (this.closed) return;
      const wait = this.backoffMs;
      this.backoffMs = Math.min(this.backoffMs * 2, this.options.maxBackoffMs ?? 10_000);
      const schedule = this.options.setTimeoutImpl ?? setTimeout;
      schedule(() => this.connect(), wait);
    };
  }

  private handleMessage(data: string): void {
    let message: PushMessage;
    try {
      message = JSON.parse(data);
    } catch {
      return; // malformed frame: ignore, reconciliation will catch up
    }
    if (isPing(message)) return;
    this.store.apply(message);
  }

  /** Refetch the latest status of every known task so the store matches the
   * server after an outage. */
  async reconcile(): Promise<void> {
    for (const taskId of this.store.taskIds()) {
      try {
        this.store.apply(await this.options.fetchStatus(taskId));
      } catch {
        return; // keep the stale flag; the next reconnect retries
      }
    }
    this.stale = false;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
