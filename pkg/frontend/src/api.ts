/** Typed client for the annotation service's /v1 endpoints. */

import type { Point } from "./clicks.js";

export interface TaskInfo {
  id: string;
  image_url: string;
  width: number;
  height: number;
  bucket: string;
  lease_expires: number;
}

export interface ManifestRecord {
  input: string;
  outcome: string;
  output: string | null;
  eyes: [number, number][] | null;
  error: string | null;
  [key: string]: unknown;
}

export interface SubmitResult {
  record: ManifestRecord;
  /** PNG bytes of the processed chip, present on fresh successes. */
  previewPngBase64: string | null;
}

export interface Progress {
  pending: number;
  leased: number;
  done: number;
  manual_success: number;
  manual_failed: number;
}

/** Error body from the service: {"error": {"code", "message"}}. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }

  get isStaleLease(): boolean {
    return this.status === 409;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class AnnotationApi {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    readonly client: string,
    fetchFn?: FetchLike,
  ) {
    // bind lazily so a bare global `fetch` keeps its expected receiver
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  /** Lease the next pending task, or null when the queue is drained. */
  async nextTask(): Promise<TaskInfo | null> {
    const url = `${this.baseUrl}/v1/tasks/next?client=${encodeURIComponent(this.client)}`;
    const res = await this.fetchFn(url);
    if (res.status === 204) {
      return null;
    }
    if (!res.ok) {
      throw await this.toError(res);
    }
    return (await res.json()) as TaskInfo;
  }

  /** Absolute URL for a task's image; PNG transcode for browser display. */
  imageUrl(task: TaskInfo, format?: "png"): string {
    const suffix = format ? `?format=${format}` : "";
    return `${this.baseUrl}${task.image_url}${suffix}`;
  }

  /** Submit eye centers in ORIGINAL image coordinates.
   *
   * The service answers with the manifest record itself, plus an optional
   * preview_png_base64 key; split those apart here.
   */
  async submit(taskId: string, left: Point, right: Point): Promise<SubmitResult> {
    const url = `${this.baseUrl}/v1/tasks/${encodeURIComponent(taskId)}/annotation`;
    const res = await this.fetchFn(url, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ left, right, client: this.client }),
    });
    if (!res.ok) {
      throw await this.toError(res);
    }
    const body = (await res.json()) as ManifestRecord & { preview_png_base64?: string };
    const { preview_png_base64, ...record } = body;
    return { record, previewPngBase64: preview_png_base64 ?? null };
  }

  async progress(): Promise<Progress> {
    const res = await this.fetchFn(`${this.baseUrl}/v1/progress`);
    if (!res.ok) {
      throw await this.toError(res);
    }
    return (await res.json()) as Progress;
  }

  private async toError(res: Response): Promise<ApiError> {
    let code = "http_error";
    let message = `${res.status} ${res.statusText}`;
    try {
      const body = (await res.json()) as { error?: { code?: string; message?: string } };
      if (body.error) {
        code = body.error.code ?? code;
        message = body.error.message ?? message;
      } else if (typeof body === "object" && body !== null && "detail" in body) {
        // FastAPI's own validation errors use {"detail": [...]}
        code = "invalid_request";
        message = JSON.stringify((body as { detail: unknown }).detail);
      }
    } catch {
      // non-JSON body; keep the status-line message
    }
    return new ApiError(res.status, code, message);
  }
}
