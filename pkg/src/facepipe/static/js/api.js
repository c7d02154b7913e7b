/** Typed client for the annotation service's /v1 endpoints. */
/** Error body from the service: {"error": {"code", "message"}}. */
export class ApiError extends Error {
    status;
    code;
    constructor(status, code, message) {
        super(message);
        this.status = status;
        this.code = code;
        this.name = "ApiError";
    }
    get isStaleLease() {
        return this.status === 409;
    }
}
export class AnnotationApi {
    baseUrl;
    client;
    fetchFn;
    constructor(baseUrl, client, fetchFn) {
        this.baseUrl = baseUrl;
        this.client = client;
        // bind lazily so a bare global `fetch` keeps its expected receiver
        this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
    }
    /** Lease the next pending task, or null when the queue is drained. */
    async nextTask() {
        const url = `${this.baseUrl}/v1/tasks/next?client=${encodeURIComponent(this.client)}`;
        const res = await this.fetchFn(url);
        if (res.status === 204) {
            return null;
        }
        if (!res.ok) {
            throw await this.toError(res);
        }
        return (await res.json());
    }
    /** Absolute URL for a task's image; PNG transcode for browser display. */
    imageUrl(task, format) {
        const suffix = format ? `?format=${format}` : "";
        return `${this.baseUrl}${task.image_url}${suffix}`;
    }
    /** Submit eye centers in ORIGINAL image coordinates.
     *
     * The service answers with the manifest record itself, plus an optional
     * preview_png_base64 key; split those apart here.
     */
    async submit(taskId, left, right) {
        const url = `${this.baseUrl}/v1/tasks/${encodeURIComponent(taskId)}/annotation`;
        const res = await this.fetchFn(url, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ left, right, client: this.client }),
        });
        if (!res.ok) {
            throw await this.toError(res);
        }
        const body = (await res.json());
        const { preview_png_base64, ...record } = body;
        return { record, previewPngBase64: preview_png_base64 ?? null };
    }
    async progress() {
        const res = await this.fetchFn(`${this.baseUrl}/v1/progress`);
        if (!res.ok) {
            throw await this.toError(res);
        }
        return (await res.json());
    }
    async toError(res) {
        let code = "http_error";
        let message = `${res.status} ${res.statusText}`;
        try {
            const body = (await res.json());
            if (body.error) {
                code = body.error.code ?? code;
                message = body.error.message ?? message;
            }
            else if (typeof body === "object" && body !== null && "detail" in body) {
                // FastAPI's own validation errors use {"detail": [...]}
                code = "invalid_request";
                message = JSON.stringify(body.detail);
            }
        }
        catch {
            // non-JSON body; keep the status-line message
        }
        return new ApiError(res.status, code, message);
    }
}
