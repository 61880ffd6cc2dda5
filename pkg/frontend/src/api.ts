import {
    AnnotationRecord,
    ErrorClass,
    ManifestSummary,
    PrevalencePayload,
    QueueItem,
} from "./types.js";

export class ApiError extends Error {
    constructor(
        message: string,
        public readonly status: number,
        public readonly code: string,
    ) {
        super(message);
    }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client for the triage server; every number shown in the UI
 *  comes through here (the UI computes nothing itself). */
export class ApiClient {
    private readonly fetchImpl: FetchLike;

    constructor(
        private readonly baseUrl: string = "",
        fetchImpl?: FetchLike,
    ) {
        this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
    }

    private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
        const response = await this.fetchImpl(this.baseUrl + path, init);
        if (!response.ok) {
            let code = "http_error";
            try {
                const body = (await response.json()) as { error?: string };
                if (body.error) code = body.error;
            } catch {
                // non-JSON error body; keep the generic code
            }
            throw new ApiError(`${path} failed (${response.status})`, response.status, code);
        }
        return (await response.json()) as T;
    }

    manifest(): Promise<ManifestSummary> {
        return this.requestJson<ManifestSummary>("/api/manifest");
    }

    queue(group: string = "hard"): Promise<QueueItem[]> {
        return this.requestJson<QueueItem[]>(`/api/queue?group=${encodeURIComponent(group)}`);
    }

    annotations(): Promise<Record<string, AnnotationRecord>> {
        return this.requestJson<Record<string, AnnotationRecord>>("/api/annotations");
    }

    prevalence(): Promise<PrevalencePayload> {
        return this.requestJson<PrevalencePayload>("/api/prevalence");
    }

    submitAnnotation(
        imageId: string,
        errorClass: ErrorClass,
        annotator: string,
        note?: string,
    ): Promise<AnnotationRecord> {
        const body: Record<string, string> = {
            image_id: imageId,
            error_class: errorClass,
            annotator,
        };
        if (note !== undefined && note !== "") body.note = note;
        return this.requestJson<AnnotationRecord>("/api/annotation", {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
    }

    imageUrl(imageId: string): string {
        return `${this.baseUrl}/api/image/${encodeURIComponent(imageId)}`;
    }
}
