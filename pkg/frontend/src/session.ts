import { ApiClient } from "./api.js";
import { ErrorClass, PrevalencePayload, QueueItem } from "./types.js";

export interface PendingSubmission {
    imageId: string;
    errorClass: ErrorClass;
    note?: string;
}

/** Triage workflow state: one queue pass with back/forward navigation.
 *
 *  The item list is fetched once per session so positions stay stable while
 *  the user works; submitted annotations are patched into the local items
 *  and the prevalence panel is re-fetched after every accepted submission.
 *  A failed submission keeps the selection in `pending` for retry.
 */
export class TriageSession {
    items: QueueItem[] = [];
    index = 0;
    prevalence: PrevalencePayload | null = null;
    pending: PendingSubmission | null = null;
    lastError: string | null = null;
    annotator = "anonymous";

    constructor(private readonly api: ApiClient) {}

    async start(group: string = "hard"): Promise<void> {
        this.items = await this.api.queue(group);
        this.index = 0;
        this.prevalence = await this.api.prevalence();
    }

    get current(): QueueItem | null {
        return this.items[this.index] ?? null;
    }

    progress(): { annotated: number; total: number } {
        const annotated = this.items.filter((item) => item.annotation).length;
        return { annotated, total: this.items.length };
    }

    next(): void {
        if (this.index < this.items.length - 1) this.index += 1;
    }

    prev(): void {
        if (this.index > 0) this.index -= 1;
    }

    goTo(index: number): void {
        if (index >= 0 && index < this.items.length) this.index = index;
    }

    /** Submit for the current item; auto-advances on success. */
    async submit(errorClass: ErrorClass, note?: string): Promise<boolean> {
        const item = this.current;
        if (!item) return false;
        return this.post({ imageId: item.image_id, errorClass, note });
    }

    async retry(): Promise<boolean> {
        if (!this.pending) return false;
        return this.post(this.pending);
    }

    private async post(submission: PendingSubmission): Promise<boolean> {
        this.pending = submission;
        let record;
        try {
            record = await this.api.submitAnnotation(
                submission.imageId,
                submission.errorClass,
                this.annotator,
                submission.note,
            );
        } catch (error) {
            // keep the pending selection so a retry can re-post it
            this.lastError = error instanceof Error ? error.message : String(error);
            return false;
        }
        this.pending = null;
        this.lastError = null;
        const item = this.items.find((it) => it.image_id === submission.imageId);
        if (item) item.annotation = record;
        this.advanceToNextUnannotated();
        this.prevalence = await this.api.prevalence();
        return true;
    }

    private advanceToNextUnannotated(): void {
        for (let step = 1; step <= this.items.length; step += 1) {
            const candidate = this.index + step;
            if (candidate >= this.items.length) break;
            if (!this.items[candidate].annotation) {
                this.index = candidate;
                return;
            }
        }
        const firstOpen = this.items.findIndex((item) => !item.annotation);
        if (firstOpen >= 0) {
            this.index = firstOpen;
        } else if (this.index < this.items.length - 1) {
            this.index += 1;
        }
    }
}
