import { ApiClient } from "./api.js";
import { TriageSession } from "./session.js";
import { ERROR_CLASSES, ErrorClass, errorClassForKey, QueueItem } from "./types.js";

const CLASS_LABELS: Record<ErrorClass, string> = {
    SimilarClassConfusion: "Similar class confusion",
    NonTargetSubject: "Non-target subject",
    InadequateRepresentation: "Inadequate representation",
    PoorQuality: "Poor quality",
    Other: "Other",
};

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

function formatProb(prob: number): string {
    return `${(prob * 100).toFixed(1)}%`;
}

export class TriageView {
    constructor(
        private readonly api: ApiClient,
        private readonly session: TriageSession,
    ) {}

    bind(): void {
        const buttons = el<HTMLDivElement>("class-buttons");
        ERROR_CLASSES.forEach((cls, i) => {
            const button = document.createElement("button");
            button.className = "class-button";
            button.innerHTML = `<span class="key">${i + 1}</span> ${CLASS_LABELS[cls]}`;
            button.addEventListener("click", () => void this.submit(cls));
            buttons.appendChild(button);
        });
        document.addEventListener("keydown", (event) => {
            if (event.target instanceof HTMLInputElement) return;
            const cls = errorClassForKey(event.key);
            if (cls) {
                void this.submit(cls);
            } else if (event.key === "ArrowLeft") {
                this.session.prev();
                this.render();
            } else if (event.key === "ArrowRight") {
                this.session.next();
                this.render();
            }
        });
        el<HTMLButtonElement>("nav-back").addEventListener("click", () => {
            this.session.prev();
            this.render();
        });
        el<HTMLButtonElement>("nav-forward").addEventListener("click", () => {
            this.session.next();
            this.render();
        });
        el<HTMLButtonElement>("retry").addEventListener("click", () => {
            void this.session.retry().then(() => this.render());
        });
        el<HTMLInputElement>("annotator").addEventListener("change", (event) => {
            this.session.annotator = (event.target as HTMLInputElement).value || "anonymous";
        });
    }

    private async submit(cls: ErrorClass): Promise<void> {
        const note = el<HTMLInputElement>("note").value || undefined;
        const ok = await this.session.submit(cls, note);
        if (ok) el<HTMLInputElement>("note").value = "";
        this.render();
    }

    render(): void {
        const { annotated, total } = this.session.progress();
        el("progress").textContent = `${annotated}/${total} annotated`;
        this.renderItem(this.session.current);
        this.renderPrevalence();
        const banner = el("error-banner");
        banner.hidden = this.session.lastError === null;
        if (this.session.lastError) {
            el("error-text").textContent =
                `Submission failed (${this.session.lastError}); your selection is kept.`;
        }
    }

    private renderItem(item: QueueItem | null): void {
        const panel = el("item-panel");
        if (!item) {
            panel.hidden = true;
            el("done-panel").hidden = false;
            return;
        }
        panel.hidden = false;
        el("done-panel").hidden = true;
        el("image-id").textContent = item.image_id;
        el("truth-name").textContent = `${item.truth.name} (class ${item.truth.index})`;
        el("overlap-value").textContent = String(item.overlap);
        const image = el<HTMLImageElement>("subject");
        image.src = this.api.imageUrl(item.image_id);
        image.alt = item.truth.name;

        const members = el("members");
        members.textContent = "";
        for (const member of item.members) {
            const block = document.createElement("div");
            block.className = "member";
            const title = document.createElement("h3");
            title.textContent = member.method_id;
            block.appendChild(title);
            const list = document.createElement("ol");
            for (const entry of member.top3) {
                const li = document.createElement("li");
                li.textContent = `${entry.name} ${formatProb(entry.prob)}`;
                list.appendChild(li);
            }
            block.appendChild(list);
            members.appendChild(block);
        }

        const existing = el("existing-annotation");
        if (item.annotation) {
            existing.hidden = false;
            existing.textContent =
                `Annotated ${CLASS_LABELS[item.annotation.error_class]} ` +
                `by ${item.annotation.annotator}; submitting again revises it.`;
        } else {
            existing.hidden = true;
        }
    }

    private renderPrevalence(): void {
        const target = el("prevalence");
        target.textContent = "";
        const payload = this.session.prevalence;
        if (!payload) return;
        for (const cls of ERROR_CLASSES) {
            const entry = payload.classes[cls];
            const row = document.createElement("div");
            row.className = "prevalence-row";
            row.textContent = `${CLASS_LABELS[cls]}: ${entry.count} (${entry.percent}%)`;
            target.appendChild(row);
        }
        const remainder = document.createElement("div");
        remainder.className = "prevalence-row muted";
        remainder.textContent = `Unannotated: ${payload.unannotated}`;
        target.appendChild(remainder);
    }
}

export async function startApp(baseUrl: string = ""): Promise<TriageView> {
    const api = new ApiClient(baseUrl);
    const session = new TriageSession(api);
    const view = new TriageView(api, session);
    view.bind();
    const summary = await api.manifest();
    el("dataset").textContent =
        `${summary.dataset_id} (${summary.num_classes} classes)`;
    await session.start("hard");
    view.render();
    return view;
}
