// Wire types for the triage server API.

export const ERROR_CLASSES = [
    "SimilarClassConfusion",
    "NonTargetSubject",
    "InadequateRepresentation",
    "PoorQuality",
    "Other",
] as const;

export type ErrorClass = (typeof ERROR_CLASSES)[number];

// Keyboard shortcuts 1..5 map onto the classes in this fixed order.
export function errorClassForKey(key: string): ErrorClass | null {
    const index = Number.parseInt(key, 10) - 1;
    if (Number.isNaN(index) || index < 0 || index >= ERROR_CLASSES.length) {
        return null;
    }
    return ERROR_CLASSES[index];
}

export interface TruthInfo {
    index: number;
    name: string;
}

export interface TopPrediction {
    index: number;
    name: string;
    prob: number;
}

export interface MemberInfo {
    method_id: string;
    top3: TopPrediction[];
}

export interface AnnotationRecord {
    image_id: string;
    error_class: ErrorClass;
    annotator: string;
    timestamp: string;
    note?: string;
}

export interface QueueItem {
    image_id: string;
    truth: TruthInfo;
    overlap: number;
    members: MemberInfo[];
    annotation?: AnnotationRecord;
}

export interface ManifestSummary {
    dataset_id: string;
    num_classes: number;
    splits: Record<string, number>;
}

export interface PrevalenceClassEntry {
    count: number;
    percent: string;
}

export interface PrevalencePayload {
    classes: Record<string, PrevalenceClassEntry>;
    annotated: number;
    unannotated: number;
    strays: string[];
    disagreements: Record<string, string[]>;
}
