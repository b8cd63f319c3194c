/** Shared wire types mirroring the annotation service's JSON payloads. */

export interface SceneSummary {
  id: string;
  n_images: number;
  annotated: boolean;
}

export interface ImageEntry {
  image_id: number;
  name: string;
  url?: string;
}

export type Quality = "good" | "bad";

export interface AnnotationRecord {
  scene_id: string;
  quality: Quality;
  annotator: string;
  line: [number[], number[]] | null;
  measured_meters: number | null;
  scale_to_meters: number | null;
  timestamp: string;
}

/** Payload the client posts; the service recomputes and stores the scale. */
export interface AnnotationSubmission {
  quality: Quality;
  annotator: string;
  line?: [number[], number[]];
  measured_meters?: number;
}

export type Vec3 = [number, number, number];

export interface PointCloudData {
  count: number;
  /** xyz triples, length 3 * count */
  positions: Float32Array;
  /** rgb triples in [0, 1], length 3 * count */
  colors: Float32Array;
}
